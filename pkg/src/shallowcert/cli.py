"""Command-line experiment runner.

Every subcommand resolves its configuration (defaults, then the TOML file's
top-level keys, then its ``[subcommand]`` table, then ``--set`` pairs, then
dedicated flags), validates it before computing anything, and writes its
outputs into ``--out``.  JSON and CSV outputs depend only on the resolved
configuration; wall-clock data goes to ``metadata.json`` alone.

Exit codes: 0 success, 2 configuration error, 3 budget exhausted or
inconclusive verdict, 4 I/O error, 5 internal invariant violation.
"""
import argparse
import csv
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__, kernels, limits
from . import ansatz, bayesopt, entropy, intrinsic, noise, qsim, scp, shadows
from .errors import BudgetExhausted, CapExceeded, ConfigError, InvariantViolation, ShallowCertError

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_IO, EXIT_INVARIANT = 0, 2, 3, 4, 5

COMMANDS = ("prepare", "scp", "bmaxs", "validate-intrinsic", "purity-bound", "entropy", "shadows")

COMMON = {
    "seed": (int, 0),
    "mode": (str, "exact"),
    "threads": (int, 1),
    "emit_plot_data": (bool, False),
}

# keys that describe where the input state comes from
STATE_KEYS = {
    "state": (str, None),  # QSTATE1 path; otherwise the state is prepared from the keys below
    "n": (int, 2),
    "layout": (str, "brickwork"),
    "depth": (int, 1),
    "channel": (str, "local_depolarizing"),
    "strength": (float, 0.0),
    "params_file": (str, None),
}

SCHEMAS = {
    "prepare": {**STATE_KEYS, "output": (str, "state.qstate")},
    "purity-bound": {
        "n": (int, 1), "channel": (str, "local_depolarizing"), "strength": (float, 0.1),
        "depths": (list, [1, 2, 3]), "trials": (int, 2000),
    },
    "validate-intrinsic": {
        **STATE_KEYS, "strength": (float, 0.1), "epsilon": (float, 0.5), "N": (int, None),
        "probes": (int, 50), "seeds": (list, None), "kernel_degree": (int, None),
    },
    "shadows": {
        **STATE_KEYS, "snapshots": (int, 1000), "ensemble": (str, "haar"),
        "mom_batches": (int, 1), "probes": (int, 10),
    },
    "bmaxs": {
        **STATE_KEYS, "sample_depth": (int, None), "N": (int, 16), "T": (int, 100),
        "epsilon": (float, 0.1), "delta": (float, 0.1), "bmaxs_mode": (str, "practical"),
        "candidates": (int, 256), "snapshots": (int, 1000), "mom_batches": (int, 1),
        "ensemble": (str, "haar"),
    },
    "scp": {
        **STATE_KEYS, "epsilon": (float, 0.1), "delta": (float, 0.1), "k_exponent": (int, None),
        "N_override": (int, None), "T_override": (int, None), "N_cap": (int, 64),
        "T_cap": (int, 400), "eval_budget": (int, None), "bmaxs_mode": (str, "practical"),
        "candidates": (int, 256), "snapshots": (int, 1000), "mom_batches": (int, 1),
        "ensemble": (str, "haar"),
    },
    "entropy": {
        **STATE_KEYS, "eta": (float, 0.25), "eps": (float, 0.05), "method": (str, "hadamard"),
        "shots": (int, None), "over_cap": (str, "ring"), "threshold": (float, None),
        "max_l": (int, 4),
    },
}


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def _coerce(field, typ, value):
    if value is None:
        return None
    if typ is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(field, f"expected a boolean, got {value!r}")
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(field, f"expected an integer, got {value!r}")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(field, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(field, "must be finite")
        return float(value)
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(field, f"expected a string, got {value!r}")
        return value
    if typ is list:
        if not isinstance(value, list):
            raise ConfigError(field, f"expected an array, got {value!r}")
        return list(value)
    raise AssertionError(typ)


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def load_config_file(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("--config", f"not valid TOML: {exc}") from exc


def resolve_config(command, file_doc=None, sets=(), flags=None):
    """Merge the layers and type-check every field."""
    schema = {**COMMON, **SCHEMAS[command]}
    merged = {k: default for k, (_, default) in schema.items()}
    layers = []
    if file_doc:
        top = {k: v for k, v in file_doc.items() if not isinstance(v, dict)}
        layers.append(("config file", top))
        section = file_doc.get(command, {})
        if not isinstance(section, dict):
            raise ConfigError(command, "section must be a table")
        layers.append((f"[{command}]", section))
        for name, val in file_doc.items():
            if isinstance(val, dict) and name not in COMMANDS:
                raise ConfigError(name, "unknown section")
    pairs = {}
    for item in sets:
        if "=" not in item:
            raise ConfigError("--set", f"expected KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        pairs[k.strip()] = _parse_value(v.strip())
    layers.append(("--set", pairs))
    layers.append(("flags", {k: v for k, v in (flags or {}).items() if v is not None}))
    for origin, layer in layers:
        for k, v in layer.items():
            if k not in schema:
                # top-level keys may target other commands; only flag real typos
                if origin == "config file" and any(k in SCHEMAS[c] for c in SCHEMAS):
                    continue
                raise ConfigError(k, f"unknown key for {command} (from {origin})")
            merged[k] = _coerce(k, schema[k][0], v)
    _validate(command, merged)
    return merged


def _need(cond, field, message):
    if not cond:
        raise ConfigError(field, message)


def _validate(command, c):
    _need(0 <= c["seed"] < 2**64, "seed", "must be an unsigned 64-bit integer")
    _need(c["mode"] in ("exact", "shadow"), "mode", "must be exact or shadow")
    _need(c["threads"] >= 1, "threads", "must be at least 1")
    if "channel" in c:
        _need(c["channel"] in ("local_depolarizing", "global_depolarizing", "bit_flip", "identity"),
              "channel", "must be local_depolarizing, global_depolarizing, bit_flip or identity")
        _need(0.0 <= c["strength"] <= 1.0, "strength", "must lie in [0, 1]")
    if "n" in c:
        _need(c["n"] >= 1, "n", "must be at least 1")
        if c.get("state") is None:
            _need(c["n"] <= limits.max_qubits(), "n",
                  f"exceeds the qubit cap {limits.max_qubits()} (SHALLOWCERT_MAX_QUBITS)")
    if "layout" in c:
        _need(c["layout"] in ansatz.LAYOUTS, "layout", f"must be one of {ansatz.LAYOUTS}")
        _need(c["depth"] >= 1, "depth", "must be at least 1")
        if c.get("state") is None and c.get("params_file") is None:
            _need(c["n"] >= 2, "n", "circuit preparation needs at least two qubits")
    if c.get("state") is not None:
        _need(Path(c["state"]).is_file(), "state", f"file {c['state']!r} not found")
    if c.get("params_file") is not None:
        _need(Path(c["params_file"]).is_file(), "params_file", f"file {c['params_file']!r} not found")
    if command == "prepare":
        _need("/" not in c["output"] and c["output"] not in ("", ".", ".."), "output",
              "must be a plain file name inside --out")
    if command == "purity-bound":
        _need(c["depths"] and all(isinstance(d, int) and d >= 1 for d in c["depths"]), "depths",
              "must be a nonempty array of positive integers")
        _need(c["trials"] == 0 or c["trials"] >= 30, "trials", "must be 0 or at least 30")
        _need(c["channel"] in ("local_depolarizing", "global_depolarizing", "identity", "bit_flip"),
              "channel", "unsupported")
    if command == "validate-intrinsic":
        _need(0 < c["epsilon"] < 1, "epsilon", "must lie in (0, 1)")
        _need(c["probes"] >= 10, "probes", "must be at least 10")
        _need(c["N"] is None or c["N"] >= 2, "N", "must be at least 2")
        _need(c["seeds"] is None or all(isinstance(s, int) and s >= 0 for s in c["seeds"]),
              "seeds", "must be an array of non-negative integers")
        _need(c["kernel_degree"] is None or c["kernel_degree"] >= 0, "kernel_degree", "must be >= 0")
    if command in ("shadows", "bmaxs", "scp"):
        _need(c["ensemble"] in shadows.ENSEMBLES, "ensemble", f"must be one of {shadows.ENSEMBLES}")
        _need(c["mom_batches"] >= 1, "mom_batches", "must be at least 1")
        _need(c["snapshots"] >= c["mom_batches"], "snapshots", "need one snapshot per batch at least")
    if command == "shadows":
        _need(c["probes"] >= 1, "probes", "must be at least 1")
    if command in ("bmaxs", "scp"):
        _need(0 < c["epsilon"] < 1, "epsilon", "must lie in (0, 1)")
        _need(0 < c["delta"] < 1, "delta", "must lie in (0, 1)")
        _need(c["bmaxs_mode"] in ("practical", "faithful"), "bmaxs_mode", "must be practical or faithful")
        _need(c["candidates"] >= 1, "candidates", "must be at least 1")
    if command == "bmaxs":
        _need(c["N"] >= 1, "N", "must be at least 1")
        _need(c["T"] >= 1, "T", "must be at least 1")
        _need(c["sample_depth"] is None or c["sample_depth"] >= 1, "sample_depth", "must be >= 1")
    if command == "scp":
        for k in ("N_override", "T_override", "eval_budget", "k_exponent"):
            _need(c[k] is None or c[k] >= 1, k, "must be positive")
        _need(c["N_cap"] >= 1 and c["T_cap"] >= 1, "N_cap", "caps must be positive")
    if command == "entropy":
        _need(0 < c["eta"] <= 0.25, "eta", "must lie in (0, 1/4]")
        _need(0 < c["eps"] <= 0.25, "eps", "must lie in (0, 1/4]")
        _need(c["method"] in ("hadamard", "parity"), "method", "must be hadamard or parity")
        _need(c["over_cap"] in ("ring", "truncate"), "over_cap", "must be ring or truncate")
        _need(c["shots"] is None or c["shots"] >= 2, "shots", "must be at least 2")
        _need(c["threshold"] is None or c["threshold"] > 0, "threshold", "must be positive")
        _need(c["max_l"] >= 1, "max_l", "must be at least 1")


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


class Output:
    """Writes files into the run directory, echoing the resolved config."""

    def __init__(self, out_dir, command, config):
        self.dir = Path(out_dir)
        self.command = command
        self.config = config
        self.files = []
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc

    def path(self, name):
        return self.dir / name

    def json(self, name, doc):
        doc = {"command": self.command, "config": self.config, **doc}
        text = json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=True)
        self.path(name).write_text(text + "\n")
        self.files.append(name)

    def csv(self, name, columns, rows):
        with open(self.path(name), "w", newline="") as fh:
            fh.write("# config=" + json.dumps(_jsonable(self.config), sort_keys=True) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(row.get(c)) for c in columns])
        self.files.append(name)

    def plot(self, rows):
        """Tidy long-format plot data: series, x, y, yerr."""
        if self.config.get("emit_plot_data"):
            self.csv("plot_data.csv", ("series", "x", "y", "yerr"), rows)

    def metadata(self, started, argv, exit_code):
        doc = {
            "command": self.command, "version": __version__, "argv": list(argv),
            "started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
            "elapsed_s": time.time() - started, "exit_code": exit_code,
            "python": platform.python_version(), "numpy": np.__version__,
            "kernel_backend": "numba" if kernels.USE_NUMBA else "numpy",
            "files": self.files,
        }
        self.path("metadata.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# shared pipeline pieces
# --------------------------------------------------------------------------

def _channel(c):
    return noise.ChannelSpec(c["channel"], c["strength"])


def prepare_state(c, rng):
    """The run's input state and a provenance record."""
    if c.get("state") is not None:
        try:
            st = qsim.load_state(c["state"])
        except (ValueError, InvariantViolation) as exc:
            raise ConfigError("state", f"{c['state']}: {exc}") from exc
        if isinstance(st, qsim.StateVector):
            st = qsim.density_from_array(np.outer(st.amplitudes, st.amplitudes.conj()))
        limits.check_qubits(st.n)
        return st, {"source": "file", "path": str(c["state"])}
    if c.get("params_file") is not None:
        arch, params = ansatz.loads_circuit(Path(c["params_file"]).read_text())
        if params is None:
            raise ConfigError("params_file", "circuit file carries no parameters")
    else:
        arch = ansatz.build_architecture(c["n"], c["layout"], c["depth"])
        params = ansatz.random_params(arch, rng)
    rho = ansatz.prepare_noisy_state(arch, params, _channel(c))
    prov = {
        "source": "prepared", "layout": arch.layout, "n": arch.n, "R": arch.R, "L": arch.L,
        "channel": c["channel"], "strength": c["strength"], "params_file": c.get("params_file"),
        "params": [float(v) for v in params.values],
    }
    return rho, prov


def _estimator(c):
    return shadows.EstimatorConfig(c["mode"], c["snapshots"], c["mom_batches"], c["ensemble"])


def _bmaxs_cfg(c):
    return bayesopt.BmaxsConfig(mode=c["bmaxs_mode"], candidates=c["candidates"], estimator=_estimator(c))


TRACE_COLUMNS = ("t", "kappa", "z_hash", "y", "L_exact", "mu", "sigma", "cumulative_R")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_prepare(c, out):
    """Prepare a (noisy) circuit state and write it as a QSTATE1 file."""
    rng = np.random.default_rng([c["seed"], 0])  # same stream as the inline preparation in scp
    rho, prov = prepare_state(c, rng)
    qsim.save_state(out.path(c["output"]), rho)
    out.files.append(c["output"])
    out.json(Path(c["output"]).stem + ".json", {
        "provenance": prov, "file": c["output"], "purity": qsim.purity(rho), "seed": c["seed"],
    })
    return EXIT_OK


def cmd_purity_bound(c, out):
    """Tabulate the purity lower bound with an optional Monte-Carlo check."""
    spec = _channel(c)
    rows = noise.purity_report(spec, c["n"], c["depths"], c["trials"], c["seed"])
    out.csv("purity.csv", noise.REPORT_COLUMNS, rows)
    F = noise.channel_f_metric(spec, c["n"])
    out.json("summary.json", {"F": F, "rows": rows})
    plot = [{"series": "eta", "x": r["depth"], "y": r["eta"], "yerr": 0.0} for r in rows]
    plot += [{"series": "mc", "x": r["depth"], "y": r["mc_mean"], "yerr": r["mc_stderr"]}
             for r in rows if r["mc_mean"] is not None]
    out.plot(plot)
    return EXIT_OK


def cmd_validate_intrinsic(c, out):
    """Check kernel ridge emulation of circuit fidelities."""
    seeds = c["seeds"] if c["seeds"] is not None else [c["seed"]]
    rho, prov = prepare_state(c, np.random.default_rng([c["seed"], 0]))
    arch = ansatz.build_architecture(rho.n, c["layout"], c["depth"])
    N = c["N"] or math.ceil(arch.L * arch.R * arch.n**2 / c["epsilon"] ** 2 - 1e-9)
    kcfg = intrinsic.KernelConfig.for_qubits(arch.n) if c["kernel_degree"] is None \
        else intrinsic.KernelConfig(degree=c["kernel_degree"])
    rows, plot, extra = [], [], []
    for s in seeds:
        rep = intrinsic.validate_intrinsic_connection(
            arch, N, c["probes"], rho, np.random.default_rng([s, 1]), kcfg, seed=s)
        rows.append(rep.row())
        frac = float(np.mean((rep.sum_beta >= 0.95) & (rep.sum_beta <= 1.05)))
        extra.append({"seed": s, "sum_beta_in_band": frac, "lambda": rep.lam,
                      "passes": rep.mean_abs_error <= rep.bound})
        plot += [{"series": f"seed{s}", "x": i, "y": e, "yerr": 0.0} for i, e in enumerate(rep.errors)]
    out.csv("intrinsic.csv", intrinsic.REPORT_COLUMNS, rows)
    out.json("summary.json", {"provenance": prov, "rows": rows, "per_seed": extra})
    out.plot(plot)
    return EXIT_OK


def cmd_shadows(c, out):
    """Collect classical shadows and estimate fidelities with random probes."""
    rng = np.random.default_rng(c["seed"])
    state_rng, shadow_rng, probe_rng = rng.spawn(3)
    rho, prov = prepare_state(c, state_rng)
    shadow = shadows.collect_shadows(rho, c["snapshots"], c["ensemble"], shadow_rng, seed=c["seed"])
    (out.path("shadow.json")).write_text(shadows.dumps_shadow(shadow) + "\n")
    out.files.append("shadow.json")
    probes = np.stack([qsim.haar_random_unitary(rho.dim, g)[:, 0] for g in probe_rng.spawn(c["probes"])],
                      axis=1)
    est, err = shadows.estimate_fidelity(shadow, probes, _estimator(c))
    exact = np.einsum("aj,ab,bj->j", probes.conj(), rho.matrix, probes).real if c["mode"] == "exact" else None
    rows = [{"probe": j, "estimate": est[j], "stderr": err[j],
             "exact": None if exact is None else exact[j]} for j in range(c["probes"])]
    out.csv("fidelities.csv", ("probe", "estimate", "stderr", "exact"), rows)
    out.json("summary.json", {"provenance": prov, "snapshots": len(shadow),
                              "approximate_ensemble": shadow.approximate, "rows": rows})
    out.plot([{"series": "fidelity", "x": r["probe"], "y": r["estimate"], "yerr": r["stderr"]} for r in rows])
    return EXIT_OK


def cmd_bmaxs(c, out):
    """Run one GP-UCB loss maximisation against random circuit samples."""
    rng = np.random.default_rng(c["seed"])
    state_rng, sample_rng, run_rng = rng.spawn(3)
    rho, prov = prepare_state(c, state_rng)
    arch = ansatz.build_architecture(rho.n, c["layout"], c["sample_depth"] or c["depth"])
    samples = ansatz.sample_qnn_set(arch, c["N"], sample_rng)
    source = shadows.StateSource(rho, c["mode"])
    res = bayesopt.bmaxs(source, samples, c["T"], c["epsilon"], c["delta"], _bmaxs_cfg(c), run_rng)
    out.csv("trace.csv", TRACE_COLUMNS, res.trace)
    out.json("summary.json", {
        **res.summary(), "seed": c["seed"], "provenance": prov,
        "mode_flags": {"estimator": c["mode"], "bmaxs": c["bmaxs_mode"]},
        "simple_regret": None if res.ledger.optimum is None else float(res.ledger.simple()),
        "average_regret": None if res.ledger.optimum is None else float(res.ledger.average()),
    })
    out.plot([{"series": "y", "x": r["t"], "y": r["y"], "yerr": r["sigma"]} for r in res.trace])
    return EXIT_OK


def cmd_scp(c, out):
    """Binary search for the minimal accepted circuit depth."""
    rho, prov = prepare_state(c, np.random.default_rng([c["seed"], 0]))
    if rho.n < 2:
        raise ConfigError("n", "the depth search needs at least two qubits")
    cfg = scp.ScpConfig(
        epsilon=c["epsilon"], delta=c["delta"], k_exponent=c["k_exponent"],
        N_override=c["N_override"], T_override=c["T_override"], N_cap=c["N_cap"],
        T_cap=c["T_cap"], seed=c["seed"], bmaxs=_bmaxs_cfg(c), eval_budget=c["eval_budget"],
    )
    verdict = scp.run_scp(shadows.StateSource(rho, c["mode"]), c["layout"], cfg)
    for p in verdict.probes:
        out.csv(f"trace_depth{p.depth}.csv", TRACE_COLUMNS, p.result.trace)
    out.json("verdict.json", {**verdict.to_json(), "report": scp.ssap_report(verdict), "provenance": prov})
    out.plot([{"series": "final_loss", "x": p.depth, "y": p.final_value, "yerr": 0.0} for p in verdict.probes])
    return EXIT_BUDGET if verdict.outcome == "inconclusive" else EXIT_OK


def cmd_entropy(c, out):
    """Estimate the von Neumann entropy from trace powers."""
    rng = np.random.default_rng(c["seed"])
    state_rng, run_rng, trace_rng = rng.spawn(3)
    rho, prov = prepare_state(c, state_rng)
    bell_mode = "exact" if c["mode"] == "exact" else "sampled"
    shots = c["shots"] or entropy.default_shots(rho.n)
    base = entropy.BellRunConfig(1, shots, bell_mode, "hadamard", c["over_cap"])
    res = entropy.estimate_entropy(rho, c["eta"], c["eps"], base, run_rng)
    rows = [{"n": rho.n, "l": t.l, "method": t.method, "mode": t.mode, "estimate": t.estimate,
             "stderr": t.stderr, "N_Q": t.shots, "seed": c["seed"]} for t in res.traces]
    checks = []
    if c["method"] == "parity":
        # the literal transversal circuit on small copy counts, next to the exact trace
        for l, g in zip(range(2, c["max_l"] + 1), trace_rng.spawn(max(c["max_l"] - 1, 0))):
            try:
                t = entropy.trace_power_swap(rho, entropy.BellRunConfig(l, shots, bell_mode, "parity"), g)
            except CapExceeded:
                break
            rows.append({"n": rho.n, "l": l, "method": "parity", "mode": t.mode, "estimate": t.estimate,
                         "stderr": t.stderr, "N_Q": t.shots, "seed": c["seed"]})
            checks.append({"l": l, "sign_convention": t.estimate, "bit_convention": t.alt_estimate,
                           "exact": qsim.trace_power_exact(rho, l)})
    out.csv("entropy.csv", entropy.REPORT_COLUMNS, rows)
    thr = c["threshold"] if c["threshold"] is not None else 1.0 / rho.n
    doc = {
        **res.summary(), "provenance": prov, "seed": c["seed"],
        "polynomial": {"degree": res.poly.degree, "eta": res.poly.eta, "eps": res.poly.eps,
                       "max_grid_error": res.poly.max_error, "dropped_constant": res.poly.dropped_constant},
        "relative_entropy_to_uniform": entropy.relative_entropy_to_uniform(res.S_hat, rho.n),
        "too_close_to_uniform": entropy.relative_entropy_screen(res.S_hat, rho.n, thr),
        "threshold": thr, "parity_checks": checks,
    }
    if c["mode"] == "exact":
        doc["S_exact"] = qsim.von_neumann_entropy_exact(rho)
    out.json("entropy.json", doc)
    out.plot([{"series": "trace_power", "x": r["l"], "y": r["estimate"], "yerr": r["stderr"]} for r in rows])
    return EXIT_OK


HANDLERS = {
    "prepare": cmd_prepare, "scp": cmd_scp, "bmaxs": cmd_bmaxs,
    "validate-intrinsic": cmd_validate_intrinsic, "purity-bound": cmd_purity_bound,
    "entropy": cmd_entropy, "shadows": cmd_shadows,
}

# dedicated flags per command: (flag, key, type)
STATE_FLAGS = [("--state", "state", str), ("--n", "n", int), ("--layout", "layout", str),
               ("--depth", "depth", int), ("--channel", "channel", str),
               ("--strength", "strength", float), ("--params-file", "params_file", str)]
FLAGS = {
    "prepare": STATE_FLAGS + [("--output", "output", str)],
    "purity-bound": [("--n", "n", int), ("--channel", "channel", str), ("--strength", "strength", float),
                     ("--trials", "trials", int)],
    "validate-intrinsic": STATE_FLAGS + [("--epsilon", "epsilon", float), ("--N", "N", int),
                                         ("--probes", "probes", int)],
    "shadows": STATE_FLAGS + [("--snapshots", "snapshots", int), ("--ensemble", "ensemble", str),
                              ("--probes", "probes", int)],
    "bmaxs": STATE_FLAGS + [("--N", "N", int), ("--T", "T", int), ("--epsilon", "epsilon", float)],
    "scp": STATE_FLAGS + [("--epsilon", "epsilon", float), ("--N-override", "N_override", int),
                          ("--T-override", "T_override", int), ("--eval-budget", "eval_budget", int)],
    "entropy": STATE_FLAGS + [("--eta", "eta", float), ("--eps", "eps", float),
                              ("--method", "method", str), ("--shots", "shots", int)],
}


FLAG_HELP = {
    "state": "QSTATE1 file holding the input state (otherwise one is prepared)",
    "n": "qubit count", "layout": "brickwork or staircase", "depth": "circuit depth of the prepared state",
    "channel": "local_depolarizing, dephasing or amplitude_damping",
    "strength": "noise strength per layer and qubit", "params_file": "circuit JSON with fixed parameters",
    "output": "QSTATE1 file name inside --out", "trials": "Haar trials per depth",
    "epsilon": "accuracy target", "N": "sample count", "T": "GP-UCB iterations",
    "probes": "probe count", "snapshots": "shadow snapshots per estimate",
    "ensemble": "haar, clifford or identity", "N_override": "sample count, bypassing the formula and cap",
    "T_override": "iteration count, bypassing the formula and cap",
    "eval_budget": "total loss evaluations before the search gives up",
    "eta": "smallest eigenvalue the polynomial must cover", "eps": "polynomial accuracy knob",
    "method": "hadamard or parity", "shots": "measurements per trace power",
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file; top-level keys and a [subcommand] table")
    common.add_argument("--seed", type=int, help="unsigned 64-bit run seed (default 0)")
    common.add_argument("--out", default="out", help="output directory (default ./out)")
    common.add_argument("--mode", choices=("exact", "shadow"), help="estimator mode (default exact)")
    common.add_argument("--threads", type=int, help="parallelism hint, recorded in outputs (kernels run serially)")
    common.add_argument("--emit-plot-data", action="store_true", default=None,
                        help="also write plot_data.csv (series, x, y, yerr)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key; VALUE is parsed as TOML")
    parser = argparse.ArgumentParser(prog="shallowcert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=HANDLERS[name].__doc__.rstrip(".").lower())
        for flag, key, typ in FLAGS[name]:
            p.add_argument(flag, dest=f"opt_{key}", type=typ, metavar=key.upper(), help=FLAG_HELP[key])
    return parser


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    started = time.time()
    out = None
    code = EXIT_INVARIANT
    try:
        try:
            doc = load_config_file(args.config) if args.config else None
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {args.config}: {exc.strerror}") from exc
        flags = {k[4:]: v for k, v in vars(args).items() if k.startswith("opt_")}
        flags.update(seed=args.seed, mode=args.mode, threads=args.threads, emit_plot_data=args.emit_plot_data)
        config = resolve_config(args.command, doc, args.set, flags)
        out = Output(args.out, args.command, config)
        code = HANDLERS[args.command](config, out)
    except (ConfigError, CapExceeded) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except BudgetExhausted as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        code = EXIT_BUDGET
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        code = EXIT_IO
    except (InvariantViolation, ShallowCertError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        code = EXIT_INVARIANT
    except ValueError as exc:
        # a module precondition that the up-front validation did not cover
        print(f"configuration error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    if out is not None:
        try:
            out.metadata(started, argv, code)
        except OSError as exc:
            print(f"I/O error writing metadata: {exc}", file=sys.stderr)
            code = code or EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
