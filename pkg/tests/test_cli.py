import csv
import json
import math

import numpy as np
import pytest

from shallowcert import cli, noise, qsim
from shallowcert.errors import InvariantViolation


def run(tmp_path, *args, out="out"):
    return cli.main(list(args) + ["--out", str(tmp_path / out)])


def read_json(path):
    return json.loads(path.read_text())


def read_csv(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("# config=")
    return json.loads(lines[0][len("# config="):]), list(csv.DictReader(lines[1:]))


# ---------------------------------------------------------------- prepare

def test_prepare_is_byte_identical(tmp_path):
    assert run(tmp_path, "prepare", "--seed", "5", "--strength", "0.1", out="a") == 0
    assert run(tmp_path, "prepare", "--seed", "5", "--strength", "0.1", out="b") == 0
    for name in ("state.qstate", "state.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "metadata.json").exists()


def test_prepare_noiseless_is_pure(tmp_path):
    assert run(tmp_path, "prepare", "--n", "2", "--depth", "1") == 0
    rho = qsim.load_state(tmp_path / "out" / "state.qstate")
    assert abs(qsim.purity(rho) - 1) <= 1e-9
    assert read_json(tmp_path / "out" / "state.json")["provenance"]["source"] == "prepared"


def test_prepare_full_depolarizing_is_maximally_mixed(tmp_path):
    assert run(tmp_path, "prepare", "--n", "3", "--strength", "1.0") == 0
    rho = qsim.load_state(tmp_path / "out" / "state.qstate")
    np.testing.assert_allclose(rho.matrix, np.eye(8) / 8, atol=1e-12)


# ---------------------------------------------------------------- purity bound

def test_purity_bound_rows(tmp_path):
    assert run(tmp_path, "purity-bound", "--n", "1", "--strength", "0.2", "--trials", "40",
               "--set", "depths=[1, 2, 3]", "--emit-plot-data") == 0
    cfg, rows = read_csv(tmp_path / "out" / "purity.csv")
    assert cfg["strength"] == 0.2 and [int(r["depth"]) for r in rows] == [1, 2, 3]
    F = noise.channel_f_metric(noise.local_depolarizing(0.2), 1)
    for r in rows:
        assert float(r["eta"]) == noise.purity_lower_bound(F, 1, int(r["depth"]))
    assert (tmp_path / "out" / "plot_data.csv").exists()


def test_csv_floats_round_trip(tmp_path):
    run(tmp_path, "purity-bound", "--n", "2", "--strength", "0.1", "--trials", "30")
    _, rows = read_csv(tmp_path / "out" / "purity.csv")
    F = noise.channel_f_metric(noise.local_depolarizing(0.1), 2)
    assert float(rows[0]["F"]) == F  # 17 significant digits are lossless


# ---------------------------------------------------------------- entropy

def test_entropy_of_maximally_mixed_file(tmp_path):
    assert run(tmp_path, "prepare", "--n", "2", "--strength", "1.0", out="p") == 0
    assert run(tmp_path, "entropy", "--state", str(tmp_path / "p" / "state.qstate")) == 0
    doc = read_json(tmp_path / "out" / "entropy.json")
    assert abs(doc["S_hat"] - 2 * math.log(2)) <= doc["bound"]
    assert doc["provenance"]["source"] == "file" and doc["degree"] == 18
    assert doc["too_close_to_uniform"] is True


def test_entropy_parity_checks_reported(tmp_path):
    assert run(tmp_path, "entropy", "--n", "2", "--method", "parity", "--set", "max_l=2") == 0
    doc = read_json(tmp_path / "out" / "entropy.json")
    (check,) = doc["parity_checks"]
    assert check["l"] == 2 and set(check) == {"l", "sign_convention", "bit_convention", "exact"}


def test_sampled_outputs_deterministic(tmp_path):
    args = ("entropy", "--n", "2", "--strength", "0.2", "--mode", "shadow", "--shots", "300", "--seed", "9")
    run(tmp_path, *args, out="a")
    run(tmp_path, *args, out="b")
    for name in ("entropy.json", "entropy.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# ---------------------------------------------------------------- other commands

def test_shadows_command(tmp_path):
    assert run(tmp_path, "shadows", "--n", "2", "--strength", "0.1", "--snapshots", "200",
               "--probes", "3", "--mode", "shadow") == 0
    assert any(p.suffix == ".json" for p in (tmp_path / "out").iterdir())


def test_validate_intrinsic_command(tmp_path):
    assert run(tmp_path, "validate-intrinsic", "--n", "2", "--probes", "10", "--set", "seeds=[1, 2]") == 0
    _, rows = read_csv(tmp_path / "out" / "intrinsic.csv")
    assert [int(r["seed"]) for r in rows] == [1, 2]
    assert all(float(r["mean_abs_error"]) <= float(r["bound"]) for r in rows)


def test_bmaxs_command(tmp_path):
    assert run(tmp_path, "bmaxs", "--n", "2", "--N", "4", "--T", "5", "--set", "candidates=16") == 0
    names = {p.name for p in (tmp_path / "out").iterdir()}
    assert "metadata.json" in names and len(names) >= 3


# ---------------------------------------------------------------- configuration

def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('seed = 4\nstrength = 0.3\ntrials = 30\n[purity-bound]\nstrength = 0.25\nn = 2\n')
    assert run(tmp_path, "purity-bound", "--config", str(cfg), out="a") == 0
    c, _ = read_csv(tmp_path / "a" / "purity.csv")
    assert (c["seed"], c["strength"], c["n"], c["trials"]) == (4, 0.25, 2, 30)
    assert run(tmp_path, "purity-bound", "--config", str(cfg), "--set", "strength=0.2", out="b") == 0
    assert read_csv(tmp_path / "b" / "purity.csv")[0]["strength"] == 0.2
    assert run(tmp_path, "purity-bound", "--config", str(cfg), "--set", "strength=0.2",
               "--strength", "0.15", out="c") == 0
    assert read_csv(tmp_path / "c" / "purity.csv")[0]["strength"] == 0.15


def test_foreign_keys_in_shared_file_are_ignored(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("eta = 0.25\ntrials = 30\n")  # eta belongs to entropy
    assert run(tmp_path, "purity-bound", "--config", str(cfg)) == 0


# ---------------------------------------------------------------- exit codes

@pytest.mark.parametrize("args", [
    ("purity-bound", "--strength", "1.5"),
    ("prepare", "--n", "1"),
    ("entropy", "--n", "2", "--eta", "0.5"),
    ("scp", "--set", "epsilon=true"),
    ("prepare", "--set", "unknown_key=1"),
    ("entropy", "--state", "missing.qstate"),
])
def test_config_errors_exit_2(tmp_path, args):
    assert run(tmp_path, *args) == 2


def test_malformed_state_file_exit_2(tmp_path):
    bad = tmp_path / "bad.qstate"
    bad.write_bytes(qsim.MAGIC + b"\x01\x00\x00\x00\x01" + np.array([2, 0, 0, -1], dtype="<c16").tobytes())
    assert run(tmp_path, "entropy", "--state", str(bad)) == 2


def test_missing_config_file_exit_2(tmp_path):
    assert run(tmp_path, "prepare", "--config", str(tmp_path / "nope.toml")) == 2


def test_budget_exit_3(tmp_path):
    assert run(tmp_path, "scp", "--n", "2", "--eval-budget", "1") == 3
    doc = read_json(tmp_path / "out" / "verdict.json")
    assert doc["outcome"] == "inconclusive"


def test_io_error_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["prepare", "--out", str(blocker / "sub")]) == 4


def test_internal_error_exit_5(tmp_path, monkeypatch):
    def broken(c, out):
        """Fail with an internal error."""
        raise InvariantViolation("simulated")

    monkeypatch.setitem(cli.HANDLERS, "prepare", broken)
    assert run(tmp_path, "prepare") == 5


# ---------------------------------------------------------------- end to end

@pytest.mark.slow
def test_scp_on_prepared_noiseless_depth_one_state(tmp_path):
    # documented configuration: seed 0, exact mode, default caps (N=64, T=400)
    assert run(tmp_path, "prepare", "--n", "2", "--depth", "1", "--seed", "0", out="p") == 0
    assert run(tmp_path, "scp", "--state", str(tmp_path / "p" / "state.qstate"), "--seed", "0") == 0
    doc = read_json(tmp_path / "out" / "verdict.json")
    assert doc["outcome"] == "yes" and doc["r_min"] == 1 and doc["complexity_bound"] == 1
    assert (tmp_path / "out" / "trace_depth1.csv").exists()
