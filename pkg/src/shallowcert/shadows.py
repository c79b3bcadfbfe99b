"""Classical shadows with global random unitaries.

A snapshot rotates the state by a random unitary U, measures in the
computational basis and keeps (U, b).  For any unitary 2-design the inverted
snapshot ``(d + 1) U^dagger|b><b|U - I`` is an unbiased estimate of the
state, so ``<psi|rho_hat|psi> = (d + 1)|<b|U|psi>|^2 - 1``.

Unitaries are stored as 64-bit seeds and regenerated on demand.
"""
from dataclasses import dataclass
import json
import math

import numpy as np

from . import kernels, limits
from .errors import DimensionError, InvariantViolation
from .loss import LossInputs
from .qsim import DensityMatrix, StateVector, haar_from_seeds

ENSEMBLES = ("haar", "clifford", "identity")
# ensembles whose inversion formula is only approximately right
APPROXIMATE = ("clifford",)
_CHUNK = 2048


# --------------------------------------------------------------------------
# unitary ensembles
# --------------------------------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
_S = np.array([[1, 0], [0, 1j]], dtype=np.complex128)


def _clifford_from_seed(n, seed):
    """Product of 20 n^2 random H, S and CNOT gates (approximately uniform)."""
    g = np.random.default_rng(int(seed))
    d = 2**n
    t = np.eye(d, dtype=np.complex128).reshape((2,) * n + (d,))
    for _ in range(20 * n * n):
        kind = g.integers(3) if n > 1 else g.integers(2)
        if kind == 2:
            a, b = g.choice(n, size=2, replace=False)
            # CNOT: flip target b where control a is 1
            idx = [slice(None)] * n
            idx[a] = 1
            sub = t[tuple(idx)]
            axis = b if b < a else b - 1
            t[tuple(idx)] = np.flip(sub, axis=axis).copy()
        else:
            q = g.integers(n)
            op = _H if kind == 0 else _S
            t = np.moveaxis(np.tensordot(op, t, axes=([1], [q])), 0, q)
    return t.reshape(d, d)


def unitaries_from_seeds(n, ensemble, seeds):
    d = 2**n
    if ensemble == "haar":
        return haar_from_seeds(d, seeds)
    if ensemble == "clifford":
        return np.stack([_clifford_from_seed(n, s) for s in seeds])
    if ensemble == "identity":
        return np.broadcast_to(np.eye(d, dtype=np.complex128), (len(seeds), d, d))
    raise ValueError(f"unsupported ensemble {ensemble!r}")


# --------------------------------------------------------------------------
# types
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ShadowSnapshot:
    unitary: np.ndarray
    outcome: int
    n: int

    @property
    def bits(self):
        return format(self.outcome, f"0{self.n}b")


@dataclass(frozen=True, eq=False)
class ShadowSet:
    n: int
    ensemble: str
    seeds: np.ndarray  # uint64, one per snapshot
    outcomes: np.ndarray  # int64 basis indices
    seed: int = None  # label of the stream that produced the set

    def __post_init__(self):
        if self.ensemble not in ENSEMBLES:
            raise ValueError(f"unsupported ensemble {self.ensemble!r}")
        seeds = np.array(self.seeds, dtype=np.uint64).ravel()
        outcomes = np.array(self.outcomes, dtype=np.int64).ravel()
        if seeds.size == 0 or seeds.shape != outcomes.shape:
            raise InvariantViolation("shadow set must be nonempty with one outcome per seed")
        if np.any(outcomes < 0) or np.any(outcomes >= 2**self.n):
            raise InvariantViolation("outcome outside the n-bit range")
        for a in (seeds, outcomes):
            a.setflags(write=False)
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "outcomes", outcomes)

    def __len__(self):
        return self.seeds.shape[0]

    @property
    def approximate(self):
        return self.ensemble in APPROXIMATE

    def unitaries(self, start=0, stop=None):
        return unitaries_from_seeds(self.n, self.ensemble, self.seeds[start:stop])

    def snapshot(self, k):
        return ShadowSnapshot(self.unitaries(k, k + 1)[0], int(self.outcomes[k]), self.n)


@dataclass(frozen=True)
class EstimatorConfig:
    mode: str = "exact"
    num_snapshots: int = 1000
    mom_batches: int = 1
    ensemble: str = "haar"

    def __post_init__(self):
        if self.mode not in ("exact", "shadow"):
            raise ValueError(f"mode must be exact or shadow, got {self.mode!r}")
        if self.mom_batches < 1:
            raise ValueError("mom_batches must be at least 1")
        if self.mode == "shadow" and self.num_snapshots < self.mom_batches:
            raise ValueError("need at least one snapshot per median-of-means batch")


def default_snapshot_count(epsilon, N, delta, cap=10_000):
    """``log(1/delta) / (epsilon/N)^2`` snapshots, capped."""
    eps1 = epsilon / N
    return int(min(math.ceil(math.log(1 / delta) / eps1**2), cap))


# --------------------------------------------------------------------------
# collection and inversion
# --------------------------------------------------------------------------

def _draw_seeds(rng, count):
    return rng.integers(0, 2**64, size=count, dtype=np.uint64, endpoint=False)


def collect_shadows(rho, count, ensemble, rng, seed=None):
    """Measure ``count`` randomly rotated copies of ``rho``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if ensemble not in ENSEMBLES:
        raise ValueError(f"unsupported ensemble {ensemble!r}")
    n = rho.n
    limits.check_qubits(n)
    seeds = _draw_seeds(rng, count)
    u = rng.random(count)
    m = np.asarray(rho.matrix)
    outcomes = np.empty(count, dtype=np.int64)
    for s in range(0, count, _CHUNK):
        U = unitaries_from_seeds(n, ensemble, seeds[s:s + _CHUNK])
        probs = np.einsum("kia,ab,kib->ki", U, m, U.conj()).real
        np.clip(probs, 0.0, None, out=probs)
        outcomes[s:s + _CHUNK] = kernels.sample_categorical(probs, u[s:s + _CHUNK])
    return ShadowSet(n, ensemble, seeds, outcomes, seed)


def invert_channel(snapshot):
    """``(2^n + 1) U^dagger|b><b|U - I``; unit trace, Hermitian."""
    d = 2**snapshot.n
    row = snapshot.unitary[snapshot.outcome]
    return (d + 1) * np.outer(row.conj(), row) - np.eye(d)


def mean_snapshot(shadow):
    """Average of all inverted snapshots."""
    d = 2**shadow.n
    acc = np.zeros((d, d), dtype=np.complex128)
    for s in range(0, len(shadow), _CHUNK):
        U = shadow.unitaries(s, s + _CHUNK)
        rows = U[np.arange(U.shape[0]), shadow.outcomes[s:s + _CHUNK]]
        acc += np.einsum("ka,kb->ab", rows.conj(), rows)
    return (d + 1) * acc / len(shadow) - np.eye(d)


def snapshot_fidelities(shadow, states):
    """Per-snapshot estimates ``<psi_j|rho_hat_k|psi_j>``, shape (M, N)."""
    d = 2**shadow.n
    if states.shape[0] != d:
        raise DimensionError("states do not match the shadow dimension")
    out = np.empty((len(shadow), states.shape[1]))
    for s in range(0, len(shadow), _CHUNK):
        U = shadow.unitaries(s, s + _CHUNK)
        out[s:s + _CHUNK] = kernels.snapshot_overlaps(U, shadow.outcomes[s:s + _CHUNK], states)
    return (d + 1) * out - 1.0


def median_of_means(values, batches):
    """Median over round-robin batch means (batch of snapshot k is k % batches)
    with the plain standard error of the full sample.  Works column-wise."""
    values = np.asarray(values, dtype=np.float64)
    M = values.shape[0]
    if batches == 1:
        est = values.mean(axis=0)
    else:
        means = np.stack([values[b::batches].mean(axis=0) for b in range(batches)])
        est = np.median(means, axis=0)
    stderr = values.std(axis=0, ddof=1) / math.sqrt(M) if M > 1 else np.full_like(est, np.inf)
    return est, stderr


# --------------------------------------------------------------------------
# state access
# --------------------------------------------------------------------------

class StateSource:
    """Measurement-only wrapper around an unknown state.

    In shadow mode only :meth:`shadows` is available; :meth:`exact` is the
    oracle bypass for exact-mode runs and tests.
    """

    def __init__(self, rho, mode="shadow"):
        if mode not in ("exact", "shadow"):
            raise ValueError("mode must be exact or shadow")
        self._rho = rho
        self.mode = mode
        self.n = rho.n
        self.snapshots_taken = 0

    def shadows(self, count, ensemble, rng):
        self.snapshots_taken += count
        return collect_shadows(self._rho, count, ensemble, rng)

    def exact(self):
        if self.mode != "exact":
            raise InvariantViolation("exact state access is disabled in shadow mode")
        return self._rho


def _as_columns(psi):
    if isinstance(psi, StateVector):
        return psi.amplitudes[:, None], True
    a = np.asarray(psi)
    return (a[:, None], True) if a.ndim == 1 else (a, False)


def estimate_fidelity(source, psi, config, rng=None):
    """``<psi|rho|psi>`` from a DensityMatrix, StateSource or ShadowSet.

    Returns (estimate, stderr); exact mode has stderr 0.  ``psi`` may also be
    a (d, N) array of columns, in which case arrays are returned.
    """
    cols, single = _as_columns(psi)
    if isinstance(source, ShadowSet):
        vals = snapshot_fidelities(source, cols)
        est, err = median_of_means(vals, config.mom_batches)
    else:
        if isinstance(source, StateSource):
            if config.mode == "shadow" or source.mode == "shadow":
                if rng is None:
                    raise ValueError("shadow estimation needs an rng")
                shadow = source.shadows(config.num_snapshots, config.ensemble, rng)
                return estimate_fidelity(shadow, psi, config)
            source = source.exact()
        if not isinstance(source, DensityMatrix):
            raise TypeError("source must be a DensityMatrix, StateSource or ShadowSet")
        if cols.shape[0] != source.dim:
            raise DimensionError("state dimension mismatch")
        est = np.einsum("aj,ab,bj->j", cols.conj(), source.matrix, cols).real
        err = np.zeros_like(est)
    if single:
        return float(est[0]), float(err[0])
    return est, err


@dataclass(frozen=True, eq=False)
class GramEstimate:
    G: np.ndarray
    f: np.ndarray
    G_stderr: np.ndarray
    f_stderr: np.ndarray
    mode: str
    snapshots_used: int

    def loss_inputs(self):
        return LossInputs(self.G, self.f, self.mode, self.G_stderr, self.f_stderr)


def exact_gram(states):
    amp = states.conj().T @ states
    G = amp.real**2 + amp.imag**2
    G = 0.5 * (G + G.T)
    np.fill_diagonal(G, 1.0)
    return G


def estimate_gram(samples, source, config, rng=None):
    """Overlap Gram matrix of the sample states and their fidelities with
    the unknown state.

    Shadow mode estimates ``f`` from one shadow set of the unknown state and
    each off-diagonal ``G_ij`` by symmetrising the estimates from shadows of
    ``|Psi_i>`` and ``|Psi_j>``; the diagonal is 1 by normalisation.
    """
    ns = {s.state.n for s in samples}
    if len(ns) != 1:
        raise DimensionError("samples must share one qubit count")
    states = np.stack([s.state.amplitudes for s in samples], axis=1)
    N = states.shape[1]
    mode = "shadow" if (config.mode == "shadow" or getattr(source, "mode", "exact") == "shadow") else "exact"
    if mode == "exact":
        rho = source.exact() if isinstance(source, StateSource) else source
        f, _ = estimate_fidelity(rho, states, config)
        z = np.zeros((N, N))
        return GramEstimate(exact_gram(states), np.asarray(f), z, np.zeros(N), "exact", 0)
    if rng is None:
        raise ValueError("shadow estimation needs an rng")
    streams = rng.spawn(N + 1)
    src = source if isinstance(source, StateSource) else StateSource(source, "shadow")
    shadow = src.shadows(config.num_snapshots, config.ensemble, streams[0])
    f, f_err = estimate_fidelity(shadow, states, config)
    raw = np.empty((N, N))
    raw_err = np.empty((N, N))
    for j, s in enumerate(samples):
        sh = collect_shadows(s.state.density(), config.num_snapshots, config.ensemble, streams[j + 1])
        raw[j], raw_err[j] = estimate_fidelity(sh, states, config)
    G = 0.5 * (raw + raw.T)
    G_err = 0.5 * np.sqrt(raw_err**2 + raw_err.T**2)
    np.fill_diagonal(G, 1.0)
    np.fill_diagonal(G_err, 0.0)
    used = config.num_snapshots * (N + 1)
    return GramEstimate(G, np.asarray(f), G_err, np.asarray(f_err), "shadow", used)


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

def dumps_shadow(shadow):
    doc = {
        "n": shadow.n,
        "ensemble": shadow.ensemble,
        "count": len(shadow),
        "seed": shadow.seed,
        "approximate": shadow.approximate,
        "snapshots": [
            [int(s), format(int(b), f"0{shadow.n}b")]
            for s, b in zip(shadow.seeds, shadow.outcomes)
        ],
    }
    return json.dumps(doc)


def loads_shadow(text):
    doc = json.loads(text)
    snaps = doc["snapshots"]
    if len(snaps) != doc["count"]:
        raise ValueError("snapshot count does not match header")
    seeds = np.array([s for s, _ in snaps], dtype=np.uint64)
    outcomes = np.array([int(b, 2) for _, b in snaps], dtype=np.int64)
    return ShadowSet(int(doc["n"]), doc["ensemble"], seeds, outcomes, doc.get("seed"))
