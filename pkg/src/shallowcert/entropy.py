"""Von Neumann entropy from trace powers.

``S(rho) = sum_i s(lambda_i)`` with ``s(x) = -x ln x``.  Replacing s by a
polynomial ``P(x) = sum_{l>=1} a_l x^l`` gives ``S ~ sum_l a_l Tr(rho^l)``,
and each ``Tr(rho^l)`` is the ancilla X expectation of a Hadamard test with
a controlled cyclic shift of l copies.  Entropies are in nats.
"""
from dataclasses import dataclass
import math

import numpy as np
from numpy.polynomial import polynomial as npoly

from . import limits
from .errors import CapExceeded
from .qsim import PAULI, _apply_to_matrix

MAX_DEGREE = 64


# --------------------------------------------------------------------------
# polynomial approximation
# --------------------------------------------------------------------------

def taylor_coefficients(degree):
    """Coefficients t_k of -x ln x in powers of (x - 1/2), k = 0..degree."""
    t = [math.log(2) / 2, math.log(2) - 1]
    for k in range(2, degree + 1):
        t.append((-1) ** (k - 1) * 2.0 ** (k - 1) / (k * (k - 1)))
    return np.array(t[: degree + 1])


def monomial_coefficients(degree):
    """Taylor polynomial about 1/2 rewritten in powers of x (index = power)."""
    shift = np.array([-0.5, 1.0])
    out = np.zeros(degree + 1)
    power = np.array([1.0])
    for k, tk in enumerate(taylor_coefficients(degree)):
        out[: power.size] += tk * power
        power = npoly.polymul(power, shift)
    return out


def entropy_bound(eta, eps):
    return 2 * eps * math.sqrt(-math.log(eta))


def _s(x):
    x = np.asarray(x, dtype=np.float64)
    return -x * np.log(np.where(x > 0, x, 1.0))


@dataclass(frozen=True, eq=False)
class PolyApprox:
    """``P(x) = sum_{l=1}^d a_l x^l``; the Taylor constant term is dropped so
    that P(0) = 0 and zero eigenvalues contribute nothing."""

    degree: int
    coefficients: np.ndarray  # a_1..a_d
    eta: float
    eps: float
    dropped_constant: float
    max_error: float  # max |P - s| on the self-check grid over [eta, 1]

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return npoly.polyval(x, np.concatenate([[0.0], self.coefficients]))

    @property
    def bound(self):
        return entropy_bound(self.eta, self.eps)


def self_check_error(coeffs, eta, points=1000):
    x = np.linspace(eta, 1.0, points)
    return float(np.max(np.abs(npoly.polyval(x, np.concatenate([[0.0], coeffs])) - _s(x))))


def entropy_poly(eta, eps, c=1.0, max_degree=MAX_DEGREE):
    """Degree ``ceil((c/eta) ln(1/(eta eps)))``, raised one at a time until the
    error on a 1000-point grid over [eta, 1] is within ``2 eps sqrt(-ln eta)``."""
    if not (0 < eta <= 0.25 and 0 < eps <= 0.25):
        raise ValueError("eta and eps must lie in (0, 1/4]")
    bound = entropy_bound(eta, eps)
    d = max(1, math.ceil((c / eta) * math.log(1 / (eta * eps))))
    while d <= max_degree:
        mono = monomial_coefficients(d)
        err = self_check_error(mono[1:], eta)
        if err <= bound:
            return PolyApprox(d, mono[1:].copy(), eta, eps, float(mono[0]), err)
        d += 1
    raise ValueError(f"no degree up to {max_degree} meets the bound {bound:.4g}")


# --------------------------------------------------------------------------
# trace powers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BellRunConfig:
    l: int = 2
    shots: int = None  # N_Q; default from default_shots(n)
    mode: str = "exact"  # "exact" expectation or "sampled"
    method: str = "hadamard"  # or "parity" for the transversal CNOT/H circuit
    over_cap: str = "ring"  # beyond the dimension cap: "ring" or "truncate"

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("l must be at least 1")
        if self.mode not in ("exact", "sampled"):
            raise ValueError("mode must be exact or sampled")
        if self.method not in ("hadamard", "parity"):
            raise ValueError("method must be hadamard or parity")
        if self.over_cap not in ("ring", "truncate"):
            raise ValueError("over_cap must be ring or truncate")


def default_shots(n):
    """``max(1, ceil(n^2 ln^2 n)) * 100``."""
    return max(1, math.ceil(n * n * math.log(n) ** 2)) * 100


def _shift_inverse_index(n, l):
    """For each basis index x of l copies, the index of S_l^{-1} x where
    ``S_l |x1..xl> = |x2..xl, x1>``."""
    D = 2**n
    idx = np.arange(D**l)
    last = idx % D
    return last * D ** (l - 1) + idx // D


def hadamard_test_ancilla(rho, l):
    """Reduced ancilla state after the controlled-shift Hadamard test.

    With ``A = rho^{(x) l}`` and the ancilla in |+>, the controlled shift
    leaves the ancilla in ``(1/2) [[Tr A, Tr(A S^dag)], [Tr(S A), Tr(S A S^dag)]]``.
    """
    m = np.asarray(rho.matrix)
    A = np.ones((1, 1), dtype=np.complex128)
    for _ in range(l):
        A = np.kron(A, m)
    cols = np.arange(A.shape[0])
    tr_SA = A[_shift_inverse_index(rho.n, l), cols].sum()  # (S A)_{xx} = A_{S^-1 x, x}
    tr_A = np.trace(A)
    return 0.5 * np.array([[tr_A, np.conj(tr_SA)], [tr_SA, tr_A]])


def _ring_trace(rho, l):
    """Contraction of the cyclic-shift network: a ring of l copies of rho."""
    m = np.asarray(rho.matrix)
    acc = m.copy()
    for _ in range(l - 1):
        acc = acc @ m
    return float(np.trace(acc).real)


def parity_distribution(rho, l):
    """Outcome distribution of the transversal CNOT/H circuit on l copies.

    For copy k = 0..l-2 and every qubit j: CNOT from qubit j of copy k to
    qubit j of copy k+1, then H on qubit j of copy k+1.  The pairs named for
    k = l-1 would address a copy that does not exist and are skipped.
    """
    n = rho.n
    N = n * l
    m = np.asarray(rho.matrix)
    A = np.ones((1, 1), dtype=np.complex128)
    for _ in range(l):
        A = np.kron(A, m)
    cnot = np.eye(4, dtype=np.complex128)[[0, 1, 3, 2]]
    for k in range(l - 1):
        for j in range(n):
            a, b = n * k + j, n * (k + 1) + j
            A = _apply_to_matrix(A, (cnot,), (a, b), N)
            A = _apply_to_matrix(A, (_HADAMARD,), (b,), N)
    p = np.clip(np.diagonal(A).real, 0.0, None)
    return p / p.sum()


_HADAMARD = (PAULI["X"] + PAULI["Z"]) / math.sqrt(2)


def _parities(count):
    idx = np.arange(count)
    bits = np.zeros(count, dtype=np.int64)
    while idx.any():
        bits ^= idx & 1
        idx >>= 1
    return bits


@dataclass(frozen=True)
class TracePowerResult:
    estimate: float
    stderr: float
    l: int
    method: str
    mode: str
    engine: str  # "dense", "ring" or "truncated"
    shots: int
    convention: str = "sigma_x"  # parity method: "(-1)^s" or "s"
    alt_estimate: float = None  # parity method: the other convention


def trace_power_swap(rho, cfg, rng=None):
    """Estimate ``Tr(rho^l)``.

    The Hadamard-test method returns the ancilla X expectation (exactly, or
    from ``shots`` simulated X measurements).  The parity method reports
    ``E[(-1)^s]`` as the estimate and ``E[s]`` as ``alt_estimate``.
    """
    n, l = rho.n, cfg.l
    shots = cfg.shots or default_shots(n)
    dim_bits = n * l + (1 if cfg.method == "hadamard" else 0)
    fits = 2**dim_bits <= limits.max_dim()
    if cfg.method == "parity":
        if not fits:
            raise CapExceeded(f"parity circuit on {n * l} qubits exceeds the dimension cap")
        p = parity_distribution(rho, l)
        par = _parities(p.size)
        if cfg.mode == "exact":
            sign = float(p @ (1 - 2 * par))
            return TracePowerResult(sign, 0.0, l, "parity", "exact", "dense", 0, "(-1)^s", float(p @ par))
        draws = rng.choice(p.size, size=shots, p=p)
        s = par[draws]
        sign = 1 - 2 * s
        return TracePowerResult(
            float(sign.mean()), float(sign.std(ddof=1) / math.sqrt(shots)), l, "parity",
            "sampled", "dense", shots, "(-1)^s", float(s.mean()),
        )
    if l == 1:
        anc_x, engine = 1.0, "dense"
    elif fits:
        anc = hadamard_test_ancilla(rho, l)
        anc_x, engine = float(2 * anc[1, 0].real), "dense"
    elif cfg.over_cap == "ring":
        # the ring gives the same ancilla state, so shots are still exact samples
        anc_x, engine = _ring_trace(rho, l), "ring"
    else:
        return TracePowerResult(0.0, 0.0, l, "hadamard", cfg.mode, "truncated", 0)
    if cfg.mode == "exact":
        return TracePowerResult(anc_x, 0.0, l, "hadamard", "exact", engine, 0)
    p_plus = min(1.0, max(0.0, 0.5 * (1 + anc_x)))
    k = rng.binomial(shots, p_plus)
    est = 2 * k / shots - 1
    var = 4 * (k / shots) * (1 - k / shots) / max(shots - 1, 1)
    return TracePowerResult(float(est), float(math.sqrt(var)), l, "hadamard", "sampled", engine, shots)


@dataclass(frozen=True, eq=False)
class EntropyResult:
    S_hat: float
    stderr: float
    poly: PolyApprox
    traces: list
    truncated: bool

    def summary(self):
        return {
            "S_hat": self.S_hat, "stderr": self.stderr, "degree": self.poly.degree,
            "eta": self.poly.eta, "eps": self.poly.eps, "bound": self.poly.bound,
            "truncated": self.truncated,
            "engines": sorted({t.engine for t in self.traces}),
        }


def estimate_entropy(rho, eta, eps, cfg, rng=None):
    """``sum_l a_l Tr(rho^l)`` with standard errors combined in quadrature.

    ``cfg.l`` is ignored; every l = 1..degree is estimated with the other
    settings of ``cfg``.  Independent shots per l make the errors independent.
    """
    poly = entropy_poly(eta, eps)
    streams = rng.spawn(poly.degree) if rng is not None else [None] * poly.degree
    traces = []
    total, var, truncated = 0.0, 0.0, False
    for l in range(1, poly.degree + 1):
        sub = BellRunConfig(l, cfg.shots, cfg.mode, "hadamard", cfg.over_cap)
        res = trace_power_swap(rho, sub, streams[l - 1])
        traces.append(res)
        if res.engine == "truncated":
            truncated = True
            break
        a = poly.coefficients[l - 1]
        total += a * res.estimate
        var += (a * res.stderr) ** 2
    return EntropyResult(float(total), math.sqrt(var), poly, traces, truncated)


def relative_entropy_screen(S_hat, n, threshold=None):
    """True iff ``n ln 2 - S_hat <= threshold`` (default 1/n), i.e. the state
    is too close to maximally mixed for a pure-state approximation."""
    threshold = 1.0 / n if threshold is None else threshold
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return n * math.log(2) - S_hat <= threshold


def relative_entropy_to_uniform(S_hat, n):
    return n * math.log(2) - S_hat


REPORT_COLUMNS = ("n", "l", "method", "mode", "estimate", "stderr", "N_Q", "seed")
