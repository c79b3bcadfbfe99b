"""Kernel ridge emulation of circuit observables.

For random circuit parameters alpha_1..alpha_N and a probe x, the ridge
weights

    beta(x) = (K + lam I)^{-1} k(x),   k_i(x) = K(alpha_i, x)

let ``sum_j beta_j(x) f(alpha_j)`` stand in for ``f(x)`` for any smooth
function of the parameters, in particular ``f(x) = <Psi(x)|rho|Psi(x)>``.
The kernel is the additive truncated power series

    K(a, b) = sum_{l=0}^{deg} sum_i (a_i b_i)^l

on inputs rescaled by 1/(2 pi), multiplied by a factor c that makes
``Tr K = N``.  The same c multiplies probe evaluations.
"""
from dataclasses import dataclass, field
import itertools
import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import kernels
from .ansatz import TWO_PI, ParameterSet, prepare_qnn_state, random_params, sample_qnn_set
from .errors import DimensionError, InvariantViolation

LAMBDA_FLOOR = 1e-12


@dataclass(frozen=True)
class KernelConfig:
    degree: int = 4
    q: int = 1
    normalize: bool = True
    scale: float = 1.0 / TWO_PI

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        if self.q < 1:
            raise ValueError("q must be at least 1")

    @classmethod
    def for_qubits(cls, n, **kw):
        return cls(degree=min(n * n, 8), **kw)


def _raw_kernel(A, B, cfg):
    if cfg.q == 1:
        return kernels.poly_kernel_matrix(A, B, cfg.degree)
    prod = A[:, None, :] * B[None, :, :]
    out = np.zeros(prod.shape[:2])
    for combo in itertools.combinations(range(A.shape[1]), cfg.q):
        x = prod[:, :, list(combo)].sum(axis=2)
        p = np.ones_like(x)
        out += p
        for _ in range(cfg.degree):
            p = p * x
            out += p
    return out


def kernel_value(a, b, cfg):
    """Kernel on raw (unscaled) vectors, before trace normalisation."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError("kernel arguments differ in length")
    return float(_raw_kernel(a[None, :], b[None, :], cfg)[0, 0])


@dataclass(frozen=True, eq=False)
class RidgeModel:
    alphas: np.ndarray  # (N, D) raw parameters
    cfg: KernelConfig
    n: int
    norm_factor: float  # c, applied to training and probe kernels alike
    gram: np.ndarray  # normalised Gram matrix
    lam: float
    lambda_min: float
    inverse: np.ndarray  # (K + lam I)^{-1}
    targets: np.ndarray = None
    _cho: tuple = field(default=None, repr=False)

    @property
    def N(self):
        return self.alphas.shape[0]

    def features(self, x):
        return np.atleast_2d(np.asarray(x, dtype=np.float64)) * self.cfg.scale

    def kernel_vectors(self, x):
        """Normalised k(x) for each row of ``x``, shape (N, P)."""
        X = self.features(x)
        if X.shape[1] != self.alphas.shape[1]:
            raise DimensionError(f"expected {self.alphas.shape[1]} coordinates, got {X.shape[1]}")
        return self.norm_factor * _raw_kernel(self.alphas * self.cfg.scale, X, self.cfg)

    def predict(self, x):
        if self.targets is None:
            raise ValueError("model was fitted without targets")
        return beta_coefficients(self, x) @ self.targets


def _alphas_of(samples):
    if isinstance(samples, np.ndarray):
        return np.atleast_2d(samples).astype(np.float64)
    return np.stack([s.params.values for s in samples]).astype(np.float64)


def fit_ridge(samples, targets, cfg, n, lam=None):
    """Normalised Gram, ridge parameter ``sqrt(lambda_min)/(n N)`` and the
    factorised system.  ``lam`` overrides the formula."""
    A = _alphas_of(samples)
    N = A.shape[0]
    if N < 1:
        raise ValueError("need at least one sample")
    if targets is not None:
        targets = np.asarray(targets, dtype=np.float64).ravel()
        if targets.shape[0] != N or not np.all(np.isfinite(targets)):
            raise ValueError("targets must be N finite values")
    K = _raw_kernel(A * cfg.scale, A * cfg.scale, cfg)
    K = 0.5 * (K + K.T)
    c = N / np.trace(K) if cfg.normalize else 1.0
    K = c * K
    lmin = float(np.linalg.eigvalsh(K)[0])
    if lam is None:
        lam = math.sqrt(lmin) / (n * N) if lmin > 0 else LAMBDA_FLOOR
        lam = max(lam, LAMBDA_FLOOR)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    system = K + lam * np.eye(N)
    try:
        cho = cho_factor(system)
    except np.linalg.LinAlgError as exc:
        raise InvariantViolation("ridge system is not positive definite") from exc
    inv = cho_solve(cho, np.eye(N))
    inv = 0.5 * (inv + inv.T)
    ro = lambda a: (a.setflags(write=False), a)[1]
    return RidgeModel(
        ro(A.copy()), cfg, n, float(c), ro(K), float(lam), lmin, ro(inv),
        None if targets is None else ro(targets.copy()), cho,
    )


def beta_coefficients(model, x):
    """beta(x) for one probe (returns (N,)) or a batch of rows (returns (P, N))."""
    x = np.asarray(x, dtype=np.float64)
    k = model.kernel_vectors(x)
    beta = cho_solve(model._cho, k).T
    return beta[0] if x.ndim == 1 else beta


# --------------------------------------------------------------------------
# compact set of attainable beta
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CompactSet:
    intervals: np.ndarray  # (N, 2) grid inf/sup before broadening
    slack: np.ndarray  # (N,)

    def __post_init__(self):
        iv = np.array(self.intervals, dtype=np.float64)
        if np.any(iv[:, 0] > iv[:, 1]):
            raise InvariantViolation("interval lower end exceeds upper end")
        object.__setattr__(self, "intervals", iv)
        object.__setattr__(self, "slack", np.array(self.slack, dtype=np.float64))

    @property
    def lower(self):
        return self.intervals[:, 0] - self.slack

    @property
    def upper(self):
        return self.intervals[:, 1] + self.slack

    @property
    def width(self):
        return self.upper - self.lower

    def contains(self, beta, tol=1e-12):
        beta = np.asarray(beta)
        return bool(np.all(beta >= self.lower - tol) and np.all(beta <= self.upper + tol))


def estimate_compact_set(model, grid_points=512):
    """Per-coordinate range of beta_j(x) over the parameter box.

    With q = 1 the kernel is a sum of univariate terms, so
    ``beta_j(x) = sum_m h_{j,m}(t_m)`` with ``t_m = x_m / (2 pi)`` in [0, 1).
    Each ``h_{j,m}`` is a polynomial, scanned on ``grid_points`` uniform
    points; the slack adds Lipschitz constant times grid spacing per term,
    which makes the broadened box a guaranteed enclosure.
    """
    if grid_points < 16:
        raise ValueError("grid_points must be at least 16")
    if model.cfg.q != 1:
        raise ValueError("compact set estimation needs q = 1")
    a = model.alphas * model.cfg.scale  # (N, D) training features in [0, 1)
    N, D = a.shape
    deg = model.cfg.degree
    t = np.arange(grid_points) / grid_points
    W = model.norm_factor * model.inverse  # beta = W @ raw k
    lo = np.zeros(N)
    hi = np.zeros(N)
    slack = np.zeros(N)
    ls = np.arange(1, deg + 1)
    for m in range(D):
        x = a[:, m][:, None] * t[None, :]  # (N, G)
        P = np.ones_like(x)
        p = np.ones_like(x)
        for _ in range(deg):
            p = p * x
            P += p
        h = W @ P  # (N_j, G)
        lo += h.min(axis=1)
        hi += h.max(axis=1)
        # |d/dt sum_l (a t)^l| <= sum_l l |a|^l on [0, 1]
        if deg:
            dmax = (ls[None, :] * np.abs(a[:, m])[:, None] ** ls[None, :]).sum(axis=1)
            slack += np.abs(W) @ dmax / grid_points
    return CompactSet(np.stack([lo, hi], axis=1), slack)


# --------------------------------------------------------------------------
# validation harness
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class IntrinsicReport:
    n: int
    R: int
    L: int
    N: int
    probes: int
    mean_abs_error: float
    bound: float
    errors: np.ndarray
    sum_beta: np.ndarray
    lam: float
    degree: int
    seed: int = None

    def row(self):
        return {
            "n": self.n, "R": self.R, "L": self.L, "N": self.N, "probes": self.probes,
            "mean_abs_error": self.mean_abs_error, "bound": self.bound,
            "seed": self.seed, "kernel_degree": self.degree,
        }


REPORT_COLUMNS = ("n", "R", "L", "N", "probes", "mean_abs_error", "bound", "seed", "kernel_degree")


def approximation_bound(arch, N):
    return math.sqrt(arch.L * arch.R * arch.n**2 / N)


def validate_intrinsic_connection(arch, N, probes, rho, rng, cfg=None, seed=None):
    """Train on N random circuits' fidelities with ``rho`` and compare the
    ridge emulation against exact fidelities at random probe circuits."""
    if N < 2:
        raise ValueError("N must be at least 2")
    if probes < 10:
        raise ValueError("need at least 10 probes")
    cfg = cfg or KernelConfig.for_qubits(arch.n)
    train_rng, probe_rng = rng.spawn(2)
    samples = sample_qnn_set(arch, N, train_rng)
    m = np.asarray(rho.matrix)

    def fid(psi):
        return float(np.vdot(psi, m @ psi).real)

    targets = np.array([fid(s.state.amplitudes) for s in samples])
    model = fit_ridge(samples, targets, cfg, arch.n)
    xs = np.stack([random_params(arch, g).values for g in probe_rng.spawn(probes)])
    exact = np.array([fid(prepare_qnn_state(arch, ParameterSet(x)).amplitudes) for x in xs])
    betas = beta_coefficients(model, xs)
    errors = np.abs(betas @ targets - exact)
    return IntrinsicReport(
        arch.n, arch.R, arch.L, N, probes, float(errors.mean()),
        approximation_bound(arch, N), errors, betas.sum(axis=1), model.lam, cfg.degree, seed,
    )

