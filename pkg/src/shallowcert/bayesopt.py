"""GP-UCB maximisation of the distinguishing loss over z = (q, beta).

q ranges over the probability simplex and beta over a box intersected with
the hyperplane sum(beta) = 1.  Each step picks

    z_t = argmax mu_{t-1}(z) + sqrt(kappa_t) sigma_{t-1}(z),
    kappa_t = 2 N ln(t^2 N) + 2 ln(t^2 / delta)

over random candidates plus one round of coordinate refinement.
"""
from dataclasses import dataclass, field
from fractions import Fraction
import hashlib
import math

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InvariantViolation
from .loss import loss_value
from .shadows import EstimatorConfig, estimate_gram

JITTER = 1e-8


# --------------------------------------------------------------------------
# domains
# --------------------------------------------------------------------------

def project_simplex(v):
    """Euclidean projection onto {q >= 0, sum q = 1}."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    q = np.maximum(v - css[rho] / (rho + 1), 0.0)
    return q / q.sum()


def project_box_hyperplane(v, lo, hi):
    """Euclidean projection onto {lo <= b <= hi, sum b = 1}, row-wise for 2-D input.

    The projection is ``clip(v - tau, lo, hi)``; the clipped sum is piecewise
    linear in tau with breakpoints ``v - hi`` and ``v - lo``, so tau is found
    by locating the crossing segment and interpolating.  Leftover round-off
    goes to coordinates with room to move.
    """
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    V = np.atleast_2d(v)
    if lo.sum() > 1 + 1e-12 or hi.sum() < 1 - 1e-12:
        raise InvariantViolation("box does not meet the hyperplane sum(beta) = 1")
    bp = np.sort(np.concatenate([V - hi, V - lo], axis=1), axis=1)
    g = np.clip(V[:, None, :] - bp[:, :, None], lo, hi).sum(axis=2)  # non-increasing
    rows = np.arange(V.shape[0])
    k = np.argmax(g <= 1.0, axis=1)
    k0 = np.maximum(k - 1, 0)
    g0, g1 = g[rows, k0], g[rows, k]
    b0, b1 = bp[rows, k0], bp[rows, k]
    span = g0 - g1
    frac = np.divide(g0 - 1.0, span, out=np.zeros_like(span), where=span > 0)
    tau = b0 + frac * (b1 - b0)
    out = np.clip(V - tau[:, None], lo, hi)
    resid = 1.0 - out.sum(axis=1)
    free = np.where((resid < 0)[:, None], out > lo, out < hi)
    count = free.sum(axis=1)
    shift = np.divide(resid, count, out=np.zeros_like(resid), where=count > 0)
    out = np.clip(out + free * shift[:, None], lo, hi)
    return out[0] if single else out


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """z = (q, beta) with q in the simplex and beta in the box meeting sum = 1."""

    N: int
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=np.float64).ravel()
        hi = np.array(self.upper, dtype=np.float64).ravel()
        if lo.shape != (self.N,) or hi.shape != (self.N,) or np.any(lo > hi):
            raise InvariantViolation("beta box must have N ordered intervals")
        if lo.sum() > 1 + 1e-12 or hi.sum() < 1 - 1e-12:
            raise InvariantViolation(
                f"beta box is disjoint from sum(beta) = 1 (sum lo {lo.sum():.4g}, sum hi {hi.sum():.4g})"
            )
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_compact_set(cls, cs, unit_box=True):
        """Domain from a compact set; ``unit_box`` also clips beta to [0, 1]
        so M(beta) is a valid measurement and the loss stays in [0, 1]."""
        lo, hi = cs.lower, cs.upper
        if unit_box:
            lo, hi = np.clip(lo, 0.0, 1.0), np.clip(hi, 0.0, 1.0)
        return cls(cs.intervals.shape[0], lo, hi)

    @property
    def dim(self):
        return 2 * self.N

    def split(self, z):
        return z[: self.N], z[self.N:]

    def join(self, q, beta):
        return np.concatenate([q, beta])

    def project(self, z):
        q, b = self.split(np.asarray(z, dtype=np.float64))
        return self.join(project_simplex(q), project_box_hyperplane(b, self.lower, self.upper))

    def sample(self, rng, count):
        q = rng.dirichlet(np.ones(self.N), size=count)
        q /= q.sum(axis=1, keepdims=True)
        b = rng.uniform(self.lower, self.upper, size=(count, self.N))
        b = project_box_hyperplane(b, self.lower, self.upper)
        return np.concatenate([q, b], axis=1)

    def contains(self, z, tol=1e-8):
        q, b = self.split(np.asarray(z))
        return bool(
            np.all(q >= -1e-12) and abs(q.sum() - 1) <= 1e-10
            and np.all(b >= self.lower - tol) and np.all(b <= self.upper + tol)
            and abs(b.sum() - 1) <= tol
        )

    def vertex(self, i, beta=None):
        """z with q = e_i and the given beta (default e_i)."""
        q = np.zeros(self.N)
        q[i] = 1.0
        if beta is None:
            beta = q.copy()
        return self.join(q, np.asarray(beta, dtype=np.float64))

    def default_lengthscales(self, q_scale=0.5, beta_factor=0.5):
        return np.concatenate([np.full(self.N, q_scale), beta_factor * (self.upper - self.lower)])


@dataclass(frozen=True, eq=False)
class BoxDomain:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.array(self.lower, dtype=np.float64))
        object.__setattr__(self, "upper", np.array(self.upper, dtype=np.float64))

    @property
    def dim(self):
        return self.lower.shape[0]

    def project(self, z):
        return np.clip(z, self.lower, self.upper)

    def sample(self, rng, count):
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))

    def contains(self, z, tol=0.0):
        return bool(np.all(z >= self.lower - tol) and np.all(z <= self.upper + tol))

    def default_lengthscales(self, factor=0.1):
        return factor * (self.upper - self.lower)


# --------------------------------------------------------------------------
# Gaussian process
# --------------------------------------------------------------------------

class GaussianProcess:
    """Zero-mean GP with a squared-exponential kernel and per-coordinate
    lengthscales.  The Cholesky factor of ``K_t + sigma^2 I`` grows by one row
    per observation."""

    def __init__(self, lengthscales, signal_var=1.0, sigma_noise=1.0):
        ls = np.array(lengthscales, dtype=np.float64)
        if np.any(ls < 0):
            raise ValueError("lengthscales must be non-negative")
        # zero-width coordinates never vary; any positive scale is equivalent
        self.lengthscales = np.where(ls > 0, ls, 1.0)
        self.signal_var = float(signal_var)
        self.sigma_noise = float(sigma_noise)
        self.X = np.empty((0, ls.size))
        self.y = np.empty(0)
        self._L = np.empty((0, 0))
        self._alpha = np.empty(0)
        self.jittered = False

    def __len__(self):
        return self.y.size

    def kernel(self, A, B):
        A = np.atleast_2d(A) / self.lengthscales
        B = np.atleast_2d(B) / self.lengthscales
        d2 = (A**2).sum(1)[:, None] + (B**2).sum(1)[None, :] - 2 * A @ B.T
        return self.signal_var * np.exp(-0.5 * np.maximum(d2, 0.0))

    def _refactor(self, jitter):
        K = self.kernel(self.X, self.X) + (self.sigma_noise**2 + jitter) * np.eye(len(self))
        return np.linalg.cholesky(K)

    def add(self, z, y):
        z = np.asarray(z, dtype=np.float64).reshape(1, -1)
        k = self.kernel(self.X, z)[:, 0]
        kzz = self.signal_var + self.sigma_noise**2
        self.X = np.vstack([self.X, z])
        self.y = np.append(self.y, float(y))
        t = len(self) - 1
        if t == 0:
            l = np.empty(0)
            diag2 = kzz
        else:
            l = solve_triangular(self._L, k, lower=True)
            diag2 = kzz - l @ l
        if diag2 > 1e-14:
            L = np.zeros((t + 1, t + 1))
            L[:t, :t] = self._L
            L[t, :t] = l
            L[t, t] = math.sqrt(diag2)
            self._L = L
        else:
            try:
                self._L = self._refactor(JITTER)
                self.jittered = True
            except np.linalg.LinAlgError as exc:
                raise InvariantViolation("GP covariance is not positive definite") from exc
        self._alpha = solve_triangular(self._L, self.y, lower=True)

    def posterior(self, Z):
        """Posterior means and standard deviations at the rows of ``Z``."""
        Z = np.atleast_2d(Z)
        prior = np.full(Z.shape[0], self.signal_var)
        if len(self) == 0:
            return np.zeros(Z.shape[0]), np.sqrt(prior)
        k = self.kernel(self.X, Z)
        v = solve_triangular(self._L, k, lower=True)
        mu = v.T @ self._alpha
        var = prior - (v**2).sum(axis=0)
        return mu, np.sqrt(np.maximum(var, 0.0))


def gp_posterior(gp, z):
    mu, sigma = gp.posterior(np.asarray(z).reshape(1, -1))
    return float(mu[0]), float(sigma[0])


def kappa_schedule(t, N, delta):
    if t < 1 or N < 1 or not 0 < delta < 1:
        raise ValueError("need t >= 1, N >= 1 and delta in (0, 1)")
    return 2 * N * math.log(t * t * N) + 2 * math.log(t * t / delta)


def regret_bound(T, N, delta):
    """Average-regret bound ``sqrt((4 N^2 ln^2 T + 2 N ln T ln(pi^2/(6 delta))) / T)``."""
    if T < 2:
        raise ValueError("T must be at least 2")
    lt = math.log(T)
    return math.sqrt((4 * N * N * lt * lt + 2 * N * lt * math.log(math.pi**2 / (6 * delta))) / T)


def ucb_argmax(gp, domain, kappa, candidates, rng=None, refine=True, step=0.1):
    """Maximiser of ``mu + sqrt(kappa) sigma`` over sampled candidates.

    ``candidates`` is a count (drawn from ``domain``) or an explicit array.
    Ties go to the lowest index.  Refinement scores the moves
    ``+-step * lengthscale`` along every coordinate of the winner, projected
    back into the domain, and takes the best one if it strictly improves
    the score.
    """
    if isinstance(candidates, (int, np.integer)):
        if candidates < 1:
            raise ValueError("need at least one candidate")
        Z = domain.sample(rng, int(candidates))
    else:
        Z = np.atleast_2d(np.asarray(candidates, dtype=np.float64))
    root = math.sqrt(kappa)

    def score(P):
        mu, sd = gp.posterior(P)
        return mu + root * sd

    s = score(Z)
    best = Z[int(np.argmax(s))].copy()
    best_s = float(np.max(s))
    if refine:
        # every +-step move along one coordinate, scored in one batch
        h = step * gp.lengthscales
        moves = []
        for k in range(best.size):
            for sign in (1.0, -1.0):
                z = best.copy()
                z[k] += sign * h[k]
                moves.append(domain.project(z))
        ms = score(np.stack(moves))
        i = int(np.argmax(ms))
        if ms[i] > best_s:
            best = moves[i]
    return best


# --------------------------------------------------------------------------
# regret accounting
# --------------------------------------------------------------------------

@dataclass
class RegretLedger:
    """Regrets ``r_t = f* - f(z_t)`` kept as exact rationals of the float values.

    ``simple`` is the best regret so far, ``min_t r_t``; ``final`` is the
    regret of the last iterate.
    """

    optimum: float = None
    values: list = field(default_factory=list)
    kappas: list = field(default_factory=list)
    _regrets: list = field(default_factory=list)
    _averages: list = field(default_factory=list)

    def record(self, value, kappa):
        self.values.append(float(value))
        self.kappas.append(float(kappa))
        if self.optimum is not None:
            r = Fraction(self.optimum) - Fraction(float(value))
            self._regrets.append(r)
            self._averages.append(sum(self._regrets, Fraction(0)) / len(self._regrets))

    def __len__(self):
        return len(self.values)

    @property
    def regrets(self):
        return [float(r) for r in self._regrets]

    def average(self, T=None):
        T = T or len(self._regrets)
        return float(self._averages[T - 1])

    def simple(self, T=None):
        T = T or len(self._regrets)
        return float(min(self._regrets[:T]))

    def final(self, T=None):
        T = T or len(self._regrets)
        return float(self._regrets[T - 1])

    def check_identities(self):
        """``T * R_T == sum r_t`` and ``s_T <= R_T`` for every prefix, exactly."""
        for T in range(1, len(self._regrets) + 1):
            total = sum(self._regrets[:T], Fraction(0))
            if self._averages[T - 1] * T != total:
                return False
            if min(self._regrets[:T]) > self._averages[T - 1]:
                return False
        return True


def z_hash(z):
    return hashlib.sha256(np.ascontiguousarray(z, dtype="<f8").tobytes()).hexdigest()[:16]


def ucb_loop(objective, domain, T, kappa_N, delta, gp, rng, candidates=256,
             refine=True, noise=None, inject=None, ledger=None, oracle=None):
    """Generic GP-UCB loop; returns (zs, ys, values, trace rows).

    ``objective(z)`` gives the noiseless value, ``noise(rng)`` the additive
    observation noise, ``inject`` maps step t to a forced query point and
    ``oracle(z)`` an optional exact value recorded in the trace.
    """
    ledger = ledger if ledger is not None else RegretLedger()
    zs, ys, vals, rows = [], [], [], []
    for t in range(1, T + 1):
        kappa = kappa_schedule(t, kappa_N, delta)
        if inject and t in inject:
            z = np.asarray(inject[t], dtype=np.float64)
        else:
            z = ucb_argmax(gp, domain, kappa, candidates, rng, refine)
        mu, sd = gp_posterior(gp, z)
        v = objective(z)
        y = v + (noise(rng) if noise else 0.0)
        gp.add(z, y)
        ledger.record(v, kappa)
        zs.append(z)
        ys.append(y)
        vals.append(v)
        rows.append({
            "t": t, "kappa": kappa, "z_hash": z_hash(z), "y": y,
            "L_exact": None if oracle is None else oracle(z),
            "mu": mu, "sigma": sd,
            "cumulative_R": ledger.average(t) if ledger.optimum is not None else None,
        })
    return zs, ys, vals, rows


# --------------------------------------------------------------------------
# loss maximisation
# --------------------------------------------------------------------------

def _box_hyperplane_max(v, lo, hi):
    """max of ``b . v`` over lo <= b <= hi, sum b = 1 (greedy fill)."""
    b = lo.copy()
    room = 1.0 - lo.sum()
    for i in np.argsort(-v, kind="stable"):
        take = min(hi[i] - lo[i], room)
        b[i] += take
        room -= take
        if room <= 0:
            break
    return float(b @ v), b


def loss_optimum(inputs, domain):
    """Exact max of the loss over the domain, with a maximiser.

    The loss is linear in q, so some vertex q = e_i attains the max; for
    fixed q the max over beta of |beta . v| is a greedy fill of the box.
    """
    best, arg = -1.0, None
    for i in range(inputs.N):
        v = inputs.G[:, i] - inputs.f
        up, bu = _box_hyperplane_max(v, domain.lower, domain.upper)
        dn, bd = _box_hyperplane_max(-v, domain.lower, domain.upper)
        for val, b in ((up, bu), (dn, bd)):
            if val > best:
                best, arg = val, domain.vertex(i, b)
    return best, arg


@dataclass(frozen=True)
class BmaxsConfig:
    mode: str = "practical"  # or "faithful": N(0,1) observation noise
    candidates: int = 256
    refine: bool = True
    sigma_noise: float = None  # defaults: 1e-2 practical, 1.0 faithful
    signal_var: float = 1.0
    q_lengthscale: float = 0.5
    beta_lengthscale_factor: float = 0.5
    estimator: EstimatorConfig = EstimatorConfig()

    def __post_init__(self):
        if self.mode not in ("practical", "faithful"):
            raise ValueError("mode must be practical or faithful")
        if self.candidates < 1:
            raise ValueError("candidates must be at least 1")

    @property
    def noise_std(self):
        if self.sigma_noise is not None:
            return self.sigma_noise
        return 1.0 if self.mode == "faithful" else 1e-2


@dataclass(frozen=True, eq=False)
class BmaxsResult:
    accepted: bool
    best_value: float
    best_z: np.ndarray
    final_z: np.ndarray
    final_value: float
    ledger: RegretLedger
    trace: list
    inputs: object
    domain: DomainSpec
    T: int
    N: int
    points: list = None

    def summary(self):
        return {
            "accepted": self.accepted, "best_value": self.best_value,
            "final_value": self.final_value, "T": self.T, "N": self.N,
            "optimum": self.ledger.optimum,
        }


def default_domain(samples, n, degree=None, grid_points=512, unit_box=True):
    """Beta box from the ridge compact set of the sample parameters."""
    from .intrinsic import KernelConfig, estimate_compact_set, fit_ridge

    cfg = KernelConfig.for_qubits(n) if degree is None else KernelConfig(degree=degree)
    model = fit_ridge(samples, None, cfg, n)
    return DomainSpec.from_compact_set(estimate_compact_set(model, grid_points), unit_box)


def bmaxs(source, samples, T, epsilon, delta, cfg, rng, domain=None, inject=None):
    """Maximise the loss with GP-UCB and accept iff the final iterate's
    freshly evaluated loss is at most ``epsilon``.

    Gram data are estimated once for the loop; the final evaluation uses an
    independent estimate in shadow mode and adds N(0,1) noise in faithful
    mode.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    N = len(samples)
    n = samples[0].state.n
    gram_rng, loop_rng, final_rng = rng.spawn(3)
    est = estimate_gram(samples, source, cfg.estimator, gram_rng)
    inputs = est.loss_inputs()
    domain = domain or default_domain(samples, n)
    gp = GaussianProcess(
        domain.default_lengthscales(cfg.q_lengthscale, cfg.beta_lengthscale_factor),
        cfg.signal_var, cfg.noise_std,
    )

    def objective(z):
        q, b = domain.split(z)
        return loss_value(q, b, inputs)

    exact = est.mode == "exact"
    opt = loss_optimum(inputs, domain)[0] if exact else None
    ledger = RegretLedger(optimum=opt)
    noise = (lambda g: float(g.standard_normal())) if cfg.mode == "faithful" else None
    zs, ys, vals, rows = ucb_loop(
        objective, domain, T, N, delta, gp, loop_rng, cfg.candidates, cfg.refine,
        noise, inject, ledger, objective if exact else None,
    )
    i = int(np.argmax(vals))
    final_z = zs[-1]
    if exact:
        final_inputs = inputs
    else:
        final_inputs = estimate_gram(samples, source, cfg.estimator, final_rng).loss_inputs()
    q, b = domain.split(final_z)
    final_value = loss_value(q, b, final_inputs)
    if noise:
        final_value += noise(final_rng)
    return BmaxsResult(
        final_value <= epsilon, float(vals[i]), zs[i], final_z, float(final_value),
        ledger, rows, inputs, domain, T, N, zs,
    )
