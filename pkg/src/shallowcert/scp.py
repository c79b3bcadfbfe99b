"""Depth search for the smallest circuit family that reproduces a state.

``P(R)`` runs the GP-UCB loss maximisation on N random depth-R circuits and
is True when the final iterate's loss is at most epsilon.  The search over
R in [1, s], s = max(2, ceil(log2 n)), is a binary search that assumes P is
monotone, finishing with the check that turns the bracket into a minimum.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .ansatz import build_architecture, sample_qnn_set, sample_matrix
from .bayesopt import BmaxsConfig, _box_hyperplane_max, bmaxs, default_domain
from .errors import BudgetExhausted
from .loss import LossInputs, loss_explicit, loss_value, observable_matrix  # noqa: F401 (re-exported)
from .qsim import trace_distance, density_from_array


@dataclass(frozen=True)
class ScpConfig:
    epsilon: float = 0.1
    delta: float = 0.1
    k_exponent: int = None
    N_override: int = None
    T_override: int = None
    N_cap: int = 64
    T_cap: int = 400
    seed: int = 0
    bmaxs: BmaxsConfig = BmaxsConfig()
    eval_budget: int = None  # total loss evaluations over all probes
    max_k: int = 64

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        for name in ("N_override", "T_override", "N_cap", "T_cap", "eval_budget"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be positive")


def depth_ceiling(n):
    return max(2, math.ceil(math.log2(n)))


def choose_k(n, epsilon, max_k=64):
    """Smallest k >= 1 with ``k ln n < n^(k/2 - 1) epsilon``, or None."""
    for k in range(1, max_k + 1):
        if k * math.log(n) < n ** (k / 2 - 1) * epsilon:
            return k
    return None


def sample_count(arch, epsilon):
    """``L R n^2 / epsilon^2`` rounded up."""
    return math.ceil(arch.L * arch.R * arch.n**2 / epsilon**2 - 1e-9)


def _resources(arch, config):
    n = arch.n
    N_formula = sample_count(arch, config.epsilon)
    N = config.N_override or min(N_formula, config.N_cap)
    k = config.k_exponent or choose_k(n, config.epsilon, config.max_k)
    T_formula = None if k is None else N * N * n**k
    if config.T_override:
        T = config.T_override
    else:
        T = config.T_cap if T_formula is None else min(T_formula, config.T_cap)
    return {"N": N, "T": T, "k": k, "N_formula": N_formula, "T_formula": T_formula}


@dataclass(frozen=True, eq=False)
class ProbeRecord:
    depth: int
    accepted: bool
    best_value: float
    final_value: float
    T_used: int
    N_used: int
    seed: list
    k: int
    witness_min_probed: float  # min over probed beta of L(q_final, beta)
    witness_min_exact: float  # exact min over the beta domain (exact mode)
    result: object = field(default=None, repr=False)

    def as_dict(self):
        return {
            "depth": self.depth, "accepted": self.accepted,
            "best_value": self.best_value, "final_value": self.final_value,
            "T_used": self.T_used, "N_used": self.N_used, "seed": self.seed, "k": self.k,
            "witness_min_probed": self.witness_min_probed,
            "witness_min_exact": self.witness_min_exact,
        }


@dataclass(frozen=True, eq=False)
class ScpVerdict:
    outcome: str  # "yes", "no" or "inconclusive"
    r_min: int
    L: int
    n: int
    epsilon: float
    ceiling: int
    probes: list
    caps: dict
    mode: str
    notes: tuple = ()

    @property
    def complexity_bound(self):
        return None if self.r_min is None else self.L * self.r_min

    def to_json(self):
        return {
            "outcome": self.outcome, "r_min": self.r_min,
            "complexity_bound": self.complexity_bound, "epsilon": self.epsilon,
            "probes": [p.as_dict() for p in self.probes], "caps": self.caps,
            "mode": self.mode, "n": self.n, "L": self.L, "ceiling": self.ceiling,
            "notes": list(self.notes),
        }


def _witness(res):
    """Lemma-style witness for the final q: how small the loss can be made
    over beta, both among probed points and exactly over the domain."""
    dom = res.domain
    q = dom.split(res.final_z)[0]
    betas = [dom.split(z)[1] for z in res.points]
    probed = min(loss_value(q, b, res.inputs) for b in betas)
    v = res.inputs.G @ q - res.inputs.f
    hi, _ = _box_hyperplane_max(v, dom.lower, dom.upper)
    lo = -_box_hyperplane_max(-v, dom.lower, dom.upper)[0]
    exact = 0.0 if lo <= 0.0 <= hi else min(abs(lo), abs(hi))
    return float(probed), float(exact)


def probe_depth(source, layout, depth, config, sample_hook=None, inject_hook=None):
    """Evaluate the predicate at one depth with the depth's own seed stream.

    ``sample_hook(depth, arch, samples)`` may replace the sample set and
    ``inject_hook(depth, domain, samples)`` may return ``{t: z}`` forced
    query points; both exist for tests and documented demonstrations.
    """
    n = source.n
    arch = build_architecture(n, layout, depth)
    res_info = _resources(arch, config)
    seed = [int(config.seed), int(depth)]
    sample_rng, run_rng = np.random.default_rng(seed).spawn(2)
    samples = sample_qnn_set(arch, res_info["N"], sample_rng)
    if sample_hook is not None:
        samples = sample_hook(depth, arch, samples)
    domain = default_domain(samples, n)
    inject = inject_hook(depth, domain, samples) if inject_hook else None
    res = bmaxs(source, samples, res_info["T"], config.epsilon, config.delta,
                config.bmaxs, run_rng, domain=domain, inject=inject)
    probed, exact = _witness(res)
    return ProbeRecord(
        depth, bool(res.accepted), res.best_value, res.final_value, res.T, len(samples),
        seed, res_info["k"], probed, exact, res,
    ), arch


def run_scp(source, layout, config, sample_hook=None, inject_hook=None):
    """Binary search for the minimal accepted depth.

    The bracket (R, s) keeps P(s) True (or s unprobed) and P(R) False (or
    R = 1 unprobed).  Once ``s - R <= 1`` the minimum is 1 if P(1) holds,
    otherwise s if P(s) holds, otherwise no depth up to the ceiling works.
    """
    n = source.n
    if n < 2:
        raise ValueError("need at least two qubits")
    ceiling = depth_ceiling(n)
    cache = {}
    probes = []
    used = [0]
    L = build_architecture(n, layout, 1).L

    def P(depth):
        if depth not in cache:
            arch = build_architecture(n, layout, depth)
            T = _resources(arch, config)["T"]
            if config.eval_budget is not None and used[0] + T > config.eval_budget:
                raise BudgetExhausted(f"evaluation budget {config.eval_budget} exhausted")
            rec, _ = probe_depth(source, layout, depth, config, sample_hook, inject_hook)
            used[0] += rec.T_used
            cache[depth] = rec
            probes.append(rec)
        return cache[depth].accepted

    caps = {"N_cap": config.N_cap, "T_cap": config.T_cap,
            "N_override": config.N_override, "T_override": config.T_override,
            "eval_budget": config.eval_budget}
    mode = f"{config.bmaxs.estimator.mode}/{config.bmaxs.mode}"
    notes = ("acceptance tests the final GP iterate only, not the maximum over (q, beta)",)

    def verdict(outcome, r_min):
        return ScpVerdict(outcome, r_min, L, n, config.epsilon, ceiling, list(probes), caps, mode, notes)

    R, s = 1, ceiling
    try:
        while s - R > 1:
            mid = (R + s) // 2
            if P(mid):
                s = mid
            else:
                R = mid
        if R == 1 and 1 not in cache and P(1):
            return verdict("yes", 1)
        if P(s):
            return verdict("yes", s)
        return verdict("no", None)
    except BudgetExhausted:
        return verdict("inconclusive", None)


def ssap_report(verdict, n=None):
    """Structured and textual summary of the complexity claim."""
    n = n or verdict.n
    depths = [p.depth for p in verdict.probes]
    out = {"outcome": verdict.outcome, "probed_depths": depths, "n": n, "L": verdict.L}
    if verdict.outcome == "yes":
        bound = verdict.complexity_bound
        out.update(ssap=True, complexity_upper=bound)
        out["text"] = (
            f"C_eps(rho) <= C^lim,A_eps(rho) <= L*R_min = {verdict.L}*{verdict.r_min} = {bound} "
            f"(eps = {verdict.epsilon})"
        )
    elif verdict.outcome == "no":
        lower = verdict.L * verdict.ceiling
        out.update(ssap=False, complexity_lower=lower)
        witnesses = [p.witness_min_exact for p in verdict.probes]
        out["text"] = (
            f"C^lim,A_eps(rho) > L*log n, here L*{verdict.ceiling} = {lower} "
            f"(eps = {verdict.epsilon}); final-q min-over-beta losses {witnesses}"
        )
    else:
        out.update(ssap=None)
        out["text"] = f"inconclusive: evaluation budget exhausted after probing depths {depths}"
    return out


# --------------------------------------------------------------------------
# state approximation from a good measurement
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ApproxResult:
    phi_hat: np.ndarray  # sqrt(M) rho sqrt(M), not normalised
    trace_dist: float  # (1/2)|| phi_hat / Tr phi_hat - rho ||_1
    trace_norm_gap: float  # || phi_hat - rho ||_1
    overlap: float  # Tr(M rho)
    clamp: float  # magnitude of the most negative eigenvalue of M set to 0


def approx_state(best_beta, samples, rho):
    """Post-measurement state ``sqrt(M) rho sqrt(M)`` for ``M = M(beta)``."""
    states = samples if isinstance(samples, np.ndarray) else sample_matrix(samples)
    M = observable_matrix(best_beta, states)
    M = 0.5 * (M + M.conj().T)
    w, V = np.linalg.eigh(M)
    clamp = float(max(0.0, -w.min()))
    root = (V * np.sqrt(np.maximum(w, 0.0))) @ V.conj().T
    m = np.asarray(rho.matrix)
    phi = root @ m @ root
    overlap = float(np.trace(M @ m).real)
    gap = float(np.abs(np.linalg.eigvalsh(phi - m)).sum())
    tr = float(np.trace(phi).real)
    if tr > 0:
        dist = trace_distance(density_from_array(phi / tr), rho)
    else:
        dist = 1.0
    return ApproxResult(phi, dist, gap, overlap, clamp)
