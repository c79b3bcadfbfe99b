"""Noise channels and purity analytics for shallow noisy circuits.

The central quantity is the F metric ``F = sum_l |Tr K_l|^2`` of a channel.
For a circuit of Haar-random layers interleaved with the channel, the mean
overlap between the noisy state and its noiseless trajectory is

    eta(R) = ((F - 1) / (d^2 - 1))**(R - 1) * (F - 1) / (d (d + 1)) + 1/d

which :func:`monte_carlo_overlap` checks by direct simulation.
"""
from dataclasses import dataclass
import itertools
import math

import numpy as np

from . import kernels, limits
from .errors import InvariantViolation
from .qsim import PAULI, KrausChannel, haar_unitaries

KINDS = ("local_depolarizing", "global_depolarizing", "bit_flip", "identity", "custom")
LOCAL_KINDS = ("local_depolarizing", "bit_flip")


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """A gate-independent noise model applied after every circuit layer.

    ``local_depolarizing`` and ``bit_flip`` act qubit-wise on all qubits,
    ``global_depolarizing`` once on the full register.  A ``custom`` channel
    carries its own :class:`KrausChannel`; one-qubit custom channels are
    applied qubit-wise, full-register ones globally.
    """

    kind: str
    strength: float = 0.0
    custom_kraus: KrausChannel = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvariantViolation(f"unknown channel kind {self.kind!r}")
        if not 0.0 <= self.strength <= 1.0:
            raise InvariantViolation(f"strength {self.strength} outside [0, 1]")
        if self.kind == "custom" and self.custom_kraus is None:
            raise InvariantViolation("custom channel needs Kraus operators")

    @property
    def is_local(self):
        if self.kind == "custom":
            return self.custom_kraus.n_targets == 1
        return self.kind in LOCAL_KINDS

    def qubit_kraus(self):
        """Single-qubit Kraus operators of a qubit-wise channel."""
        g = self.strength
        if self.kind == "local_depolarizing":
            # (1 - g) rho + g Tr_i(rho) I/2
            return [math.sqrt(1 - 0.75 * g) * PAULI["I"]] + [
                math.sqrt(g / 4) * PAULI[c] for c in "XYZ"
            ]
        if self.kind == "bit_flip":
            return [math.sqrt(1 - g) * PAULI["I"], math.sqrt(g) * PAULI["X"]]
        if self.kind == "custom" and self.custom_kraus.n_targets == 1:
            return list(self.custom_kraus.kraus_ops)
        raise ValueError(f"{self.kind} is not a qubit-wise channel")

    def full_kraus(self, n):
        """Kraus operators of the whole n-qubit channel (4^n of them for
        qubit-wise depolarizing; only use at small n)."""
        d = 2**n
        if self.kind == "identity":
            return [np.eye(d, dtype=np.complex128)]
        if self.is_local:
            ops = self.qubit_kraus()
            out = []
            for combo in itertools.product(ops, repeat=n):
                m = np.ones((1, 1), dtype=np.complex128)
                for k in combo:
                    m = np.kron(m, k)
                out.append(m)
            return out
        if self.kind == "global_depolarizing":
            p = self.strength
            out = []
            for letters in itertools.product("IXYZ", repeat=n):
                m = np.ones((1, 1), dtype=np.complex128)
                for c in letters:
                    m = np.kron(m, PAULI[c])
                w = (1 - p + p / d**2) if set(letters) == {"I"} else p / d**2
                out.append(math.sqrt(w) * m)
            return out
        if self.custom_kraus.n_targets != n:
            raise ValueError("custom channel arity does not match n")
        return list(self.custom_kraus.kraus_ops)


def identity_channel():
    return ChannelSpec("identity", 0.0)


def local_depolarizing(gamma):
    return ChannelSpec("local_depolarizing", gamma)


def apply_noise(matrix, spec, n):
    """Apply one round of the noise model to a raw density matrix."""
    if spec.kind == "identity":
        return matrix
    d = 2**n
    if spec.kind == "global_depolarizing":
        p = spec.strength
        return (1 - p) * matrix + p * np.trace(matrix) * np.eye(d) / d
    if spec.is_local:
        ops = [np.asarray(k) for k in spec.qubit_kraus()]
        t = matrix
        for q in range(n):
            t = _qubit_channel(t, ops, q, n)
        return t
    acc = np.zeros_like(matrix)
    for K in spec.full_kraus(n):
        acc += K @ matrix @ K.conj().T
    return acc


def _qubit_channel(m, ops, q, n):
    t = m.reshape((2,) * (2 * n))
    acc = None
    for K in ops:
        a = np.moveaxis(np.tensordot(K, t, axes=([1], [q])), 0, q)
        b = np.moveaxis(np.tensordot(K.conj(), a, axes=([1], [n + q])), 0, n + q)
        acc = b if acc is None else acc + b
    return acc.reshape(m.shape)


# --------------------------------------------------------------------------
# analytics
# --------------------------------------------------------------------------

def _qubit_f(ops):
    return float(sum(abs(np.trace(k)) ** 2 for k in ops))


def channel_f_metric(spec, n):
    """F for the full n-qubit channel.

    Qubit-wise channels factorise, so F is the per-qubit value to the n-th
    power.  Global depolarizing has only one Kraus operator with nonzero trace.
    """
    d = 2**n
    if spec.kind == "identity":
        return float(d * d)
    if spec.is_local:
        return _qubit_f(spec.qubit_kraus()) ** n
    if spec.kind == "global_depolarizing":
        p = spec.strength
        return float(d * d * (1 - p + p / d**2))
    return _qubit_f(spec.custom_kraus.kraus_ops)


def f_metric_explicit(spec, n):
    """F summed over an explicitly enumerated n-qubit Kraus set."""
    return _qubit_f(spec.full_kraus(n))


def purity_lower_bound(F, n, depth):
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if F < 0:
        raise ValueError("F must be non-negative")
    d = 2.0**n
    ratio = (F - 1) / (d * d - 1)
    return ratio ** (depth - 1) * (F - 1) / (d * (d + 1)) + 1 / d


def max_depth_for_purity(F, n, eta_target, cap=10_000):
    """Largest depth R with ``purity_lower_bound(F, n, R') >= eta_target`` for
    every R' <= R.

    Returns ``None`` when no finite bound exists (noiseless channel, or the
    target still holds at ``cap``).  Found by an integer scan; see the module
    docstring for the closed form.
    """
    d = 2**n
    if not 1 / d < eta_target < 1:
        raise ValueError(f"eta_target must lie in (1/d, 1) = ({1 / d}, 1)")
    if F >= d * d:
        return None
    for depth in range(1, cap + 1):
        if purity_lower_bound(F, n, depth) < eta_target:
            return depth - 1
    return None


def depth_log_coefficient(F, n, log_base=math.e):
    """Coefficient c in the asymptotic depth bound ``R <~ c * log_b(1/eta)``.

    Uses ``eta(R) ~ ((F - 1)/(d^2 - 1))**R`` once the ``1/d`` floor is
    negligible, so c = ln(b) / ln((d^2 - 1)/(F - 1)).
    """
    d2 = 4.0**n
    return math.log(log_base) / math.log((d2 - 1) / (F - 1))


def monte_carlo_overlap(spec, n, depth, trials, rng):
    """Mean and standard error of ``Tr(rho_noisy rho_ideal)`` over Haar layers.

    Each trial draws ``depth`` independent Haar unitaries on the full
    register, evolves ``|0^n><0^n|`` once with the channel after every layer
    and once without, and records the overlap of the two final states.
    """
    if trials < 30:
        raise ValueError("need at least 30 trials")
    limits.check_qubits(n)
    d = 2**n
    U = haar_unitaries(d, trials * depth, rng).reshape(trials, depth, d, d)
    if spec.kind == "global_depolarizing":
        # the Pauli Kraus set has 4^n members; the affine form is equivalent
        kraus = None
    else:
        kraus = np.stack(spec.full_kraus(n))
    if kraus is not None:
        vals = kernels.noisy_overlap_trials(U, kraus)
    else:
        vals = _global_overlap_trials(U, spec.strength)
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(trials))
    return mean, stderr


def _global_overlap_trials(U, p):
    T, depth, d, _ = U.shape
    rho = np.zeros((T, d, d), dtype=np.complex128)
    rho[:, 0, 0] = 1
    psi = np.zeros((T, d), dtype=np.complex128)
    psi[:, 0] = 1
    eye = np.eye(d) / d
    for r in range(depth):
        Ur = U[:, r]
        rho = (1 - p) * (Ur @ rho @ np.conj(np.transpose(Ur, (0, 2, 1)))) + p * eye
        psi = np.einsum("tab,tb->ta", Ur, psi)
    return np.einsum("ta,tab,tb->t", psi.conj(), rho, psi).real


def pauli_path_rank_bound(gamma, n, depth):
    """``(1 - 0.75 gamma)**(n R) * R`` for qubit-wise depolarizing noise."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    return (1 - 0.75 * gamma) ** (n * depth) * depth


def noise_strength_threshold(epsilon):
    """Local noise rate ``(1 - exp(-eps)) / 2`` below which Haar circuits stay
    eps-far from uniform."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return 0.5 * (1 - math.exp(-epsilon))


REPORT_COLUMNS = ("n", "channel", "strength", "depth", "F", "eta", "mc_mean", "mc_stderr", "trials", "seed")


def purity_report(spec, n, depths, trials, seed):
    """Rows of the purity-bound CSV: analytic eta next to its Monte-Carlo check.

    Each depth uses its own child stream of ``seed`` so rows are independent
    of which other depths were requested.
    """
    F = channel_f_metric(spec, n)
    rows = []
    for depth in depths:
        row = {
            "n": n, "channel": spec.kind, "strength": spec.strength, "depth": depth,
            "F": F, "eta": purity_lower_bound(F, n, depth),
            "mc_mean": None, "mc_stderr": None, "trials": trials, "seed": seed,
        }
        if trials:
            rng = np.random.default_rng([seed, depth])
            row["mc_mean"], row["mc_stderr"] = monte_carlo_overlap(spec, n, depth, trials, rng)
        rows.append(row)
    return rows
