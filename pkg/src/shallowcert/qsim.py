"""Dense n-qubit states, Kraus channels and spectral functions.

Qubit 0 is the most significant bit of a basis index, so ``X`` on qubit 0 of
``|00>`` gives ``|10>``.  State containers are frozen and hold read-only
arrays; every operation returns a new object.
"""
from dataclasses import dataclass
import struct

import numpy as np

from .errors import DimensionError, InvariantViolation
from . import limits

PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

UNITARY_TOL = 1e-9
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9


def _frozen(a, dtype=np.complex128):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _qubits_of(dim):
    n = int(dim).bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two")
    return n


# --------------------------------------------------------------------------
# types
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StateVector:
    n: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = _frozen(np.ravel(self.amplitudes))
        if amp.shape[0] != 2**self.n:
            raise DimensionError(f"expected {2**self.n} amplitudes, got {amp.shape[0]}")
        norm = float(np.vdot(amp, amp).real)
        if abs(norm - 1.0) > 1e-10:
            raise InvariantViolation(f"state norm^2 is {norm!r}, not 1")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self):
        return 2**self.n

    def density(self):
        return DensityMatrix(self.n, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    n: int
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen(self.matrix)
        d = 2**self.n
        if m.shape != (d, d):
            raise DimensionError(f"expected a {d}x{d} matrix, got {m.shape}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise InvariantViolation("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvariantViolation(f"density matrix trace is {tr!r}")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise InvariantViolation("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return 2**self.n

    def eigvalsh(self):
        """Eigenvalues with round-off negatives clamped to zero."""
        w = np.linalg.eigvalsh(self.matrix)
        return np.clip(w, 0.0, None)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    n_targets: int
    kraus_ops: tuple

    def __post_init__(self):
        d = 2**self.n_targets
        ops = tuple(_frozen(k) for k in self.kraus_ops)
        if not ops:
            raise InvariantViolation("a channel needs at least one Kraus operator")
        for k in ops:
            if k.shape != (d, d):
                raise DimensionError(f"Kraus operator shape {k.shape} != {(d, d)}")
        completeness = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(completeness - np.eye(d))) > 1e-9:
            raise InvariantViolation("Kraus operators are not trace preserving")
        object.__setattr__(self, "kraus_ops", ops)

    def stacked(self):
        return np.stack(self.kraus_ops)


@dataclass(frozen=True)
class PauliString:
    n: int
    letters: str

    def __post_init__(self):
        if len(self.letters) != self.n or set(self.letters) - set("IXYZ"):
            raise DimensionError(f"bad Pauli string {self.letters!r} for n={self.n}")

    @property
    def weight(self):
        return sum(c != "I" for c in self.letters)

    def matrix(self):
        m = np.ones((1, 1), dtype=np.complex128)
        for c in self.letters:
            m = np.kron(m, PAULI[c])
        return m


# --------------------------------------------------------------------------
# constructors
# --------------------------------------------------------------------------

def basis_state(n, index=0):
    amp = np.zeros(2**n, dtype=np.complex128)
    amp[index] = 1.0
    return StateVector(n, amp)


def maximally_mixed(n):
    return DensityMatrix(n, np.eye(2**n) / 2**n)


def density_from_array(matrix):
    """Wrap a square array as a DensityMatrix, Hermitising round-off."""
    m = np.asarray(matrix, dtype=np.complex128)
    m = 0.5 * (m + m.conj().T)
    return DensityMatrix(_qubits_of(m.shape[0]), m)


def random_density_matrix(n, rng, rank=None):
    """Induced-measure random state ``G G^dagger / Tr``."""
    d = 2**n
    k = d if rank is None else rank
    g = rng.standard_normal((d, k)) + 1j * rng.standard_normal((d, k))
    m = g @ g.conj().T
    return density_from_array(m / np.trace(m).real)


def make_rng(seed):
    return np.random.default_rng(seed)


def split_rng(rng, count):
    """Independent child streams; the parent stream is advanced."""
    return rng.spawn(count)


# --------------------------------------------------------------------------
# embedding and application
# --------------------------------------------------------------------------

def _check_targets(targets, n):
    targets = tuple(int(t) for t in targets)
    if len(set(targets)) != len(targets) or any(t < 0 or t >= n for t in targets):
        raise DimensionError(f"invalid targets {targets} for n={n}")
    return targets


def _check_unitary(gate):
    err = np.max(np.abs(gate.conj().T @ gate - np.eye(gate.shape[0])))
    if err > UNITARY_TOL:
        raise InvariantViolation(f"gate is not unitary (deviation {err:.3g})")


def embed_operator(op, targets, n):
    """Full 2^n x 2^n matrix of ``op`` acting on ``targets``.

    Built from Kronecker products and an explicit basis permutation; used as
    the slow reference path.
    """
    targets = _check_targets(targets, n)
    k = len(targets)
    rest = [q for q in range(n) if q not in targets]
    full = np.kron(op, np.eye(2**(n - k)))
    # full acts on ordering (targets..., rest...); permute to natural order
    order = list(targets) + rest
    d = 2**n
    perm = np.empty(d, dtype=np.int64)
    for idx in range(d):
        bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
        j = 0
        for q in order:
            j = (j << 1) | bits[q]
        perm[idx] = j
    return full[np.ix_(perm, perm)]


def _apply_left(t, op, targets, n, offset=0):
    k = len(targets)
    opt = op.reshape((2,) * (2 * k))
    axes = [offset + q for q in targets]
    out = np.tensordot(opt, t, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def _apply_to_matrix(m, ops, targets, n):
    """Sum over ``ops`` of ``K m K^dagger`` without building full matrices."""
    t = m.reshape((2,) * (2 * n))
    acc = None
    for K in ops:
        left = _apply_left(t, K, targets, n)
        both = _apply_left(left, K.conj(), targets, n, offset=n)
        acc = both if acc is None else acc + both
    d = 2**n
    return acc.reshape(d, d)


def apply_unitary(state, gate, targets):
    """Apply ``gate`` on ``targets`` to a StateVector or DensityMatrix."""
    gate = np.asarray(gate, dtype=np.complex128)
    n = state.n
    targets = _check_targets(targets, n)
    if gate.shape != (2**len(targets),) * 2:
        raise DimensionError(f"gate shape {gate.shape} does not match {len(targets)} targets")
    _check_unitary(gate)
    if isinstance(state, StateVector):
        t = state.amplitudes.reshape((2,) * n)
        out = _apply_left(t, gate, targets, n).reshape(-1)
        return StateVector(n, out / np.linalg.norm(out))
    out = _apply_to_matrix(state.matrix, (gate,), targets, n)
    return density_from_array(out)


def apply_channel(rho, channel, targets):
    """``sum_l K_l rho K_l^dagger`` with the channel acting on ``targets``."""
    targets = _check_targets(targets, rho.n)
    if len(targets) != channel.n_targets:
        raise DimensionError("channel arity does not match the number of targets")
    out = _apply_to_matrix(rho.matrix, channel.kraus_ops, targets, rho.n)
    return density_from_array(out)


# --------------------------------------------------------------------------
# scalar functions
# --------------------------------------------------------------------------

def _same_n(a, b):
    if a.n != b.n:
        raise DimensionError(f"qubit counts differ: {a.n} vs {b.n}")


def fidelity_pure(rho, psi):
    """``<psi| rho |psi>``."""
    _same_n(rho, psi)
    v = np.vdot(psi.amplitudes, rho.matrix @ psi.amplitudes)
    return float(v.real)


def trace_distance(a, b):
    _same_n(a, b)
    # fixed argument order so that d(a, b) == d(b, a) bit for bit
    if a.matrix.tobytes() > b.matrix.tobytes():
        a, b = b, a
    w = np.linalg.eigvalsh(a.matrix - b.matrix)
    return float(0.5 * np.sum(np.abs(w)))


def trace_power_exact(rho, l):
    if l < 1:
        raise ValueError("power must be a positive integer")
    if l == 1:
        return 1.0
    return float(np.sum(rho.eigvalsh() ** l))


def purity(rho):
    return trace_power_exact(rho, 2)


def von_neumann_entropy_exact(rho):
    """Entropy in nats; zero eigenvalues contribute nothing."""
    w = rho.eigvalsh()
    w = w[w > 0]
    return float(-np.sum(w * np.log(w)))


def partial_trace(rho, keep):
    n = rho.n
    keep = sorted(_check_targets(keep, n))
    drop = [q for q in range(n) if q not in keep]
    t = rho.matrix.reshape((2,) * (2 * n))
    letters = "abcdefghijklmnopqrstuvwxyz"
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for q in drop:
        col[q] = row[q]
    out = "".join(row[q] for q in keep) + "".join(col[q] for q in keep)
    spec = "".join(row) + "".join(col) + "->" + out
    k = len(keep)
    return density_from_array(np.einsum(spec, t).reshape(2**k, 2**k))


# --------------------------------------------------------------------------
# Haar sampling
# --------------------------------------------------------------------------

def _haar_from_gaussians(z):
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    phase = diag / np.abs(diag)
    return q * phase[..., None, :]


def haar_random_unitary(dim, rng):
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    if dim < 2:
        raise ValueError("dim must be at least 2")
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    return _haar_from_gaussians(z)


def haar_unitaries(dim, count, rng):
    """``count`` independent Haar unitaries, shape (count, dim, dim)."""
    z = (rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal((count, dim, dim))) / np.sqrt(2)
    return _haar_from_gaussians(z)


def haar_from_seeds(dim, seeds):
    """One Haar unitary per integer seed; identical to calling
    ``haar_random_unitary(dim, np.random.default_rng(seed))`` per seed."""
    z = np.empty((len(seeds), dim, dim), dtype=np.complex128)
    for i, s in enumerate(seeds):
        g = np.random.default_rng(int(s))
        z[i] = g.standard_normal((dim, dim)) + 1j * g.standard_normal((dim, dim))
    return _haar_from_gaussians(z / np.sqrt(2))


# --------------------------------------------------------------------------
# QSTATE1 files
# --------------------------------------------------------------------------

MAGIC = b"QSTATE1\0"


def dumps_state(state):
    if isinstance(state, StateVector):
        kind, data = 0, state.amplitudes
    else:
        kind, data = 1, state.matrix
    body = np.ascontiguousarray(data, dtype="<c16").tobytes()
    return MAGIC + struct.pack("<IB", state.n, kind) + body


def loads_state(blob):
    if blob[:8] != MAGIC:
        raise ValueError("not a QSTATE1 file")
    n, kind = struct.unpack("<IB", blob[8:13])
    data = np.frombuffer(blob[13:], dtype="<c16").astype(np.complex128)
    d = 2**n
    if kind == 0:
        if data.size != d:
            raise ValueError("truncated QSTATE1 statevector")
        return StateVector(n, data)
    if kind == 1:
        if data.size != d * d:
            raise ValueError("truncated QSTATE1 density matrix")
        return DensityMatrix(n, data.reshape(d, d))
    raise ValueError(f"unknown QSTATE1 kind {kind}")


def save_state(path, state):
    with open(path, "wb") as fh:
        fh.write(dumps_state(state))


def load_state(path):
    with open(path, "rb") as fh:
        return loads_state(fh.read())
