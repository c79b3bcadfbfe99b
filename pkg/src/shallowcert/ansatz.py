"""Layered two-qubit circuit families on an open chain.

Each gate is ``exp(-i sum_k a_k P_k)`` over the 15 non-identity two-qubit
Pauli products, so a depth-R circuit with L gates per layer has 15*L*R
real parameters in [0, 2*pi).
"""
from dataclasses import dataclass
import itertools
import json
import math

import numpy as np

from . import limits
from .errors import DimensionError, InvariantViolation
from .noise import apply_noise
from .qsim import PAULI, DensityMatrix, StateVector, _apply_left, density_from_array

LAYOUTS = ("brickwork", "staircase")
TWO_PI = 2 * math.pi

PAULI_PAIRS = tuple(
    a + b for a, b in itertools.product("IXYZ", repeat=2) if a + b != "II"
)
_PAULI2 = np.stack([np.kron(PAULI[p[0]], PAULI[p[1]]) for p in PAULI_PAIRS])


def verify_causal_slice(n, slots):
    """True iff the gates in ``slots`` connect all n qubits."""
    if not slots:
        raise ValueError("slots must be nonempty")
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in slots:
        parent[find(a)] = find(b)
    return len({find(q) for q in range(n)}) == 1


@dataclass(frozen=True)
class Architecture:
    n: int
    layout: str
    R: int
    slots: tuple  # per-layer tuple of (a, b) pairs

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise InvariantViolation(f"unknown layout {self.layout!r}")
        if len(self.slots) != self.R:
            raise InvariantViolation("slot list length must equal R")
        sizes = {len(layer) for layer in self.slots}
        if len(sizes) != 1:
            raise InvariantViolation("every layer needs the same gate count")
        for layer in self.slots:
            for a, b in layer:
                if not (0 <= a < self.n and 0 <= b < self.n) or a == b:
                    raise InvariantViolation(f"bad slot {(a, b)} for n={self.n}")
            if not verify_causal_slice(self.n, layer):
                raise InvariantViolation(f"layer {layer} is not a causal slice")

    @property
    def L(self):
        return len(self.slots[0])

    @property
    def num_params(self):
        return 15 * self.L * self.R

    def with_depth(self, R):
        return build_architecture(self.n, self.layout, R)


def _layer_slots(n, layout):
    if layout == "staircase":
        return tuple((q, q + 1) for q in range(n - 1))
    # one brickwork layer = disjoint pairs from even sites, then from odd sites
    first = [(q, q + 1) for q in range(0, n - 1, 2)]
    second = [(q, q + 1) for q in range(1, n - 1, 2)]
    return tuple(first + second)


def build_architecture(n, layout, R):
    """Brickwork or staircase layout with R identical layers.

    Both layouts place n-1 gates per layer; a brickwork layer is the pairs
    (0,1),(2,3),... followed by (1,2),(3,4),..., so every layer on its own
    connects the chain.
    """
    if n < 2:
        raise ValueError("need at least two qubits")
    if R < 1:
        raise ValueError("need at least one layer")
    if layout not in LAYOUTS:
        raise ValueError(f"layout must be one of {LAYOUTS}")
    layer = _layer_slots(n, layout)
    return Architecture(n, layout, R, (layer,) * R)


@dataclass(frozen=True, eq=False)
class ParameterSet:
    """Flat gate coefficients in order (layer, slot, Pauli pair)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if np.any(v < 0) or np.any(v >= TWO_PI) or not np.all(np.isfinite(v)):
            raise InvariantViolation("parameters must lie in [0, 2*pi)")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def padded(self, arch):
        """Zero-extend to the parameter count of a deeper architecture."""
        out = np.zeros(arch.num_params)
        out[: len(self)] = self.values
        return ParameterSet(out)


def zero_params(arch):
    return ParameterSet(np.zeros(arch.num_params))


def random_params(arch, rng):
    return ParameterSet(rng.uniform(0.0, TWO_PI, arch.num_params))


def two_qubit_gate(coeffs):
    """``exp(-i sum_k c_k P_k)`` for 15 Pauli-pair coefficients."""
    return gates_from_coeffs(np.asarray(coeffs, dtype=np.float64).reshape(1, 15))[0]


def gates_from_coeffs(coeffs):
    """Batch version of :func:`two_qubit_gate`; ``coeffs`` is (G, 15)."""
    H = np.tensordot(coeffs, _PAULI2, axes=([1], [0]))
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w)[:, None, :]) @ np.conj(np.transpose(V, (0, 2, 1)))


def _check_len(arch, params):
    if len(params) != arch.num_params:
        raise DimensionError(
            f"expected {arch.num_params} parameters, got {len(params)}"
        )


def _layer_gates(arch, params):
    gates = gates_from_coeffs(np.asarray(params.values).reshape(-1, 15))
    return gates.reshape(arch.R, arch.L, 4, 4)


def qnn_amplitudes(arch, params):
    """Raw amplitude vector of ``U(alpha)|0^n>``."""
    _check_len(arch, params)
    limits.check_qubits(arch.n)
    n = arch.n
    gates = _layer_gates(arch, params)
    t = np.zeros((2,) * n, dtype=np.complex128)
    t[(0,) * n] = 1.0
    for r, layer in enumerate(arch.slots):
        for s, pair in enumerate(layer):
            t = _apply_left(t, gates[r, s], pair, n)
    return t.reshape(-1)


def prepare_qnn_state(arch, params):
    amp = qnn_amplitudes(arch, params)
    return StateVector(arch.n, amp / np.linalg.norm(amp))


def layer_unitaries(arch, params):
    """Full 2^n x 2^n matrix of each layer, shape (R, d, d)."""
    _check_len(arch, params)
    n, d = arch.n, 2**arch.n
    gates = _layer_gates(arch, params)
    out = np.empty((arch.R, d, d), dtype=np.complex128)
    for r, layer in enumerate(arch.slots):
        # columns of the identity, evolved as one tensor with a trailing axis
        t = np.eye(d, dtype=np.complex128).reshape((2,) * n + (d,))
        for s, pair in enumerate(layer):
            t = _apply_left(t, gates[r, s], pair, n)
        out[r] = t.reshape(d, d)
    return out


def prepare_noisy_state(arch, params, channel):
    """Noise channel applied after every layer, starting from ``|0^n><0^n|``."""
    limits.check_qubits(arch.n)
    n, d = arch.n, 2**arch.n
    rho = np.zeros((d, d), dtype=np.complex128)
    rho[0, 0] = 1.0
    for U in layer_unitaries(arch, params):
        rho = U @ rho @ U.conj().T
        rho = apply_noise(rho, channel, n)
    return density_from_array(rho)


@dataclass(frozen=True, eq=False)
class QnnSample:
    arch: Architecture
    params: ParameterSet
    state: StateVector
    index: int

    def __post_init__(self):
        ref = qnn_amplitudes(self.arch, self.params)
        if np.max(np.abs(ref - self.state.amplitudes)) > 1e-9:
            raise InvariantViolation("sample state does not match its parameters")


def make_sample(arch, params, index=0):
    return QnnSample(arch, params, prepare_qnn_state(arch, params), index)


def sample_qnn_set(arch, N, rng):
    """N independent uniformly random parameter sets with their states.

    Sample i draws from the i-th child stream of ``rng``, so the set does
    not depend on evaluation order.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    streams = rng.spawn(N)
    return [make_sample(arch, random_params(arch, g), i) for i, g in enumerate(streams)]


def sample_matrix(samples):
    """Stacked amplitudes as columns, shape (d, N)."""
    return np.stack([s.state.amplitudes for s in samples], axis=1)


# --------------------------------------------------------------------------
# text serialization
# --------------------------------------------------------------------------

def dumps_circuit(arch, params=None):
    doc = {
        "layout": arch.layout,
        "n": arch.n,
        "R": arch.R,
        "L": arch.L,
        "params": None if params is None else [float(v) for v in params.values],
    }
    return json.dumps(doc, indent=1)


def loads_circuit(text):
    doc = json.loads(text)
    arch = build_architecture(int(doc["n"]), doc["layout"], int(doc["R"]))
    if int(doc["L"]) != arch.L:
        raise InvariantViolation("stored L does not match the layout")
    params = None if doc.get("params") is None else ParameterSet(np.array(doc["params"]))
    if params is not None:
        _check_len(arch, params)
    return arch, params
