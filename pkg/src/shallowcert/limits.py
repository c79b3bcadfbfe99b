"""Dimension caps, overridable from the environment.

``SHALLOWCERT_MAX_QUBITS`` bounds single-state simulations (default 6) and
``SHALLOWCERT_MAX_DIM`` bounds the register of multi-copy circuits
(default 4096).
"""
import os

from .errors import CapExceeded

DEFAULT_MAX_QUBITS = 6
DEFAULT_MAX_DIM = 2**12


def max_qubits():
    return int(os.environ.get("SHALLOWCERT_MAX_QUBITS", DEFAULT_MAX_QUBITS))


def max_dim():
    return int(os.environ.get("SHALLOWCERT_MAX_DIM", DEFAULT_MAX_DIM))


def check_qubits(n):
    if n > max_qubits():
        raise CapExceeded(f"n={n} exceeds the qubit cap {max_qubits()} (SHALLOWCERT_MAX_QUBITS)")


def check_dim(dim):
    if dim > max_dim():
        raise CapExceeded(f"dimension {dim} exceeds the cap {max_dim()} (SHALLOWCERT_MAX_DIM)")
