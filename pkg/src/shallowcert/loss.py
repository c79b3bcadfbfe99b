"""The distinguishing loss ``L(q, beta) = |sum_i q_i Tr(M(beta)(|Psi_i><Psi_i| - rho))|``
with ``M(beta) = sum_j beta_j |Psi_j><Psi_j|``.

Expanding the trace gives ``|beta . (G q - f)|`` where ``G`` is the overlap
Gram matrix of the sample states and ``f_j = <Psi_j|rho|Psi_j>``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvariantViolation


@dataclass(frozen=True, eq=False)
class LossInputs:
    G: np.ndarray
    f: np.ndarray
    provenance: str = "exact"
    G_stderr: np.ndarray = None
    f_stderr: np.ndarray = None

    def __post_init__(self):
        G = np.array(self.G, dtype=np.float64)
        f = np.array(self.f, dtype=np.float64).ravel()
        if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] != f.shape[0]:
            raise DimensionError(f"Gram {G.shape} and f {f.shape} disagree")
        if np.max(np.abs(G - G.T), initial=0.0) > 1e-12:
            raise InvariantViolation("Gram matrix must be symmetric")
        if self.provenance == "exact" and np.max(np.abs(np.diag(G) - 1.0)) > 1e-9:
            raise InvariantViolation("exact Gram matrix needs a unit diagonal")
        for a in (G, f):
            a.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "f", f)

    @property
    def N(self):
        return self.f.shape[0]


def loss_value(q, beta, inputs):
    q = np.asarray(q, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if q.shape != (inputs.N,) or beta.shape != (inputs.N,):
        raise DimensionError(f"q and beta must have length {inputs.N}")
    return float(abs(beta @ (inputs.G @ q - inputs.f)))


def observable_matrix(beta, states):
    """``M(beta) = sum_j beta_j |Psi_j><Psi_j|`` from columns of ``states``."""
    return (states * np.asarray(beta)[None, :]) @ states.conj().T


def loss_explicit(q, beta, states, rho):
    """Reference evaluation of the loss through the full observable matrix."""
    M = observable_matrix(beta, states)
    rho = np.asarray(getattr(rho, "matrix", rho))
    total = 0.0
    for i, qi in enumerate(q):
        proj = np.outer(states[:, i], states[:, i].conj())
        total += qi * np.trace(M @ (proj - rho))
    return float(abs(total))
