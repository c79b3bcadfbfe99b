"""Hot numeric kernels with a numba path and a pure-numpy path.

Every kernel exists twice: ``<name>_numpy`` (vectorised numpy, always
available) and ``<name>_numba`` (``@njit`` loops, present when numba imports).
The public name is bound to the numba version unless numba is missing or the
environment variable ``SHALLOWCERT_DISABLE_NUMBA`` is set to a non-empty value
other than ``0``.  Both paths agree to floating-point round-off; the
categorical sampler agrees bit for bit.
"""
import os

import numpy as np

_disabled = os.environ.get("SHALLOWCERT_DISABLE_NUMBA", "") not in ("", "0")

try:
    if _disabled:
        raise ImportError("numba disabled by SHALLOWCERT_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA


# --------------------------------------------------------------------------
# numpy reference implementations
# --------------------------------------------------------------------------

def poly_kernel_matrix_numpy(A, B, degree):
    """Additive polynomial kernel ``sum_i sum_{l=0..degree} (a_i b_i)^l``.

    ``A`` is (N, D), ``B`` is (M, D); returns (N, M).  ``0**0`` counts as 1.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    out = np.empty((A.shape[0], B.shape[0]))
    # chunk over rows of A to bound the (rows, M, D) temporary
    step = max(1, int(2**22 // max(1, B.shape[0] * A.shape[1])))
    for s in range(0, A.shape[0], step):
        x = A[s:s + step, None, :] * B[None, :, :]
        acc = np.ones_like(x)
        p = np.ones_like(x)
        for _ in range(degree):
            p = p * x
            acc += p
        out[s:s + step] = acc.sum(axis=2)
    return out


def snapshot_overlaps_numpy(U, outcomes, states):
    """``|<b_k| U_k |psi_j>|**2`` for snapshots k and columns j of ``states``."""
    rows = U[np.arange(U.shape[0]), outcomes, :]
    amp = rows @ states
    return amp.real**2 + amp.imag**2


def sample_categorical_numpy(probs, u):
    """Inverse-CDF draw per row of ``probs`` (unnormalised is fine)."""
    cum = np.cumsum(probs, axis=1)
    thresh = u * cum[:, -1]
    # first index whose cumulative mass exceeds the threshold, so
    # zero-probability outcomes are never drawn
    idx = (cum <= thresh[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1).astype(np.int64)


def noisy_overlap_trials_numpy(U, kraus):
    """Overlap of noisy and noiseless trajectories from ``|0><0|``.

    ``U`` has shape (trials, depth, d, d); each layer applies ``U[t, r]`` to
    both trajectories and the Kraus channel ``kraus`` (r, d, d) to the noisy
    one.  Returns ``<psi_T| rho_T |psi_T>`` per trial.
    """
    T, depth, d, _ = U.shape
    rho = np.zeros((T, d, d), dtype=np.complex128)
    rho[:, 0, 0] = 1.0
    psi = np.zeros((T, d), dtype=np.complex128)
    psi[:, 0] = 1.0
    kh = np.conj(np.transpose(kraus, (0, 2, 1)))
    for r in range(depth):
        Ur = U[:, r]
        rho = Ur @ rho @ np.conj(np.transpose(Ur, (0, 2, 1)))
        acc = np.zeros_like(rho)
        for k in range(kraus.shape[0]):
            acc += kraus[k] @ rho @ kh[k]
        rho = acc
        psi = np.einsum("tab,tb->ta", Ur, psi)
    val = np.einsum("ta,tab,tb->t", np.conj(psi), rho, psi)
    return val.real


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def poly_kernel_matrix_numba(A, B, degree):
        N, D = A.shape
        M = B.shape[0]
        out = np.empty((N, M))
        for a in range(N):
            for b in range(M):
                s = 0.0
                for i in range(D):
                    x = A[a, i] * B[b, i]
                    p = 1.0
                    acc = 1.0
                    for _ in range(degree):
                        p *= x
                        acc += p
                    s += acc
                out[a, b] = s
        return out

    @njit(cache=True)
    def snapshot_overlaps_numba(U, outcomes, states):
        M = U.shape[0]
        d, N = states.shape
        out = np.empty((M, N))
        for k in range(M):
            b = outcomes[k]
            for j in range(N):
                amp = 0.0 + 0.0j
                for a in range(d):
                    amp += U[k, b, a] * states[a, j]
                out[k, j] = amp.real * amp.real + amp.imag * amp.imag
        return out

    @njit(cache=True)
    def sample_categorical_numba(probs, u):
        M, d = probs.shape
        out = np.empty(M, dtype=np.int64)
        cum = np.empty(d)
        for k in range(M):
            s = 0.0
            for j in range(d):
                s += probs[k, j]
                cum[j] = s
            thresh = u[k] * cum[d - 1]
            idx = 0
            for j in range(d):
                if cum[j] <= thresh:
                    idx += 1
            out[k] = min(idx, d - 1)
        return out

    @njit(cache=True)
    def _conj_sandwich(K, rho, out, d):
        # out += K rho K^dagger
        tmp = np.zeros((d, d), dtype=np.complex128)
        for a in range(d):
            for c in range(d):
                s = 0.0 + 0.0j
                for b in range(d):
                    s += K[a, b] * rho[b, c]
                tmp[a, c] = s
        for a in range(d):
            for e in range(d):
                s = 0.0 + 0.0j
                for c in range(d):
                    s += tmp[a, c] * np.conj(K[e, c])
                out[a, e] += s

    @njit(cache=True)
    def noisy_overlap_trials_numba(U, kraus):
        T, depth, d, _ = U.shape
        out = np.empty(T)
        for t in range(T):
            rho = np.zeros((d, d), dtype=np.complex128)
            rho[0, 0] = 1.0
            psi = np.zeros(d, dtype=np.complex128)
            psi[0] = 1.0
            for r in range(depth):
                Ur = U[t, r]
                conj_rho = np.zeros((d, d), dtype=np.complex128)
                _conj_sandwich(Ur, rho, conj_rho, d)
                acc = np.zeros((d, d), dtype=np.complex128)
                for k in range(kraus.shape[0]):
                    _conj_sandwich(kraus[k], conj_rho, acc, d)
                rho = acc
                new = np.zeros(d, dtype=np.complex128)
                for a in range(d):
                    s = 0.0 + 0.0j
                    for b in range(d):
                        s += Ur[a, b] * psi[b]
                    new[a] = s
                psi = new
            v = 0.0 + 0.0j
            for a in range(d):
                for b in range(d):
                    v += np.conj(psi[a]) * rho[a, b] * psi[b]
            out[t] = v.real
        return out


def _pick(name):
    if USE_NUMBA:
        return globals()[name + "_numba"]
    return globals()[name + "_numpy"]


def poly_kernel_matrix(A, B, degree):
    return _pick("poly_kernel_matrix")(
        np.ascontiguousarray(A, dtype=np.float64),
        np.ascontiguousarray(B, dtype=np.float64),
        int(degree),
    )


def snapshot_overlaps(U, outcomes, states):
    return _pick("snapshot_overlaps")(
        np.ascontiguousarray(U, dtype=np.complex128),
        np.ascontiguousarray(outcomes, dtype=np.int64),
        np.ascontiguousarray(states, dtype=np.complex128),
    )


def sample_categorical(probs, u):
    return _pick("sample_categorical")(
        np.ascontiguousarray(probs, dtype=np.float64),
        np.ascontiguousarray(u, dtype=np.float64),
    )


def noisy_overlap_trials(U, kraus):
    return _pick("noisy_overlap_trials")(
        np.ascontiguousarray(U, dtype=np.complex128),
        np.ascontiguousarray(kraus, dtype=np.complex128),
    )


def backends():
    """Names of the kernel backends available in this process."""
    return ("numpy", "numba") if HAVE_NUMBA else ("numpy",)
