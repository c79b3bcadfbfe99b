"""Both kernel backends must agree; the numba side is skipped when absent."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shallowcert import kernels
from shallowcert.noise import local_depolarizing
from shallowcert.qsim import haar_unitaries

needs_numba = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not available")
seeds = st.integers(0, 2**32 - 1)


def test_poly_kernel_small_cases():
    assert kernels.poly_kernel_matrix_numpy(np.zeros((1, 3)), np.zeros((1, 3)), 4)[0, 0] == 3
    assert kernels.poly_kernel_matrix_numpy(np.ones((1, 1)), np.ones((1, 1)), 3)[0, 0] == 4


@needs_numba
@given(seeds, st.integers(0, 8))
def test_poly_kernel_backends_agree(seed, degree):
    g = np.random.default_rng(seed)
    A, B = g.random((5, 7)), g.random((3, 7))
    np.testing.assert_allclose(
        kernels.poly_kernel_matrix_numba(A, B, degree),
        kernels.poly_kernel_matrix_numpy(A, B, degree), rtol=1e-12)


@needs_numba
@given(seeds)
def test_snapshot_overlaps_backends_agree(seed):
    g = np.random.default_rng(seed)
    U = haar_unitaries(4, 20, g)
    out = g.integers(0, 4, 20)
    psi = g.standard_normal((4, 3)) + 1j * g.standard_normal((4, 3))
    np.testing.assert_allclose(
        kernels.snapshot_overlaps_numba(U, out, psi),
        kernels.snapshot_overlaps_numpy(U, out, psi), rtol=1e-12, atol=1e-14)


@needs_numba
@given(seeds)
def test_categorical_backends_agree_exactly(seed):
    g = np.random.default_rng(seed)
    p = g.dirichlet(np.ones(8), size=200)
    u = g.random(200)
    assert np.array_equal(kernels.sample_categorical_numba(p, u), kernels.sample_categorical_numpy(p, u))


def test_categorical_edge_values():
    p = np.array([[0.25, 0.25, 0.5], [0.0, 1.0, 0.0]])
    for fn in ([kernels.sample_categorical_numpy]
               + ([kernels.sample_categorical_numba] if kernels.HAVE_NUMBA else [])):
        assert list(fn(p, np.array([0.0, 0.999]))) == [0, 1]
        assert list(fn(p, np.array([0.6, 0.0]))) == [2, 1]


@needs_numba
@given(seeds, st.integers(1, 3))
def test_noisy_overlap_backends_agree(seed, depth):
    g = np.random.default_rng(seed)
    U = haar_unitaries(4, 6 * depth, g).reshape(6, depth, 4, 4)
    K = np.stack(local_depolarizing(0.3).full_kraus(2))
    np.testing.assert_allclose(
        kernels.noisy_overlap_trials_numba(U, K), kernels.noisy_overlap_trials_numpy(U, K), atol=1e-13)


def test_env_flag_selects_numpy():
    code = "from shallowcert import kernels; print(kernels.USE_NUMBA, kernels.backends())"
    env = dict(os.environ, SHALLOWCERT_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False ('numpy',)"
