import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shallowcert import noise, qsim
from shallowcert.noise import ChannelSpec, purity_lower_bound as eta

gammas = st.floats(0.0, 1.0)


def test_f_metric_examples():
    for n in (1, 2, 3):
        assert noise.channel_f_metric(noise.identity_channel(), n) == 4.0**n
        assert noise.channel_f_metric(noise.local_depolarizing(1.0), n) == pytest.approx(1.0)
        assert noise.channel_f_metric(ChannelSpec("global_depolarizing", 1.0), n) == pytest.approx(1.0)


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("g", [0.0, 0.05, 0.2, 0.7, 1.0])
def test_local_f_matches_kraus_enumeration(n, g):
    spec = noise.local_depolarizing(g)
    assert noise.channel_f_metric(spec, n) == pytest.approx((4 - 3 * g) ** n, abs=1e-9)
    assert abs(noise.f_metric_explicit(spec, n) - (4 - 3 * g) ** n) < 1e-9


@pytest.mark.parametrize("n", [1, 2])
def test_global_f_matches_kraus_enumeration(n):
    spec = ChannelSpec("global_depolarizing", 0.3)
    assert abs(noise.channel_f_metric(spec, n) - noise.f_metric_explicit(spec, n)) < 1e-9


def test_product_channel_f_is_product():
    bf = ChannelSpec("bit_flip", 0.2)
    per_qubit = noise.channel_f_metric(bf, 1)
    assert abs(noise.f_metric_explicit(bf, 3) - per_qubit**3) < 1e-9


@pytest.mark.parametrize("kind,g", [("local_depolarizing", 0.3), ("bit_flip", 0.2), ("global_depolarizing", 0.4)])
def test_apply_noise_matches_full_kraus(rng, kind, g):
    spec = ChannelSpec(kind, g)
    rho = qsim.random_density_matrix(3, rng).matrix
    ref = sum(K @ rho @ K.conj().T for K in spec.full_kraus(3))
    np.testing.assert_allclose(noise.apply_noise(rho, spec, 3), ref, atol=1e-13)


def test_channel_spec_validation():
    with pytest.raises(Exception):
        ChannelSpec("amplitude_damping", 0.1)
    with pytest.raises(Exception):
        ChannelSpec("local_depolarizing", 1.5)
    with pytest.raises(Exception):
        ChannelSpec("custom", 0.0)


# ---------------------------------------------------------------- eta

def test_eta_examples():
    for n in (1, 2, 3):
        d = 2**n
        for R in (1, 2, 7):
            assert eta(d * d, n, R) == pytest.approx(1.0, abs=1e-15)
            assert eta(1.0, n, R) == 1 / d
    assert eta(3.4, 1, 2) == pytest.approx(0.82, abs=1e-15)
    with pytest.raises(ValueError):
        eta(3.4, 1, 0)


@given(st.integers(1, 4), gammas, st.integers(1, 30))
def test_eta_monotone_and_floored(n, g, R):
    F = (4 - 3 * g) ** n
    d = 2**n
    assert eta(F, n, R + 1) <= eta(F, n, R) + 1e-15
    assert eta(F, n, R) >= 1 / d - 1e-15


def test_eta_tends_to_floor():
    assert eta(3.4, 1, 400) == pytest.approx(0.5, abs=1e-12)


def test_max_depth_examples():
    F = 3.4
    assert noise.max_depth_for_purity(F, 1, eta(F, 1, 5)) == 5
    assert noise.max_depth_for_purity(4.0, 1, 0.9) is None
    F2 = (4 - 3 * 0.05) ** 2
    R = 0
    while eta(F2, 2, R + 1) >= 0.9:
        R += 1
    assert noise.max_depth_for_purity(F2, 2, 0.9) == R == 1
    with pytest.raises(ValueError):
        noise.max_depth_for_purity(F2, 2, 0.2)
    with pytest.raises(ValueError):
        noise.max_depth_for_purity(F2, 2, 1.0)


def test_depth_constant_at_fifty_qubits():
    # per-qubit F = 4 - 3p is the channel as written; 4(1 - p) is the
    # variant that reproduces the quoted constant 46 with base-10 logs
    p = 1e-3
    assert noise.depth_log_coefficient((4 - 3 * p) ** 50, 50) == pytest.approx(26.656, abs=1e-3)
    assert noise.depth_log_coefficient((4 - 3 * p) ** 50, 50, 10) == pytest.approx(61.379, abs=1e-3)
    assert noise.depth_log_coefficient((4 * (1 - p)) ** 50, 50, 10) == pytest.approx(46.028, abs=1e-3)


# ---------------------------------------------------------------- Monte Carlo

def test_mc_identity_channel(rng):
    mean, err = noise.monte_carlo_overlap(noise.identity_channel(), 2, 3, 50, rng)
    assert mean == pytest.approx(1.0, abs=1e-12) and err < 1e-12


@pytest.mark.parametrize("kind", ["local_depolarizing", "global_depolarizing"])
def test_mc_complete_depolarizing(rng, kind):
    mean, _ = noise.monte_carlo_overlap(ChannelSpec(kind, 1.0), 2, 1, 50, rng)
    assert mean == pytest.approx(0.25, abs=1e-12)


def test_mc_matches_eta_example(rng):
    mean, err = noise.monte_carlo_overlap(noise.local_depolarizing(0.2), 1, 2, 2000, rng)
    assert abs(mean - 0.82) <= max(3 * err, 1e-12)


def test_mc_global_channel_two_qubits(rng):
    spec = ChannelSpec("global_depolarizing", 0.2)
    mean, err = noise.monte_carlo_overlap(spec, 2, 2, 2000, rng)
    assert abs(mean - eta(noise.channel_f_metric(spec, 2), 2, 2)) <= max(3 * err, 1e-12)


def test_mc_rejects_few_trials(rng):
    with pytest.raises(ValueError):
        noise.monte_carlo_overlap(noise.identity_channel(), 1, 1, 10, rng)


def test_purity_report_rows_independent_of_depth_list():
    spec = noise.local_depolarizing(0.1)
    a = noise.purity_report(spec, 2, [1, 2, 3], 40, 7)
    b = noise.purity_report(spec, 2, [3], 40, 7)
    assert a[2] == b[0]
    assert tuple(a[0]) == noise.REPORT_COLUMNS


# ---------------------------------------------------------------- other bounds

def test_pauli_path_examples():
    assert noise.pauli_path_rank_bound(0.0, 3, 4) == 4
    for n, R in [(1, 1), (2, 3), (4, 2)]:
        assert noise.pauli_path_rank_bound(1.0, n, R) == pytest.approx(0.25 ** (n * R) * R, rel=1e-15)
    assert noise.pauli_path_rank_bound(0.3, 2, 2) < noise.pauli_path_rank_bound(0.1, 2, 2)


def test_noise_threshold_examples():
    assert noise.noise_strength_threshold(1e-12) == pytest.approx(0.0, abs=1e-11)
    assert noise.noise_strength_threshold(math.log(2)) == pytest.approx(0.25, abs=1e-15)
    assert noise.noise_strength_threshold(1.0) == pytest.approx(0.31606027941427883, abs=1e-15)
    with pytest.raises(ValueError):
        noise.noise_strength_threshold(0.0)
