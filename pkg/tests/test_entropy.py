import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shallowcert import entropy, qsim
from shallowcert.entropy import BellRunConfig, entropy_poly, estimate_entropy, trace_power_swap
from shallowcert.errors import CapExceeded

EXACT = BellRunConfig(mode="exact")
BOUND = 2 * 0.05 * math.sqrt(math.log(4))


def diag(*p):
    return qsim.density_from_array(np.diag(p))


def binary_entropy(p):
    return -p * math.log(p) - (1 - p) * math.log(1 - p)


# ---------------------------------------------------------------- polynomial

def test_taylor_coefficients_match_derivatives():
    # s(x) = -x ln x at 1/2: s = ln2/2, s' = ln2 - 1, s'' = -2, s''' = 4
    t = entropy.taylor_coefficients(3)
    np.testing.assert_allclose(t, [math.log(2) / 2, math.log(2) - 1, -1.0, 4 / 6], atol=1e-15)


def test_monomial_form_equals_shifted_form(rng):
    d = 12
    t = entropy.taylor_coefficients(d)
    m = entropy.monomial_coefficients(d)
    x = rng.random(20)
    shifted = sum(tk * (x - 0.5) ** k for k, tk in enumerate(t))
    np.testing.assert_allclose(np.polyval(m[::-1], x), shifted, atol=1e-9)


def test_poly_endpoints_within_bound():
    P = entropy_poly(0.25, 0.05)
    assert P.bound == pytest.approx(BOUND, abs=1e-15)
    assert abs(P(1.0) - 0.0) <= P.bound
    assert abs(P(0.5) - math.log(2) / 2) <= P.bound
    assert P(0.0) == 0.0


def test_poly_grid_error_within_bound():
    P = entropy_poly(0.25, 0.05)
    x = np.linspace(0.25, 1.0, 1000)
    err = np.max(np.abs(P(x) - entropy._s(x)))
    assert err <= P.bound and err == pytest.approx(P.max_error, abs=1e-15)
    for v in (0.25, 0.5, 0.75, 1.0):
        assert abs(P(v) - entropy._s(v)) <= P.bound


def test_degree_for_default_knobs():
    P = entropy_poly(0.25, 0.05)
    assert P.degree == 18
    assert P.dropped_constant == pytest.approx(0.027778, abs=1e-5)


@given(st.floats(0.05, 0.25), st.floats(0.01, 0.25))
def test_poly_self_check_holds(eta, eps):
    try:
        P = entropy_poly(eta, eps)
    except ValueError:
        return  # degree cap reached; the error names the bound
    assert P.max_error <= P.bound


def test_poly_arguments():
    for eta, eps in ((0.0, 0.1), (0.3, 0.1), (0.1, 0.0), (0.1, 0.3)):
        with pytest.raises(ValueError):
            entropy_poly(eta, eps)
    with pytest.raises(ValueError):
        entropy_poly(0.01, 0.01, max_degree=5)


# ---------------------------------------------------------------- trace powers

@pytest.mark.parametrize("l", [1, 2, 3, 4])
def test_pure_state_trace_power_is_one(l, rng):
    z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    psi = qsim.StateVector(2, z / np.linalg.norm(z))
    assert trace_power_swap(psi.density(), BellRunConfig(l=l)).estimate == pytest.approx(1.0, abs=1e-9)


def test_maximally_mixed_qubit_cube():
    r = trace_power_swap(qsim.maximally_mixed(1), BellRunConfig(l=3))
    assert r.estimate == pytest.approx(0.25, abs=1e-15) and r.stderr == 0 and r.engine == "dense"


def test_sampled_second_moment(rng):
    r = trace_power_swap(diag(0.25, 0.75), BellRunConfig(l=2, shots=10_000, mode="sampled"), rng)
    assert abs(r.estimate - 0.625) <= 3 * r.stderr and r.shots == 10_000


def test_hadamard_test_matches_spectral_oracle_on_sweep():
    g = np.random.default_rng(8)
    worst = 0.0
    for _ in range(50):
        rho = qsim.random_density_matrix(int(g.integers(1, 3)), g)
        for l in range(1, 5):
            worst = max(worst, abs(trace_power_swap(rho, BellRunConfig(l=l)).estimate - qsim.trace_power_exact(rho, l)))
    assert worst <= 1e-9


def test_ancilla_state_is_a_density_matrix(rng):
    anc = entropy.hadamard_test_ancilla(qsim.random_density_matrix(1, rng), 3)
    assert abs(np.trace(anc) - 1) < 1e-12
    np.testing.assert_allclose(anc, anc.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(anc).min() > -1e-12


def test_shift_index_is_a_cyclic_permutation():
    idx = entropy._shift_inverse_index(1, 3)
    # S|x1 x2 x3> = |x2 x3 x1>, so S^-1 sends |x1 x2 x3> to |x3 x1 x2>
    assert idx[0b011] == 0b101 and idx[0b100] == 0b010
    assert sorted(idx) == list(range(8))


def test_ring_engine_beyond_cap(monkeypatch, rng):
    monkeypatch.setenv("SHALLOWCERT_MAX_DIM", "64")
    rho = qsim.random_density_matrix(2, rng)
    r = trace_power_swap(rho, BellRunConfig(l=4))
    assert r.engine == "ring" and r.estimate == pytest.approx(qsim.trace_power_exact(rho, 4), abs=1e-12)
    t = trace_power_swap(rho, BellRunConfig(l=4, over_cap="truncate"))
    assert t.engine == "truncated"
    with pytest.raises(CapExceeded):
        trace_power_swap(rho, BellRunConfig(l=4, method="parity"))


def test_sampled_stderr_scales_inverse_sqrt():
    rho = diag(0.3, 0.7)
    errs = {}
    for shots in (1000, 4000):
        runs = [trace_power_swap(rho, BellRunConfig(l=2, shots=shots, mode="sampled"), np.random.default_rng(s))
                for s in range(20)]
        errs[shots] = np.mean([r.stderr for r in runs])
    assert 1.5 <= errs[1000] / errs[4000] <= 2.5


def test_bell_config_validation():
    for kw in ({"l": 0}, {"mode": "noisy"}, {"method": "swap"}, {"over_cap": "skip"}):
        with pytest.raises(ValueError):
            BellRunConfig(**kw)


def test_default_shots():
    assert entropy.default_shots(1) == 100
    assert entropy.default_shots(2) == math.ceil(4 * math.log(2) ** 2) * 100 == 200


# ---------------------------------------------------------------- parity circuit

def test_parity_circuit_pure_qubit_finding():
    # |0>|0> -> CNOT -> |00> -> H on the second copy -> |0>|+>: s is a fair coin,
    # so neither convention gives Tr(rho^2) = 1
    r = trace_power_swap(qsim.basis_state(1).density(), BellRunConfig(l=2, method="parity"))
    assert r.estimate == pytest.approx(0.0, abs=1e-15)  # E[(-1)^s]
    assert r.alt_estimate == pytest.approx(0.5, abs=1e-15)  # E[s]


def test_parity_distribution_normalised(rng):
    p = entropy.parity_distribution(qsim.random_density_matrix(1, rng), 3)
    assert p.shape == (8,) and abs(p.sum() - 1) < 1e-12 and p.min() >= 0


def test_parity_sampled_tracks_its_exact_expectation(rng):
    rho = qsim.random_density_matrix(1, rng)
    ex = trace_power_swap(rho, BellRunConfig(l=2, method="parity"))
    sm = trace_power_swap(rho, BellRunConfig(l=2, method="parity", mode="sampled", shots=20_000), rng)
    assert abs(sm.estimate - ex.estimate) <= 3 * sm.stderr + 1e-12


# ---------------------------------------------------------------- entropy

def test_pure_state_entropy(rng):
    z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    r = estimate_entropy(qsim.StateVector(2, z / np.linalg.norm(z)).density(), 0.25, 0.05, EXACT)
    assert abs(r.S_hat) <= 0.05 and not r.truncated and r.stderr == 0


def test_maximally_mixed_edge():
    # every eigenvalue sits exactly at eta = 1/4
    r = estimate_entropy(qsim.maximally_mixed(2), 0.25, 0.05, EXACT)
    assert abs(r.S_hat - 2 * math.log(2)) <= r.poly.bound


@pytest.mark.parametrize("p", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
def test_binary_entropy_curve(p):
    r = estimate_entropy(diag(p, 1 - p), 0.25, 0.05, EXACT)
    assert abs(r.S_hat - binary_entropy(p)) <= r.poly.bound + 3 * r.stderr


def test_sampled_entropy_within_statistical_error():
    r = estimate_entropy(diag(0.4, 0.6), 0.25, 0.05, BellRunConfig(shots=10_000, mode="sampled"),
                         np.random.default_rng(3))
    # the large monomial coefficients inflate the variance
    assert r.stderr > 1.0
    assert abs(r.S_hat - binary_entropy(0.4)) <= r.poly.bound + 3 * r.stderr


def test_entropy_truncation_flag(monkeypatch):
    monkeypatch.setenv("SHALLOWCERT_MAX_DIM", "16")
    r = estimate_entropy(qsim.maximally_mixed(2), 0.25, 0.05, BellRunConfig(over_cap="truncate"))
    assert r.truncated and len(r.traces) < r.poly.degree
    assert r.summary()["truncated"] is True


def test_entropy_deterministic():
    cfg = BellRunConfig(shots=500, mode="sampled")
    a = estimate_entropy(diag(0.3, 0.7), 0.25, 0.05, cfg, np.random.default_rng(4))
    b = estimate_entropy(diag(0.3, 0.7), 0.25, 0.05, cfg, np.random.default_rng(4))
    assert a.S_hat == b.S_hat and a.stderr == b.stderr


# ---------------------------------------------------------------- screen

def test_screen_examples():
    assert entropy.relative_entropy_screen(3 * math.log(2), 3)
    assert not entropy.relative_entropy_screen(0.0, 3)
    assert entropy.relative_entropy_to_uniform(2 * math.log(2) - 0.1, 2) == pytest.approx(0.1, abs=1e-15)
    assert entropy.relative_entropy_screen(2 * math.log(2) - 0.1, 2, 0.5)
    assert not entropy.relative_entropy_screen(2 * math.log(2) - 0.6, 2)
    with pytest.raises(ValueError):
        entropy.relative_entropy_screen(0.0, 2, 0.0)
