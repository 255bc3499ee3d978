import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from measure_filter.dual import (
    DwDualParams,
    FvDualParams,
    InstabilityError,
    block_coeff,
    block_coeff_raw,
    dw_death_prob,
    dw_s_decay,
    dw_sstar,
    fv_death_prob,
    fv_kernel_matrix,
    lambda_rate,
    sample_lineage_count,
)
from measure_filter.lattice import down_set, down_set_array, mv
from measure_filter.oracles import (
    level_probs_expm,
    lineage_pmf_expm,
    rk4_s,
)

FV1 = FvDualParams(1.0)


def test_lambda_examples():
    assert lambda_rate(0, 1.0) == 0
    assert lambda_rate(3, 1.0) == 4.5
    assert lambda_rate(3, 2.0) == 6


@pytest.mark.parametrize("t", [0.0, 0.1, 1.0, 7.0])
def test_block_coeff_examples(t):
    assert block_coeff(1, 1, t, FV1) == pytest.approx(1 - math.exp(-0.5 * t), abs=1e-15)
    assert block_coeff(2, 1, t, FV1) == pytest.approx(
        4 / 3 * (math.exp(-0.5 * t) - math.exp(-2 * t)), abs=1e-15)


def test_no_deaths_in_zero_time():
    for total in range(1, 8):
        for dead in range(1, total + 1):
            assert block_coeff(total, dead, 0.0, FV1) == 0.0


def test_fv_death_prob_examples():
    t = 0.7
    assert fv_death_prob(mv(1), mv(1), t, FV1) == pytest.approx(math.exp(-0.5 * t), rel=1e-14)
    assert fv_death_prob(mv(1), mv(0), t, FV1) == pytest.approx(1 - math.exp(-0.5 * t), rel=1e-14)
    assert fv_death_prob(mv(2, 1), mv(2, 1), 0.2, FV1) == pytest.approx(math.exp(-0.9), rel=1e-14)


@pytest.mark.parametrize("theta", [0.5, 1.0, 3.0])
@pytest.mark.parametrize("t", [0.01, 0.1, 1.0, 10.0])
def test_levels_match_matrix_exponential(theta, t):
    for total in (1, 5, 12):
        got = np.array([block_coeff(total, k, t, FvDualParams(theta)) for k in range(total + 1)])
        assert np.abs(got - level_probs_expm(total, t, theta)).max() < 1e-8


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=3),
       st.floats(0.01, 5.0), st.sampled_from([0.5, 1.0, 3.0]))
def test_fv_rows_normalised(counts, t, theta):
    m = mv(*counts)
    total = sum(fv_death_prob(m, n, t, FvDualParams(theta)) for n in down_set(m))
    assert abs(total - 1) < 1e-10


def test_chapman_kolmogorov():
    states = down_set_array(np.array([3, 2, 2]))
    P = lambda t: fv_kernel_matrix(states, t, FvDualParams(0.8))  # noqa: E731
    assert np.abs(P(0.3) @ P(0.5) - P(0.8)).max() < 1e-8


def test_sigma_is_time_scaling():
    a = fv_death_prob(mv(3, 1), mv(1, 1), 0.4, FvDualParams(1.5, sigma_speed=2.5))
    b = fv_death_prob(mv(3, 1), mv(1, 1), 1.0, FvDualParams(1.5))
    assert a == pytest.approx(b, rel=1e-13)


@pytest.mark.parametrize("t", [1e-3, 1e-2])
def test_extended_precision_at_forty(t):
    raw = [block_coeff_raw(40, k, t, 1.0, precision="extended") for k in range(41)]
    assert min(raw) >= -1e-9
    assert abs(sum(raw) - 1) < 1e-12
    levels = [block_coeff(40, k, t, FV1) for k in range(41)]
    assert min(levels) >= 0 and abs(sum(levels) - 1) < 1e-12


def test_double_precision_path_detects_cancellation():
    # the double sum is meaningless here; forcing it must not silently pass
    with pytest.raises(InstabilityError):
        for k in range(41):
            block_coeff(40, k, 1e-3, FV1, precision="double")


def test_lineage_sampler_matches_expm():
    rng = np.random.default_rng(11)
    t, theta, n = 0.5, 1.0, 100_000
    draws = sample_lineage_count(t, FvDualParams(theta), rng, size=n)
    pmf = lineage_pmf_expm(t, theta, 1600)
    for k in range(1, 8):
        p = pmf[k]
        freq = np.mean(draws == k)
        assert abs(freq - p) < 3 * math.sqrt(p * (1 - p) / n) + 1e-4


def test_lineage_large_t_absorbs():
    rng = np.random.default_rng(2)
    assert np.all(sample_lineage_count(200.0, FV1, rng, size=1000) == 0)


def test_lineage_is_seed_deterministic():
    a = sample_lineage_count(0.3, FV1, np.random.default_rng(5), size=50)
    b = sample_lineage_count(0.3, FV1, np.random.default_rng(5), size=50)
    assert np.array_equal(a, b)


def test_s_decay_examples():
    params = DwDualParams(1.0, 1.0)
    state, p = dw_s_decay(3.0, 0.0, params)
    assert state.s == 3.0 and p == 1.0
    state, p = dw_s_decay(1.0, 2 * math.log(2), params)
    assert state.s == pytest.approx(1 / 3, rel=1e-14)
    assert p == pytest.approx(1 / 3, rel=1e-14)
    assert dw_s_decay(5.0, 500.0, params)[0].s < 1e-100
    assert dw_sstar(2 * math.log(2), params) == pytest.approx(1.0, rel=1e-14)
    assert dw_sstar(1e-9, params) > 1e8
    with pytest.raises(ValueError):
        dw_sstar(0.0, params)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.0, 20.0))
def test_s_decay_vs_rk4(beta, s0):
    path = rk4_s(s0, beta, 10.0, 20000)
    params = DwDualParams(1.0, beta)
    for k in range(0, 20001, 1000):
        assert abs(dw_s_decay(s0, k * 5e-4, params)[0].s - path[k]) < 1e-8


@given(st.floats(0.1, 5.0), st.floats(0.0, 20.0), st.floats(0, 4), st.floats(0, 4))
def test_s_decay_semigroup(beta, s0, t, u):
    params = DwDualParams(1.0, beta)
    mid = dw_s_decay(s0, t, params)[0].s
    assert abs(dw_s_decay(mid, u, params)[0].s - dw_s_decay(s0, t + u, params)[0].s) < 1e-10


def test_dw_death_prob_examples():
    params = DwDualParams(1.0, 1.0)
    t = 2 * math.log(2)  # p = 1/3 from s0 = 1
    assert dw_death_prob(mv(2, 1), mv(1, 1), t, 1.0, params) == pytest.approx(4 / 27, rel=1e-14)
    assert dw_death_prob(mv(2, 1), mv(2, 1), 0.0, 1.0, params) == 1.0
    assert dw_death_prob(mv(2, 1), mv(1, 1), 0.0, 1.0, params) == 0.0
    assert dw_death_prob(mv(2, 1), mv(), 0.5, 0.0, params) == 1.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=4),
       st.floats(0.01, 5.0), st.floats(0.01, 10.0), st.floats(0.1, 5.0))
def test_dw_rows_are_products_of_binomials(counts, t, s0, beta):
    m = mv(*counts)
    params = DwDualParams(1.0, beta)
    _, p = dw_s_decay(s0, t, params)
    total = 0.0
    for n in down_set(m):
        got = dw_death_prob(m, n, t, s0, params)
        want = math.prod(math.comb(c, n[j]) * p ** n[j] * (1 - p) ** (c - n[j])
                         for j, c in m.items)
        assert abs(got - want) < 1e-12
        total += got
    assert abs(total - 1) < 1e-10


def test_paper_literal_convention_reverses_levels():
    params = DwDualParams(1.0, 1.0)
    t = 2 * math.log(2)
    a = dw_death_prob(mv(2, 1), mv(1, 1), t, 1.0, params, convention="paper_literal")
    b = dw_death_prob(mv(2, 1), mv(1), t, 1.0, params)
    # paper_literal evaluates the binomial at the dead count
    assert a == pytest.approx(math.comb(3, 1) * (1 / 3) * (2 / 3) ** 2 * 2 / 3, rel=1e-13)
    assert b > 0


def test_limits_go_to_origin():
    m = mv(3, 2)
    assert fv_death_prob(m, mv(), 50 / lambda_rate(1, 1.0), FV1) > 1 - 1e-6
    assert dw_death_prob(m, mv(), 50.0, 2.0, DwDualParams(1.0, 1.0)) > 1 - 1e-6
