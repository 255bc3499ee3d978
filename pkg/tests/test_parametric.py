import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from measure_filter.parametric import (
    DirichletMixture,
    GammaMixture,
    cir_filter,
    cir_predict,
    cir_update,
    multi_cir_predict,
    multi_cir_product_predict,
    wf_filter,
    wf_predict,
    wf_update,
)


def test_wf_update_dirichlet_multinomial():
    mix = DirichletMixture([1.0, 2.0], [[0, 0], [3, 0]], [0.5, 0.5])
    out, inc = wf_update(mix, [1, 1])
    # ordered-sample marginal: prod (a_j)_{n_j} / (a0)_{n}
    m0 = (1 * 2) / (3 * 4)
    m1 = (4 * 2) / (6 * 7)
    assert inc == pytest.approx(math.log(0.5 * m0 + 0.5 * m1), abs=1e-14)
    assert out.components[(1, 1)] == pytest.approx(m0 / (m0 + m1), abs=1e-14)


def test_wf_empty_update_and_zero_time():
    mix = DirichletMixture.prior([1.0, 1.0, 1.0])
    assert wf_update(mix, [0, 0, 0]) == (mix, 0.0)
    assert wf_predict(mix, 0.0) is mix


def test_wf_predict_single_count():
    mix = DirichletMixture([0.5, 0.5], [[1, 0]], [1.0])
    out = wf_predict(mix, 2.0)
    assert out.components[(1, 0)] == pytest.approx(math.exp(-1.0), abs=1e-15)


def test_dirichlet_moments():
    mix = DirichletMixture([1.0, 2.0, 3.0], [[1, 0, 0]], [1.0])
    a = np.array([2.0, 2.0, 3.0])
    assert np.allclose(mix.mean(), a / 7)
    assert np.allclose(mix.variance(), a * (7 - a) / (49 * 8))


def test_cir_update_conjugacy():
    prior = GammaMixture.prior([2.0], 1.5)
    out, inc = cir_update(prior, 3, 7)
    assert out.components == {(7,): 1.0} and out.s == 3.0
    # Poisson-gamma marginal without the prod y_i! factor
    want = math.lgamma(9) - math.lgamma(2) + 2 * math.log(1.5) - 9 * math.log(4.5)
    assert inc == pytest.approx(want, abs=1e-12)
    assert cir_update(prior, 0, 0) == (prior, 0.0)


def test_cir_predict_identity_and_limit():
    mix = GammaMixture([2.0], 1.0, 3.0, [[5]], [1.0])
    assert cir_predict(mix, 0.0) is mix
    far = cir_predict(mix, 100.0)
    assert far.components[(0,)] > 1 - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=4), st.floats(0.01, 5.0),
       st.floats(0.01, 10.0), st.floats(0.2, 5.0))
def test_multi_cir_matches_product(counts, t, s0, beta):
    K = len(counts)
    mix = GammaMixture(np.full(K, 0.7), beta, s0, [counts], [1.0])
    a = multi_cir_predict(mix, t).components
    b = multi_cir_product_predict(mix, t).components
    for k in set(a) | set(b):
        assert abs(a.get(k, 0) - b.get(k, 0)) < 1e-12


def test_cir_predict_preserves_conditional_mean():
    # E[z_t | z ~ Ga(a+m, b+s)] = (a/beta)(1-e^{-beta t/2}) + E[z] e^{-beta t/2}
    alpha, beta, s, m, t = 2.0, 1.3, 2.0, 6, 0.7
    mix = GammaMixture([alpha], beta, s, [[m]], [1.0])
    out = cir_predict(mix, t)
    decay = math.exp(-beta * t / 2)
    want = alpha / beta * (1 - decay) + (alpha + m) / (beta + s) * decay
    assert out.mean()[0] == pytest.approx(want, rel=1e-12)


def test_cir_filter_single_batch_then_silence():
    batches = [(0.0, [4, 6, 5])] + [(float(t), []) for t in range(1, 60)]
    recs = cir_filter(GammaMixture.prior([2.0], 1.0), batches)
    full = [r.extra["weight_fullinfo"] for r in recs]
    assert full[0] == 1.0
    assert all(b < a for a, b in zip(full, full[1:]))
    assert recs[-1].extra["weight_prior"] > 0.99


def test_cir_posterior_moments_against_gamma():
    [rec] = cir_filter(GammaMixture.prior([2.0], 1.0), [(0.0, [3, 4])])
    post = stats.gamma(9.0, scale=1 / 3.0)
    assert rec.extra["mean"][0] == pytest.approx(post.mean(), rel=1e-14)
    assert rec.extra["variance"][0] == pytest.approx(post.var(), rel=1e-12)


def test_wf_filter_prunes():
    batches = [(float(j), [6, 3, 1]) for j in range(6)]
    recs = wf_filter(DirichletMixture.prior([1.0, 1.0, 1.0]), batches, prune_eps=1e-6)
    for r in recs:
        assert np.all(r.state.weights >= 1e-6 * 0.99) or r.n_after_prune == 1
        assert abs(r.state.weights.sum() - 1) < 1e-12
    assert recs[-1].pruned_mass < 1e-3


def test_mixture_validation():
    with pytest.raises(ValueError):
        DirichletMixture([1.0, -1.0], [[0, 0]], [1.0])
    with pytest.raises(ValueError):
        GammaMixture([1.0], 1.0, -0.5, [[0]], [1.0])
    with pytest.raises(ValueError):
        DirichletMixture([1.0, 1.0], [[0, 0], [1, 0]], [0.3, 0.3])
