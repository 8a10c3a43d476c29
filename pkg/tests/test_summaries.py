"""Posterior summaries of effects and channels."""

import numpy as np
import pytest

from glass.errors import TooFewDraws
from glass.fitting import PosteriorDraws
from glass.model import Hyperparams
from glass.summaries import summarize_channels, summarize_effects


def draws_from(beta, delta=None, alpha=None, sigma=None):
    beta = np.asarray(beta, dtype=float)
    g = beta.shape[0]
    e = 2 if delta is None else np.asarray(delta).shape[1]
    return PosteriorDraws(
        beta_raw=beta,
        sigma=np.full(g, 0.5) if sigma is None else np.asarray(sigma, dtype=float),
        delta=np.ones((g, e)) if delta is None else np.asarray(delta, dtype=float),
        alpha_raw=np.ones((g, e)) if alpha is None else np.asarray(alpha, dtype=float),
        log_q=np.zeros(g),
    )


def test_requires_minimum_draws():
    with pytest.raises(TooFewDraws):
        summarize_effects(draws_from(np.zeros((10, 3))), Hyperparams())
    with pytest.raises(TooFewDraws):
        summarize_channels(draws_from(np.zeros((39, 3))))


def test_degenerate_draws_collapse_interval():
    beta = np.tile([0.4, -0.2, 0.0], (50, 1))
    s = summarize_effects(draws_from(beta), Hyperparams())
    np.testing.assert_array_equal(s.median, [0.4, -0.2, 0.0])
    np.testing.assert_array_equal(s.lower, s.upper)
    np.testing.assert_array_equal(s.prob_nonzero, [1.0, 1.0, 0.0])


def test_large_tau_zeroes_everything(rng):
    beta = rng.normal(size=(60, 4))
    s = summarize_effects(draws_from(beta), Hyperparams(tau=100.0))
    np.testing.assert_array_equal(s.median, np.zeros(4))
    np.testing.assert_array_equal(s.prob_nonzero, np.zeros(4))


def test_order_statistics_match_manual_sort():
    # 41 draws of a single coordinate: quantiles from explicit sorted order
    values = np.arange(41, dtype=float)[:, None] * 0.1 - 2.0
    rng = np.random.default_rng(0)
    shuffled = values[rng.permutation(41)]
    s = summarize_effects(draws_from(shuffled), Hyperparams())
    srt = np.sort(shuffled[:, 0])
    # linear interpolation between order statistics at p*(n-1)
    def manual_quantile(p):
        pos = p * 40
        lo = int(np.floor(pos))
        frac = pos - lo
        return srt[lo] * (1 - frac) + srt[min(lo + 1, 40)] * frac
    assert abs(s.median[0] - manual_quantile(0.5)) < 1e-12
    assert abs(s.lower[0] - manual_quantile(0.025)) < 1e-12
    assert abs(s.upper[0] - manual_quantile(0.975)) < 1e-12
    assert s.lower[0] <= s.median[0] <= s.upper[0]


def test_prob_nonzero_counts_exact_zeros():
    g = 50
    beta = np.zeros((g, 2))
    beta[:20, 0] = 1.0  # 40% nonzero at coordinate 0
    s = summarize_effects(draws_from(beta), Hyperparams(tau=0.0))
    np.testing.assert_allclose(s.prob_nonzero, [0.4, 0.0])


def test_prob_nonzero_monotone_in_tau(rng):
    beta = rng.normal(size=(200, 5))
    draws = draws_from(beta)
    probs = [summarize_effects(draws, Hyperparams(tau=t)).prob_nonzero
             for t in (0.0, 0.3, 0.8, 1.5)]
    for a, b in zip(probs, probs[1:]):
        assert (b <= a + 1e-12).all()


def test_channel_selection_probabilities(rng):
    g = 100
    delta = np.zeros((g, 3))
    delta[:, 0] = 1.0
    delta[:50, 1] = 1.0
    s = summarize_channels(draws_from(np.zeros((g, 2)), delta=delta,
                                      alpha=rng.normal(size=(g, 3))))
    np.testing.assert_allclose(s.selection_prob, [1.0, 0.5, 0.0])
    np.testing.assert_array_equal(s.important, [True, False, False])


def test_channel_weight_concentrated(rng):
    g = 60
    alpha = np.zeros((g, 3))
    alpha[:, 0] = 5.0 + 0.01 * rng.normal(size=g)
    s = summarize_channels(draws_from(np.zeros((g, 2)), delta=np.ones((g, 3)),
                                      alpha=alpha))
    np.testing.assert_allclose(s.weight, [1.0, 0.0, 0.0], atol=1e-3)
    assert abs(np.linalg.norm(s.weight) - 1.0) < 1e-10


def test_channel_weight_scale_invariant(rng):
    g = 80
    alpha = rng.normal(size=(g, 4)) + 0.5
    a = summarize_channels(draws_from(np.zeros((g, 2)), delta=np.ones((g, 4)), alpha=alpha))
    b = summarize_channels(draws_from(np.zeros((g, 2)), delta=np.ones((g, 4)),
                                      alpha=37.5 * alpha))
    np.testing.assert_allclose(a.weight, b.weight, atol=1e-12)


def test_quantile_convergence_with_draws(rng):
    # doubling G moves the median by less than the spread / sqrt(G)
    base = rng.standard_normal(4000)[:, None] * 0.7 + 0.2
    small = summarize_effects(draws_from(base[:2000]), Hyperparams())
    big = summarize_effects(draws_from(base), Hyperparams())
    assert abs(small.median[0] - big.median[0]) < 0.7 / np.sqrt(2000) * 4
