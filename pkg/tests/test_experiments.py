"""Study protocol helpers: subsetting, prediction plumbing, batched design."""

import numpy as np
import pytest

from glass.design import batched_log_odds, batched_log_softmax_pick, pack_design
from glass.errors import MissingLabel
from glass.experiments import (
    PredictionProtocol,
    keep_first_sequences,
    predict_characters,
    truth_symbols,
)
from glass.fitting import PosteriorDraws
from glass.model import COLUMN, ROW, Dataset, Hyperparams, ModelParams, target_probabilities
from glass.prediction import Keyboard
from glass.simulate import GroundTruth, default_erp_templates, simulate_generative
from conftest import make_dataset, make_half


def test_keep_first_sequences(rng):
    halves = []
    for c in (1, 2):
        for s in (1, 2, 3, 4):
            halves.append(make_half(rng, key=(c, s, ROW), target=1))
    data = Dataset(half_sequences=tuple(halves))
    out = keep_first_sequences(data, 2)
    assert len(out) == 4
    assert all(h.sequence <= 2 for h in out.half_sequences)


def test_truth_symbols_uses_keyboard():
    truth = GroundTruth(theta_true=None, tau_true=0.0,
                        target_cells=((1, 1), (4, 3), (6, 6)), seed=0)
    assert truth_symbols(truth) == ["A", "U", "_"]


def test_pack_design_layout(rng):
    data = make_dataset(rng, n_half=3, n_channels=2, n_times=4)
    design = pack_design(data, require_labels=True)
    assert design.x.shape == (18, 8)
    for i, half in enumerate(data.half_sequences):
        stack = half.signal_stack().reshape(6, 8)
        np.testing.assert_array_equal(design.x[6 * i:6 * (i + 1)], stack)
        assert design.targets[i] == half.target - 1


def test_pack_design_requires_labels(rng):
    data = make_dataset(rng, labeled=False)
    with pytest.raises(MissingLabel):
        pack_design(data, require_labels=True)


def test_batched_log_odds_match_single_theta(rng):
    data = make_dataset(rng, n_half=4, n_channels=3, n_times=5)
    design = pack_design(data, require_labels=True)
    hyper = Hyperparams(tau=0.2)
    thetas = [
        ModelParams(beta_raw=rng.normal(size=5), sigma=0.5,
                    delta=rng.integers(0, 2, size=3).astype(float),
                    alpha_raw=rng.normal(size=3))
        for _ in range(3)
    ]
    beta_tilde = np.stack([t.beta_tilde(hyper.tau) for t in thetas])
    weights = np.stack([t.latent_weights() for t in thetas])
    eta = batched_log_odds(design, beta_tilde, weights)
    probs_exp = np.exp(eta - eta.max(axis=1, keepdims=True))
    probs = probs_exp / probs_exp.sum(axis=1, keepdims=True)
    for g, theta in enumerate(thetas):
        for i, half in enumerate(data.half_sequences):
            np.testing.assert_allclose(probs[i, :, g],
                                       target_probabilities(half, theta, hyper),
                                       atol=1e-12)


def test_batched_log_softmax_pick_matches_direct(rng):
    eta = rng.normal(size=(5, 6, 2))
    targets = rng.integers(0, 6, size=5)
    loglik, resid = batched_log_softmax_pick(eta.copy(), targets)
    for l in range(2):
        direct = 0.0
        for i in range(5):
            p = np.exp(eta[i, :, l] - eta[i, :, l].max())
            p /= p.sum()
            direct += np.log(p[targets[i]])
            np.testing.assert_allclose(resid[i, :, l],
                                       (np.arange(6) == targets[i]) - p, atol=1e-12)
        assert abs(loglik[l] - direct) < 1e-10


def test_predict_characters_decodes_toy(rng):
    # high-SNR generative data with a model that matches the generating
    # pattern decodes the simulated targets at the largest sequence count
    protocol = PredictionProtocol(n_characters=4, n_sequences=3)
    train, _ = simulate_generative(protocol.generative(0.5, seed=5))
    test, truth = simulate_generative(protocol.generative(0.5, seed=6))
    target_wave, _ = default_erp_templates(protocol.n_times, protocol.sample_rate)
    theta = ModelParams(beta_raw=target_wave * 0.5, sigma=0.1,
                        delta=np.ones(3), alpha_raw=np.ones(3))
    g = 50
    draws = PosteriorDraws(
        beta_raw=np.tile(theta.beta_raw, (g, 1)),
        sigma=np.full(g, 0.1),
        delta=np.tile(theta.delta, (g, 1)),
        alpha_raw=np.tile(theta.alpha_raw, (g, 1)),
        log_q=np.zeros(g),
        train_log_joint=np.zeros(g),
    )
    decoded = predict_characters(draws, train, test, Hyperparams(), Keyboard(),
                                 n_seq_values=[3])
    assert decoded[3] == truth_symbols(truth)
