"""Generative simulator, label-switch relabeling, corruptions, recovery metrics."""

import math

import numpy as np
import pytest

from glass.errors import UnlabeledTemplate, ZeroTrueEffect
from glass.fitting import PosteriorDraws
from glass.model import COLUMN, ROW, Dataset, HalfSequence, Hyperparams, ModelParams
from glass.simulate import (
    CorruptionConfig,
    GenerativeConfig,
    apply_corruptions,
    default_erp_templates,
    gaussian_bump,
    recovery_metrics,
    simulate_from_model,
    simulate_generative,
)
from conftest import make_dataset


def small_config(seed=0, noise_var=1.0, ar_coef=0.0, spatial_corr=0.0,
                 n_channels=2, n_times=8, n_characters=2, n_sequences=2, **kw):
    target, nontarget = default_erp_templates(n_times, 32.0)
    return GenerativeConfig(
        n_channels=n_channels, n_times=n_times, sample_rate=32.0,
        n_characters=n_characters, n_sequences=n_sequences,
        erp_target=target, erp_nontarget=nontarget,
        ar_coef=ar_coef, noise_var=noise_var, spatial_corr=spatial_corr,
        seed=seed, **kw,
    )


# ---------------------------------------------------------------------------
# generative simulator
# ---------------------------------------------------------------------------

def test_noiseless_limit_recovers_templates():
    cfg = small_config(noise_var=1e-20)
    data, truth = simulate_generative(cfg)
    for half in data.half_sequences:
        for j, epoch in enumerate(half.epochs, start=1):
            expected = cfg.erp_target if j == half.target else cfg.erp_nontarget
            np.testing.assert_allclose(epoch.signals,
                                       np.tile(expected, (cfg.n_channels, 1)), atol=1e-8)


def test_schedule_validity():
    data, truth = simulate_generative(small_config(seed=5, n_characters=3, n_sequences=4))
    seen = {}
    for half in data.half_sequences:
        key = (half.character, half.sequence, half.half_type)
        assert key not in seen
        seen[key] = True
        assert half.target is not None
        assert len(half.epochs) == 6
    # every (c, s) pair contributes one row and one column half-sequence
    assert len(data) == 2 * 3 * 4
    # all half-sequences of a character share the target per orientation
    for c in data.characters():
        for u in (ROW, COLUMN):
            targets = {h.target for h in data.half_sequences
                       if h.character == c and h.half_type == u}
            assert len(targets) == 1
    assert len(truth.target_cells) == 3


def test_white_noise_lag1_autocorrelation():
    cfg = small_config(seed=3, noise_var=4.0, ar_coef=0.0, n_times=64,
                       n_characters=4, n_sequences=4)
    cfg = GenerativeConfig(**{**cfg.__dict__, "erp_target": np.zeros(64),
                              "erp_nontarget": np.zeros(64)})
    data, _ = simulate_generative(cfg)
    sig = np.concatenate([h.signal_stack().reshape(-1, 64) for h in data.half_sequences])
    x0 = sig[:, :-1].ravel()
    x1 = sig[:, 1:].ravel()
    corr = np.corrcoef(x0, x1)[0, 1]
    assert abs(corr) < 4.0 / math.sqrt(x0.size)
    # marginal variance matches the configured level
    assert abs(sig.var() - 4.0) < 0.1


def test_ar_coefficient_recovered():
    cfg = small_config(seed=9, noise_var=1.0, ar_coef=0.6, n_times=64,
                       n_characters=4, n_sequences=4)
    cfg = GenerativeConfig(**{**cfg.__dict__, "erp_target": np.zeros(64),
                              "erp_nontarget": np.zeros(64)})
    data, _ = simulate_generative(cfg)
    sig = np.concatenate([h.signal_stack().reshape(-1, 64) for h in data.half_sequences])
    corr = np.corrcoef(sig[:, :-1].ravel(), sig[:, 1:].ravel())[0, 1]
    assert abs(corr - 0.6) < 0.02


def test_spatial_correlation_applied():
    cfg = small_config(seed=2, noise_var=1.0, spatial_corr=0.7, n_channels=3,
                       n_times=32, n_characters=3, n_sequences=3)
    cfg = GenerativeConfig(**{**cfg.__dict__, "erp_target": np.zeros(32),
                              "erp_nontarget": np.zeros(32)})
    data, _ = simulate_generative(cfg)
    sig = np.concatenate([h.signal_stack().reshape(-1, 3, 32) for h in data.half_sequences])
    a = sig[:, 0, :].ravel()
    b = sig[:, 1, :].ravel()
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr - 0.7) < 0.05


def test_channel_gains_scale_template():
    cfg = small_config(noise_var=1e-20, channel_gains=np.array([2.0, 0.5]))
    data, _ = simulate_generative(cfg)
    half = data.half_sequences[0]
    target_epoch = half.epochs[half.target - 1]
    np.testing.assert_allclose(target_epoch.signals[0], 2.0 * cfg.erp_target, atol=1e-8)
    np.testing.assert_allclose(target_epoch.signals[1], 0.5 * cfg.erp_target, atol=1e-8)


def test_simulator_reproducible():
    a, _ = simulate_generative(small_config(seed=11))
    b, _ = simulate_generative(small_config(seed=11))
    c, _ = simulate_generative(small_config(seed=12))
    for ha, hb in zip(a.half_sequences, b.half_sequences):
        np.testing.assert_array_equal(ha.signal_stack(), hb.signal_stack())
        assert ha.target == hb.target
    assert any(not np.array_equal(ha.signal_stack(), hc.signal_stack())
               for ha, hc in zip(a.half_sequences, c.half_sequences))


def test_gaussian_bump_peak_location():
    bump = gaussian_bump(26, 32.0, center_ms=300.0, sd_ms=60.0, amplitude=5.0)
    peak_idx = int(np.argmax(bump))
    assert abs(peak_idx / 32.0 * 1000.0 - 300.0) < 1000.0 / 32.0
    assert abs(bump.max() - 5.0) < 0.2


# ---------------------------------------------------------------------------
# label-switch relabeling
# ---------------------------------------------------------------------------

def big_theta(n_channels, n_times, scale=50.0):
    return ModelParams(beta_raw=np.full(n_times, scale), sigma=0.5,
                       delta=np.ones(n_channels),
                       alpha_raw=np.ones(n_channels))


def test_relabel_preserves_epoch_multiset(rng):
    template, _ = simulate_generative(small_config(seed=4))
    theta = big_theta(2, 8, scale=0.3)
    out = simulate_from_model(theta, Hyperparams(), template, seed=9)
    assert len(out) == len(template)
    for a, b in zip(template.half_sequences, out.half_sequences):
        assert a.key == b.key
        sig_a = sorted(tuple(e.signals.ravel()) for e in a.epochs)
        sig_b = sorted(tuple(e.signals.ravel()) for e in b.epochs)
        assert sig_a == sig_b


def test_relabel_character_level_consistency(rng):
    template, _ = simulate_generative(small_config(seed=6, n_characters=3, n_sequences=4))
    out = simulate_from_model(big_theta(2, 8, 0.2), Hyperparams(), template, seed=3)
    for c in out.characters():
        for u in (ROW, COLUMN):
            targets = {h.target for h in out.half_sequences
                       if h.character == c and h.half_type == u}
            assert len(targets) == 1


def test_relabel_target_follows_strong_model(rng):
    # extreme effects: the drawn target is the argmax of the latent signal
    template, _ = simulate_generative(small_config(seed=8, noise_var=0.5))
    theta = big_theta(2, 8, scale=200.0)
    hyper = Hyperparams()
    out = simulate_from_model(theta, hyper, template, seed=5)
    from glass.model import latent_channel_signal
    for half_t, half_o in zip(template.half_sequences, out.half_sequences):
        if half_t.sequence != 1:
            continue  # the draw is made from the first sequence
        latent = latent_channel_signal(half_t, theta.delta, theta.alpha)
        eta = latent @ theta.beta_tilde(hyper.tau)
        assert half_o.target == int(np.argmax(eta)) + 1


def test_relabel_target_epoch_carries_ERP(rng):
    # noiseless template: after relabeling, the epoch at the new target must
    # be the template's ERP epoch
    template, _ = simulate_generative(small_config(noise_var=1e-20, seed=3))
    theta = ModelParams(beta_raw=np.ones(8) * 0.1, sigma=0.5,
                        delta=np.ones(2), alpha_raw=np.ones(2))
    out = simulate_from_model(theta, Hyperparams(), template, seed=77)
    cfg_target = default_erp_templates(8, 32.0)[0]
    for half in out.half_sequences:
        got = half.epochs[half.target - 1].signals
        np.testing.assert_allclose(got, np.tile(cfg_target, (2, 1)), atol=1e-8)


def test_relabel_requires_labels(rng):
    data = make_dataset(rng, labeled=False)
    with pytest.raises(UnlabeledTemplate):
        simulate_from_model(big_theta(2, 3), Hyperparams(), data, seed=0)


def test_relabel_reproducible(rng):
    template, _ = simulate_generative(small_config(seed=14, noise_var=2.0))
    theta = big_theta(2, 8, 0.4)
    a = simulate_from_model(theta, Hyperparams(), template, seed=21)
    b = simulate_from_model(theta, Hyperparams(), template, seed=21)
    for ha, hb in zip(a.half_sequences, b.half_sequences):
        assert ha.target == hb.target
        np.testing.assert_array_equal(ha.signal_stack(), hb.signal_stack())


# ---------------------------------------------------------------------------
# corruptions
# ---------------------------------------------------------------------------

def test_drift_prob_zero_identity(rng):
    data = make_dataset(rng, n_half=6)
    out = apply_corruptions(data, CorruptionConfig(drift_prob=0.0, apply_drift=True), seed=1)
    for a, b in zip(data.half_sequences, out.half_sequences):
        np.testing.assert_array_equal(a.signal_stack(), b.signal_stack())
        assert a.target == b.target


def test_drift_prob_one_swaps_every_halfsequence(rng):
    data = make_dataset(rng, n_half=10)
    out = apply_corruptions(data, CorruptionConfig(drift_prob=1.0, apply_drift=True), seed=2)
    for a, b in zip(data.half_sequences, out.half_sequences):
        assert a.target == b.target  # label kept: the epoch is now mislabeled
        target_changed = not np.array_equal(a.epochs[a.target - 1].signals,
                                            b.epochs[b.target - 1].signals)
        assert target_changed
        # exactly two epochs moved
        moved = sum(not np.array_equal(ea.signals, eb.signals)
                    for ea, eb in zip(a.epochs, b.epochs))
        assert moved == 2


def test_noise_corruption_marginal_variance(rng):
    # AR(1) with coefficient 0.5 and unit innovation variance has marginal
    # variance 1/(1-0.25)
    base = Dataset(half_sequences=tuple(
        make_dataset(np.random.default_rng(k), n_half=2, n_channels=4, n_times=64,
                     scale=1e-12).half_sequences[i]
        for k in range(30) for i in range(2)
    ))
    out = apply_corruptions(base, CorruptionConfig(apply_noise=True), seed=3)
    added = np.concatenate([
        (b.signal_stack() - a.signal_stack()).ravel()
        for a, b in zip(base.half_sequences, out.half_sequences)
    ])
    expected = 1.0 / (1.0 - 0.25)
    assert abs(added.var() - expected) < 0.05
    # lag-1 correlation of the added component is the AR coefficient
    mats = np.stack([(b.signal_stack() - a.signal_stack()).reshape(-1, 64)
                     for a, b in zip(base.half_sequences, out.half_sequences)])
    flat = mats.reshape(-1, 64)
    corr = np.corrcoef(flat[:, :-1].ravel(), flat[:, 1:].ravel())[0, 1]
    assert abs(corr - 0.5) < 0.02


def test_drift_requires_labels(rng):
    data = make_dataset(rng, labeled=False)
    with pytest.raises(UnlabeledTemplate):
        apply_corruptions(data, CorruptionConfig(apply_drift=True, drift_prob=1.0), seed=0)


def test_corruptions_reproducible(rng):
    data = make_dataset(rng, n_half=8)
    cfg = CorruptionConfig(apply_drift=True, apply_noise=True)
    a = apply_corruptions(data, cfg, seed=5)
    b = apply_corruptions(data, cfg, seed=5)
    for ha, hb in zip(a.half_sequences, b.half_sequences):
        np.testing.assert_array_equal(ha.signal_stack(), hb.signal_stack())


# ---------------------------------------------------------------------------
# recovery metrics
# ---------------------------------------------------------------------------

def make_draws_at(theta: ModelParams, n=50, flip=False) -> PosteriorDraws:
    sgn = -1.0 if flip else 1.0
    return PosteriorDraws(
        beta_raw=np.tile(sgn * theta.beta_raw, (n, 1)),
        sigma=np.full(n, theta.sigma),
        delta=np.tile(theta.delta, (n, 1)),
        alpha_raw=np.tile(sgn * theta.alpha_raw, (n, 1)),
        log_q=np.zeros(n),
    )


def test_perfect_recovery():
    theta = ModelParams(beta_raw=np.array([0.5, -0.2, 0.0]), sigma=0.1,
                        delta=np.array([1.0, 0.0]), alpha_raw=np.array([0.8, 0.6]))
    m = recovery_metrics(theta, make_draws_at(theta), Hyperparams(tau=0.0), tau_true=0.0)
    assert m.rmse < 1e-20
    assert m.error_angle_deg < 1e-6
    assert m.mean_delta_signal == 1.0
    assert m.mean_delta_noise == 0.0


def test_sign_flip_recovery():
    # jointly flipped weights and effects represent the same model
    theta = ModelParams(beta_raw=np.array([0.5, -0.2, 0.1]), sigma=0.1,
                        delta=np.array([1.0, 0.0]), alpha_raw=np.array([0.8, 0.6]))
    m = recovery_metrics(theta, make_draws_at(theta, flip=True),
                         Hyperparams(tau=0.0), tau_true=0.0)
    assert m.rmse < 1e-20
    assert m.error_angle_deg < 1e-6


def test_orthogonal_weights_give_ninety_degrees():
    theta = ModelParams(beta_raw=np.array([1.0]), sigma=0.1,
                        delta=np.array([1.0, 0.0]), alpha_raw=np.array([1.0, 0.0]))
    draws = PosteriorDraws(
        beta_raw=np.ones((40, 1)), sigma=np.full(40, 0.1),
        delta=np.tile([1.0, 0.0], (40, 1)),
        alpha_raw=np.tile([0.0, 1.0], (40, 1)), log_q=np.zeros(40),
    )
    m = recovery_metrics(theta, draws, Hyperparams(tau=0.0), tau_true=0.0)
    assert abs(m.error_angle_deg - 90.0) < 1e-9


def test_zero_true_effect_raises():
    theta = ModelParams(beta_raw=np.zeros(3), sigma=0.1,
                        delta=np.array([1.0]), alpha_raw=np.array([1.0]))
    with pytest.raises(ZeroTrueEffect):
        recovery_metrics(theta, make_draws_at(theta), Hyperparams(tau=0.0), tau_true=0.0)
