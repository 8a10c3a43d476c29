"""Core model types, transforms, likelihood and priors."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glass.errors import DimensionMismatch, InvalidSigma, MissingLabel, ZeroVector
from glass.model import (
    Dataset,
    HalfSequence,
    Hyperparams,
    ModelParams,
    StimulusEpoch,
    TimingConfig,
    half_cauchy_logpdf,
    latent_channel_signal,
    log_joint,
    log_likelihood,
    log_prior,
    project_to_sphere,
    soft_threshold,
    stable_softmax,
    target_probabilities,
)
from conftest import make_dataset, make_half

finite_floats = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


# ---------------------------------------------------------------------------
# soft_threshold
# ---------------------------------------------------------------------------

def test_soft_threshold_examples():
    assert soft_threshold(2.0, 0.5) == 1.5
    assert soft_threshold(-0.3, 0.5) == 0.0
    assert soft_threshold(-2.0, 0.5) == -1.5


def test_soft_threshold_zero_tau_is_identity():
    x = np.linspace(-3, 3, 13)
    np.testing.assert_array_equal(soft_threshold(x, 0.0), x)


def test_soft_threshold_rejects_negative_tau():
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


@given(finite_floats, st.floats(min_value=0, max_value=1e6))
def test_soft_threshold_contraction(x, tau):
    assert abs(soft_threshold(x, tau)) <= abs(x) + 1e-15


@given(finite_floats, finite_floats, st.floats(min_value=0, max_value=1e6))
def test_soft_threshold_lipschitz(x, y, tau):
    assert abs(soft_threshold(x, tau) - soft_threshold(y, tau)) <= abs(x - y) + 1e-9


def test_soft_threshold_continuous_at_kink():
    tau = 0.7
    eps = 1e-12
    assert abs(soft_threshold(tau + eps, tau) - soft_threshold(tau - eps, tau)) < 1e-11


# ---------------------------------------------------------------------------
# project_to_sphere
# ---------------------------------------------------------------------------

def test_projection_three_four_five():
    out = project_to_sphere(np.array([3.0, 4.0, 0.0, 0.0]))
    np.testing.assert_allclose(out, [0.6, 0.8, 0.0, 0.0], atol=1e-15)


def test_projection_identity_on_sphere():
    e1 = np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(project_to_sphere(e1), e1, atol=1e-15)


@given(st.lists(finite_floats, min_size=2, max_size=6),
       st.floats(min_value=1e-3, max_value=1e3))
def test_projection_scale_invariance(values, c):
    v = np.asarray(values)
    if np.linalg.norm(v) < 1e-6:
        return
    np.testing.assert_allclose(project_to_sphere(c * v), project_to_sphere(v), atol=1e-9)


def test_projection_unit_norm(rng):
    v = rng.normal(size=8)
    assert abs(np.linalg.norm(project_to_sphere(v)) - 1.0) < 1e-12


def test_projection_zero_vector_raises():
    with pytest.raises(ZeroVector):
        project_to_sphere(np.zeros(4))
    with pytest.raises(ZeroVector):
        project_to_sphere(np.full(4, 1e-14))


# ---------------------------------------------------------------------------
# latent_channel_signal
# ---------------------------------------------------------------------------

def test_latent_channel_empty_selection(rng):
    half = make_half(rng, n_channels=3, n_times=5)
    out = latent_channel_signal(half, np.zeros(3), project_to_sphere(rng.normal(size=3)))
    np.testing.assert_array_equal(out, np.zeros((6, 5)))


def test_latent_channel_single_passthrough(rng):
    half = make_half(rng, n_channels=3, n_times=5)
    delta = np.array([1.0, 0.0, 0.0])
    alpha = np.array([1.0, 0.0, 0.0])
    out = latent_channel_signal(half, delta, alpha)
    for j in range(6):
        np.testing.assert_array_equal(out[j], half.epochs[j].signals[0])


def test_latent_channel_equal_channels_sum(rng):
    # both channels carry the same signal v: output is sqrt(2) * v per j
    v = rng.normal(size=(6, 4))
    epochs = tuple(StimulusEpoch(signals=np.stack([v[j], v[j]]), sample_rate=32.0)
                   for j in range(6))
    half = HalfSequence(key=(1, 1, "row"), epochs=epochs, target=1)
    alpha = np.array([1.0, 1.0]) / math.sqrt(2)
    out = latent_channel_signal(half, np.ones(2), alpha)
    np.testing.assert_allclose(out, math.sqrt(2) * v, rtol=1e-12)


def test_latent_channel_dimension_mismatch(rng):
    half = make_half(rng, n_channels=3)
    with pytest.raises(DimensionMismatch):
        latent_channel_signal(half, np.ones(2), np.ones(2) / math.sqrt(2))


# ---------------------------------------------------------------------------
# target_probabilities
# ---------------------------------------------------------------------------

def make_theta(n_channels, n_times, beta=None, delta=None, alpha_raw=None, sigma=1.0):
    return ModelParams(
        beta_raw=np.zeros(n_times) if beta is None else np.asarray(beta, dtype=float),
        sigma=sigma,
        delta=np.ones(n_channels) if delta is None else np.asarray(delta, dtype=float),
        alpha_raw=(np.ones(n_channels) if alpha_raw is None
                   else np.asarray(alpha_raw, dtype=float)),
    )


def test_probabilities_zero_coefficients_uniform(rng):
    half = make_half(rng, n_channels=2, n_times=3)
    probs = target_probabilities(half, make_theta(2, 3), Hyperparams())
    np.testing.assert_allclose(probs, np.full(6, 1 / 6), atol=1e-15)


def test_probabilities_empty_selection_uniform(rng):
    half = make_half(rng, n_channels=2, n_times=3, scale=50.0)
    theta = make_theta(2, 3, beta=rng.normal(size=3), delta=[0, 0])
    probs = target_probabilities(half, theta, Hyperparams())
    np.testing.assert_allclose(probs, np.full(6, 1 / 6), atol=1e-15)


def test_probabilities_match_hand_softmax():
    # E=1, M=1, unit model: eta equals the raw signal values (1,0,0,0,0,0)
    values = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    epochs = tuple(StimulusEpoch(signals=np.array([[v]]), sample_rate=32.0) for v in values)
    half = HalfSequence(key=(1, 1, "row"), epochs=epochs, target=1)
    theta = make_theta(1, 1, beta=[1.0])
    probs = target_probabilities(half, theta, Hyperparams())
    # independent softmax evaluation from the definition
    expected = np.array([math.exp(v) for v in values])
    expected /= expected.sum()
    np.testing.assert_allclose(probs, expected, rtol=1e-12)
    assert abs(probs[0] - math.e / (math.e + 5)) < 1e-12


def test_probabilities_sum_to_one(rng):
    for scale in (1.0, 100.0, 1e4):
        half = make_half(rng, n_channels=3, n_times=4, scale=scale)
        theta = make_theta(3, 4, beta=rng.normal(size=4))
        probs = target_probabilities(half, theta, Hyperparams())
        assert abs(probs.sum() - 1.0) < 1e-10
        assert (probs >= 0).all()


def test_probabilities_translation_invariance(rng):
    # adding a constant to every sample shifts all log-odds equally (E=M=1)
    values = rng.normal(size=6)
    shift = 1234.5
    def build(vals):
        epochs = tuple(StimulusEpoch(signals=np.array([[v]]), sample_rate=32.0) for v in vals)
        return HalfSequence(key=(1, 1, "row"), epochs=epochs, target=1)
    theta = make_theta(1, 1, beta=[1.0])
    p0 = target_probabilities(build(values), theta, Hyperparams())
    p1 = target_probabilities(build(values + shift), theta, Hyperparams())
    np.testing.assert_allclose(p0, p1, atol=1e-10)


def test_probabilities_projection_scale_invariance(rng):
    half = make_half(rng, n_channels=3, n_times=4)
    beta = rng.normal(size=4)
    for c in (0.5, 3.0, 1e4):
        p0 = target_probabilities(half, make_theta(3, 4, beta=beta, alpha_raw=[1, 2, 3]),
                                  Hyperparams())
        p1 = target_probabilities(half, make_theta(3, 4, beta=beta,
                                                   alpha_raw=[c, 2 * c, 3 * c]),
                                  Hyperparams())
        np.testing.assert_array_equal(p0, p1)


def test_probabilities_equivalence_of_forms(rng):
    # full matrix inner product <X_ij, B> vs the two-step latent-channel form
    for trial in range(5):
        e, m = 4, 6
        half = make_half(rng, n_channels=e, n_times=m, scale=3.0)
        theta = make_theta(e, m, beta=rng.normal(size=m),
                           delta=rng.integers(0, 2, size=e),
                           alpha_raw=rng.normal(size=e))
        b_matrix = theta.coefficient_matrix(tau=0.1)
        eta_full = np.array([float(np.sum(ep.signals * b_matrix)) for ep in half.epochs])
        latent = latent_channel_signal(half, theta.delta, theta.alpha)
        eta_two_step = latent @ theta.beta_tilde(0.1)
        np.testing.assert_allclose(eta_full, eta_two_step, atol=1e-9)


def test_stable_softmax_extreme_values():
    probs = stable_softmax(np.array([1e4, 0.0, -1e4, 0.0, 0.0, 0.0]))
    assert np.isfinite(probs).all()
    assert abs(probs.sum() - 1.0) < 1e-12


# ---------------------------------------------------------------------------
# log_prior
# ---------------------------------------------------------------------------

def test_log_prior_closed_form_m1():
    # M=1, beta*_1=0, sigma=1, A=1, E=0 is not constructible (E >= 1);
    # use E=1 with alpha*=0 and delta=0 and subtract the known extra terms
    theta = ModelParams(beta_raw=np.zeros(1), sigma=1.0, delta=np.zeros(1),
                        alpha_raw=np.zeros(1))
    hyper = Hyperparams(tau=0.0, cauchy_scale=1.0, delta_prior=0.5)
    got = log_prior(theta, hyper)
    # independent closed forms: N(0|0,1), half-Cauchy(1|1), Bern(0.5), N(0|0,1)
    expected = (-0.5 * math.log(2 * math.pi)      # random-walk head
                + math.log(2 / (math.pi * 2))      # half-Cauchy at sigma=1
                + math.log(0.5)                    # one selector
                - 0.5 * math.log(2 * math.pi))     # one raw weight at zero
    assert abs(got - expected) < 1e-12


def test_half_cauchy_matches_scipy():
    from scipy.stats import halfcauchy
    for sigma, scale in [(1.0, 1.0), (0.3, 2.0), (5.0, 0.7)]:
        assert abs(half_cauchy_logpdf(sigma, scale)
                   - halfcauchy.logpdf(sigma, scale=scale)) < 1e-12


def test_log_prior_delta_term_symmetric(rng):
    hyper = Hyperparams(delta_prior=0.5)
    base = dict(beta_raw=rng.normal(size=3), sigma=0.8, alpha_raw=rng.normal(size=4))
    values = [log_prior(ModelParams(delta=np.array(d, dtype=float), **base), hyper)
              for d in ([0, 0, 0, 0], [1, 1, 1, 1], [1, 0, 1, 0])]
    assert max(values) - min(values) < 1e-12  # E*log(0.5) regardless of delta


def test_log_prior_alpha_doubling_closed_form(rng):
    alpha = rng.normal(size=5)
    base = dict(beta_raw=rng.normal(size=3), sigma=0.8, delta=np.ones(5))
    hyper = Hyperparams()
    diff = (log_prior(ModelParams(alpha_raw=2 * alpha, **base), hyper)
            - log_prior(ModelParams(alpha_raw=alpha, **base), hyper))
    assert abs(diff - (-1.5 * float(alpha @ alpha))) < 1e-10


def test_log_prior_random_walk_matches_scipy(rng):
    from scipy.stats import norm
    beta = rng.normal(size=4)
    sigma = 0.6
    theta = ModelParams(beta_raw=beta, sigma=sigma, delta=np.zeros(2),
                        alpha_raw=np.zeros(2))
    hyper = Hyperparams(cauchy_scale=1.3, delta_prior=0.5)
    expected = (norm.logpdf(beta[0], 0.0, sigma)
                + sum(norm.logpdf(beta[m], beta[m - 1], sigma) for m in range(1, 4))
                + half_cauchy_logpdf(sigma, 1.3)
                + 2 * math.log(0.5)
                + 2 * norm.logpdf(0.0))
    assert abs(log_prior(theta, hyper) - expected) < 1e-10


def test_log_prior_invalid_sigma():
    theta = ModelParams(beta_raw=np.zeros(2), sigma=-1.0, delta=np.zeros(1),
                        alpha_raw=np.zeros(1))
    with pytest.raises(InvalidSigma):
        log_prior(theta, Hyperparams())


# ---------------------------------------------------------------------------
# log_likelihood / log_joint
# ---------------------------------------------------------------------------

def test_log_likelihood_uniform_model(rng):
    data = make_dataset(rng, n_half=5, n_channels=2, n_times=3)
    theta = make_theta(2, 3)  # zero coefficients
    assert abs(log_likelihood(data, theta, Hyperparams()) - 5 * math.log(1 / 6)) < 1e-12


def test_log_likelihood_empty_dataset():
    data = Dataset(half_sequences=())
    theta = make_theta(2, 3)
    assert log_likelihood(data, theta, Hyperparams()) == 0.0


def test_log_likelihood_matches_probability_entry(rng):
    half = make_half(rng, n_channels=2, n_times=3, target=4)
    data = Dataset(half_sequences=(half,))
    theta = make_theta(2, 3, beta=rng.normal(size=3))
    probs = target_probabilities(half, theta, Hyperparams())
    assert abs(log_likelihood(data, theta, Hyperparams()) - math.log(probs[3])) < 1e-10


def test_log_likelihood_order_invariance(rng):
    data = make_dataset(rng, n_half=6, n_channels=2, n_times=3)
    theta = make_theta(2, 3, beta=rng.normal(size=3))
    hyper = Hyperparams()
    reversed_data = Dataset(half_sequences=tuple(reversed(data.half_sequences)))
    assert abs(log_likelihood(data, theta, hyper)
               - log_likelihood(reversed_data, theta, hyper)) < 1e-12


def test_log_likelihood_missing_label(rng):
    data = make_dataset(rng, n_half=3, labeled=False)
    with pytest.raises(MissingLabel):
        log_likelihood(data, make_theta(2, 3), Hyperparams())


def test_log_joint_is_sum(rng):
    data = make_dataset(rng, n_half=4, n_channels=2, n_times=3)
    theta = make_theta(2, 3, beta=rng.normal(size=3), alpha_raw=rng.normal(size=2))
    hyper = Hyperparams(tau=0.2)
    assert abs(log_joint(data, theta, hyper)
               - log_likelihood(data, theta, hyper) - log_prior(theta, hyper)) < 1e-12


# ---------------------------------------------------------------------------
# type invariants
# ---------------------------------------------------------------------------

def test_epoch_rejects_nonfinite():
    from glass.errors import NonFinite
    with pytest.raises(NonFinite):
        StimulusEpoch(signals=np.array([[np.nan, 1.0]]), sample_rate=32.0)


def test_half_sequence_needs_six_epochs(rng):
    eps = tuple(StimulusEpoch(signals=rng.normal(size=(2, 3)), sample_rate=32.0)
                for _ in range(5))
    with pytest.raises(DimensionMismatch):
        HalfSequence(key=(1, 1, "row"), epochs=eps, target=1)


def test_half_sequence_target_range(rng):
    eps = tuple(StimulusEpoch(signals=rng.normal(size=(2, 3)), sample_rate=32.0)
                for _ in range(6))
    with pytest.raises(ValueError):
        HalfSequence(key=(1, 1, "row"), epochs=eps, target=7)


def test_dataset_dims_must_agree(rng):
    a = make_half(rng, n_channels=2, n_times=3)
    b = make_half(rng, n_channels=3, n_times=3, key=(2, 1, "row"))
    with pytest.raises(DimensionMismatch):
        Dataset(half_sequences=(a, b))


def test_timing_config_positive():
    with pytest.raises(ValueError):
        TimingConfig(flash_ms=0.0)
    t = TimingConfig()
    assert (t.flash_ms, t.isi_ms, t.pause_s, t.window_ms) == (31.25, 125.0, 3.5, 800.0)


def test_keyboard_default_layout():
    from glass.prediction import Keyboard
    kb = Keyboard()
    assert kb.symbol(1, 1) == "A"
    assert kb.symbol(6, 6) == "_"
    assert kb.position("U") == (4, 3)
