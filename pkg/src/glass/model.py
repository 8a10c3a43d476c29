"""Core model: domain types, deterministic transforms, likelihood and priors.

The decoder is a constrained multinomial logistic regression over the six
stimuli of a half-sequence.  The unnormalized log-odds of stimulus j being
the target is the inner product of its EEG epoch with a rank-one coefficient
matrix B = diag(delta) alpha beta_tilde^T, built from a channel-selection
vector delta, unit contribution weights alpha, and soft-thresholded
time-varying effects beta_tilde.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidSigma,
    MissingLabel,
    NonFinite,
    ZeroVector,
)

ROW = "row"
COLUMN = "column"
HALF_TYPES = (ROW, COLUMN)
N_STIMULI = 6

# Norms below this are treated as the zero vector; microvolt-scale data is
# many orders of magnitude above it.
PROJECTION_EPS = 1e-12

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimingConfig:
    """Stimulus presentation timing of the speller."""

    flash_ms: float = 31.25
    isi_ms: float = 125.0
    pause_s: float = 3.5
    window_ms: float = 800.0

    def __post_init__(self):
        for name in ("flash_ms", "isi_ms", "pause_s", "window_ms"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class StimulusEpoch:
    """EEG samples following one stimulus: channels x time, in microvolts."""

    signals: np.ndarray  # (E, M)
    sample_rate: float

    def __post_init__(self):
        sig = np.asarray(self.signals, dtype=np.float64)
        if sig.ndim != 2 or sig.shape[0] < 1 or sig.shape[1] < 1:
            raise DimensionMismatch(f"epoch signals must be 2-D E x M, got shape {sig.shape}")
        if not np.isfinite(sig).all():
            raise NonFinite("epoch signals contain non-finite values")
        object.__setattr__(self, "signals", sig)

    @property
    def n_channels(self) -> int:
        return self.signals.shape[0]

    @property
    def n_times(self) -> int:
        return self.signals.shape[1]


@dataclass(frozen=True)
class HalfSequence:
    """Six stimulus epochs covering all rows (or all columns) once.

    `epochs[j-1]` is the epoch for row/column number j.  `target` is the
    target row/column number z in 1..6, or None for unlabeled data.
    """

    key: tuple  # (character index c, sequence index s, half type)
    epochs: tuple  # 6 StimulusEpoch, indexed by j-1
    target: Optional[int] = None

    def __post_init__(self):
        c, s, u = self.key
        if u not in HALF_TYPES:
            raise ValueError(f"half type must be one of {HALF_TYPES}, got {u!r}")
        epochs = tuple(self.epochs)
        if len(epochs) != N_STIMULI:
            raise DimensionMismatch(f"a half-sequence has exactly {N_STIMULI} epochs, got {len(epochs)}")
        shapes = {(e.n_channels, e.n_times, e.sample_rate) for e in epochs}
        if len(shapes) != 1:
            raise DimensionMismatch("all epochs in a half-sequence must share E, M and sample rate")
        if self.target is not None and not 1 <= int(self.target) <= N_STIMULI:
            raise ValueError(f"target must be in 1..{N_STIMULI}, got {self.target}")
        object.__setattr__(self, "epochs", epochs)

    @property
    def character(self) -> int:
        return self.key[0]

    @property
    def sequence(self) -> int:
        return self.key[1]

    @property
    def half_type(self) -> str:
        return self.key[2]

    @property
    def n_channels(self) -> int:
        return self.epochs[0].n_channels

    @property
    def n_times(self) -> int:
        return self.epochs[0].n_times

    def signal_stack(self) -> np.ndarray:
        """Epoch signals as one (6, E, M) array in j order."""
        return np.stack([e.signals for e in self.epochs])


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of half-sequences with shared dimensions."""

    half_sequences: tuple
    timing: TimingConfig = field(default_factory=TimingConfig)
    channel_names: Optional[tuple] = None  # metadata only, never semantics

    def __post_init__(self):
        halves = tuple(self.half_sequences)
        dims = {(h.n_channels, h.n_times, h.epochs[0].sample_rate) for h in halves}
        if len(dims) > 1:
            raise DimensionMismatch("all half-sequences must share E, M and sample rate")
        if self.channel_names is not None:
            names = tuple(self.channel_names)
            if halves and len(names) != halves[0].n_channels:
                raise DimensionMismatch("channel_names length must equal E")
            object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "half_sequences", halves)

    def __len__(self) -> int:
        return len(self.half_sequences)

    @property
    def n_channels(self) -> int:
        return self.half_sequences[0].n_channels

    @property
    def n_times(self) -> int:
        return self.half_sequences[0].n_times

    @property
    def sample_rate(self) -> float:
        return self.half_sequences[0].epochs[0].sample_rate

    @property
    def n_characters(self) -> int:
        return len({h.character for h in self.half_sequences})

    @property
    def n_sequences(self) -> int:
        return len({h.sequence for h in self.half_sequences})

    @property
    def is_labeled(self) -> bool:
        return all(h.target is not None for h in self.half_sequences)

    def characters(self) -> list:
        """Distinct character indices in first-appearance order."""
        seen: dict = {}
        for h in self.half_sequences:
            seen.setdefault(h.character, None)
        return list(seen)


@dataclass(frozen=True)
class ModelParams:
    """One realization of the model parameters.

    beta_raw are the raw time-varying effects before soft-thresholding,
    sigma the random-walk scale, delta the binary channel selectors, and
    alpha_raw the pre-projection contribution weights.
    """

    beta_raw: np.ndarray  # (M,)
    sigma: float
    delta: np.ndarray  # (E,) in {0, 1}
    alpha_raw: np.ndarray  # (E,)

    def __post_init__(self):
        object.__setattr__(self, "beta_raw", np.asarray(self.beta_raw, dtype=np.float64))
        object.__setattr__(self, "delta", np.asarray(self.delta, dtype=np.float64))
        object.__setattr__(self, "alpha_raw", np.asarray(self.alpha_raw, dtype=np.float64))
        if self.delta.shape != self.alpha_raw.shape:
            raise DimensionMismatch("delta and alpha_raw must have the same length E")

    @property
    def n_times(self) -> int:
        return self.beta_raw.shape[0]

    @property
    def n_channels(self) -> int:
        return self.delta.shape[0]

    def beta_tilde(self, tau: float) -> np.ndarray:
        return soft_threshold(self.beta_raw, tau)

    @property
    def alpha(self) -> np.ndarray:
        return project_to_sphere(self.alpha_raw)

    def latent_weights(self) -> np.ndarray:
        """Per-channel weights delta_e * alpha_e of the latent channel."""
        return self.delta * self.alpha

    def coefficient_matrix(self, tau: float) -> np.ndarray:
        """The rank-one E x M coefficient matrix B = diag(delta) alpha beta_tilde^T."""
        return np.outer(self.latent_weights(), self.beta_tilde(tau))


@dataclass(frozen=True)
class Hyperparams:
    """Fixed hyperparameters of the priors."""

    tau: float = 0.0  # soft-threshold level, >= 0
    cauchy_scale: float = 1.0  # half-Cauchy scale A of the random-walk sigma
    delta_prior: float = 0.5  # prior channel-inclusion probability

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.cauchy_scale <= 0:
            raise ValueError("cauchy_scale must be > 0")
        if not 0 < self.delta_prior < 1:
            raise ValueError("delta_prior must be in (0, 1)")


# ---------------------------------------------------------------------------
# Deterministic transforms
# ---------------------------------------------------------------------------

def soft_threshold(x, tau: float):
    """sign(x) * (|x| - tau) where |x| > tau, else 0.  Elementwise on arrays."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    out = np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)
    return out if out.ndim else float(out)


def project_to_sphere(alpha_raw: np.ndarray) -> np.ndarray:
    """L2-normalize a vector onto the unit sphere."""
    v = np.asarray(alpha_raw, dtype=np.float64)
    norm = float(np.linalg.norm(v))
    if norm < PROJECTION_EPS:
        raise ZeroVector(f"cannot project a vector with norm {norm:.3e} < {PROJECTION_EPS}")
    return v / norm


def latent_channel_signal(half: HalfSequence, delta: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Collapse the E channels of each epoch into the latent channel.

    Returns a (6, M) array whose j-th row is sum_e delta_e alpha_e x_ije.
    """
    delta = np.asarray(delta, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if delta.shape != (half.n_channels,) or alpha.shape != (half.n_channels,):
        raise DimensionMismatch(
            f"delta/alpha must have length E={half.n_channels}, "
            f"got {delta.shape} and {alpha.shape}"
        )
    stack = half.signal_stack()  # (6, E, M)
    return np.einsum("jem,e->jm", stack, delta * alpha)


def stable_softmax(eta: np.ndarray) -> np.ndarray:
    """Softmax along the last axis with max-subtraction."""
    eta = np.asarray(eta, dtype=np.float64)
    shifted = eta - eta.max(axis=-1, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=-1, keepdims=True)


def target_probabilities(half: HalfSequence, theta: ModelParams, hyper: Hyperparams) -> np.ndarray:
    """Probability of each stimulus j being the target, as a 6-simplex."""
    if theta.n_channels != half.n_channels or theta.n_times != half.n_times:
        raise DimensionMismatch(
            f"model is E={theta.n_channels}, M={theta.n_times} but data is "
            f"E={half.n_channels}, M={half.n_times}"
        )
    latent = latent_channel_signal(half, theta.delta, theta.alpha)  # (6, M)
    eta = latent @ theta.beta_tilde(hyper.tau)
    if not np.isfinite(eta).all():
        raise NonFinite("non-finite log-odds")
    return stable_softmax(eta)


# ---------------------------------------------------------------------------
# Log-densities
# ---------------------------------------------------------------------------

def half_cauchy_logpdf(sigma: float, scale: float) -> float:
    """log of 2 / (pi * A * (1 + (sigma/A)^2)) on sigma > 0."""
    return math.log(2.0) - math.log(math.pi * scale) - math.log1p((sigma / scale) ** 2)


def log_prior(theta: ModelParams, hyper: Hyperparams) -> float:
    """Joint log-density of the priors at theta.

    Random-walk normal increments on beta_raw (anchored at zero), half-Cauchy
    on sigma, Bernoulli mass on delta, standard normal on alpha_raw.
    """
    if not theta.sigma > 0:
        raise InvalidSigma(f"sigma must be > 0, got {theta.sigma}")
    m = theta.n_times
    e = theta.n_channels
    sig2 = theta.sigma ** 2

    diffs = np.diff(theta.beta_raw, prepend=0.0)
    rw = -0.5 * m * LOG_2PI - m * math.log(theta.sigma) - float(diffs @ diffs) / (2.0 * sig2)

    hc = half_cauchy_logpdf(theta.sigma, hyper.cauchy_scale)

    p = hyper.delta_prior
    n_on = float(theta.delta.sum())
    bern = n_on * math.log(p) + (e - n_on) * math.log1p(-p)

    a = theta.alpha_raw
    gauss = -0.5 * e * LOG_2PI - 0.5 * float(a @ a)

    return rw + hc + bern + gauss


def log_likelihood(data: Dataset, theta: ModelParams, hyper: Hyperparams) -> float:
    """Sum over half-sequences of the log-probability of the observed target."""
    beta_tilde = None
    weights = None
    total = 0.0
    for half in data.half_sequences:
        if half.target is None:
            raise MissingLabel(f"half-sequence {half.key} has no target label")
        if beta_tilde is None:
            if theta.n_channels != half.n_channels or theta.n_times != half.n_times:
                raise DimensionMismatch(
                    f"model is E={theta.n_channels}, M={theta.n_times} but data is "
                    f"E={half.n_channels}, M={half.n_times}"
                )
            beta_tilde = theta.beta_tilde(hyper.tau)
            weights = theta.latent_weights()
        eta = np.einsum("jem,e->jm", half.signal_stack(), weights) @ beta_tilde
        if not np.isfinite(eta).all():
            raise NonFinite(f"non-finite log-odds at half-sequence {half.key}")
        shift = eta.max()
        total += eta[half.target - 1] - shift - math.log(np.exp(eta - shift).sum())
    return total


def log_joint(data: Dataset, theta: ModelParams, hyper: Hyperparams) -> float:
    """log likelihood + log prior."""
    return log_likelihood(data, theta, hyper) + log_prior(theta, hyper)
