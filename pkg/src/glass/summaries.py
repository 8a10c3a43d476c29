"""Posterior summaries: effect curves, nonzero probabilities, channel selection.

Quantiles use linear interpolation between order statistics.  Per-coordinate
medians are reported as-is: the likelihood is invariant to jointly flipping
the signs of the contribution weights and the effects, and no alignment
convention is imposed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooFewDraws
from .fitting import PosteriorDraws
from .model import Hyperparams, soft_threshold

MIN_DRAWS = 40
IMPORTANT_SELECTION_PROB = 0.9


@dataclass(frozen=True)
class EffectSummary:
    """Per-time-point summaries of the thresholded effects."""

    median: np.ndarray  # (M,)
    lower: np.ndarray  # (M,) 2.5% quantile
    upper: np.ndarray  # (M,) 97.5% quantile
    prob_nonzero: np.ndarray  # (M,) fraction of draws with an exactly nonzero effect


@dataclass(frozen=True)
class ChannelSummary:
    """Per-channel selection probabilities and normalized contribution weights."""

    selection_prob: np.ndarray  # (E,) mean of the selector over draws
    weight: np.ndarray  # (E,) L2-normalized per-coordinate median of alpha
    important: np.ndarray  # (E,) bool, selection_prob > 0.9


def _require_draws(draws: PosteriorDraws):
    if draws.n_draws < MIN_DRAWS:
        raise TooFewDraws(f"need at least {MIN_DRAWS} draws for stable quantiles, got {draws.n_draws}")


def summarize_effects(draws: PosteriorDraws, hyper: Hyperparams) -> EffectSummary:
    """Median, central 95% interval, and exact-nonzero probability per time point."""
    _require_draws(draws)
    beta_tilde = soft_threshold(draws.beta_raw, hyper.tau)  # (G, M)
    lower, median, upper = np.quantile(beta_tilde, [0.025, 0.5, 0.975], axis=0)
    prob_nonzero = (beta_tilde != 0.0).mean(axis=0)
    return EffectSummary(median=median, lower=lower, upper=upper, prob_nonzero=prob_nonzero)


def summarize_channels(draws: PosteriorDraws) -> ChannelSummary:
    """Selection probabilities and the normalized median contribution weights."""
    _require_draws(draws)
    selection_prob = draws.delta.mean(axis=0)
    norms = np.maximum(np.linalg.norm(draws.alpha_raw, axis=1), 1e-300)
    alpha = draws.alpha_raw / norms[:, None]  # projected per draw
    med = np.median(alpha, axis=0)
    med_norm = np.linalg.norm(med)
    weight = med / med_norm if med_norm > 0 else med
    return ChannelSummary(
        selection_prob=selection_prob,
        weight=weight,
        important=selection_prob > IMPORTANT_SELECTION_PROB,
    )
