"""Exception and warning types shared across the package."""

from __future__ import annotations


class GlassError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(GlassError):
    """Array shapes disagree with the model dimensions."""


class ZeroVector(GlassError):
    """A vector with (numerically) zero norm cannot be projected to the sphere."""


class NonFinite(GlassError):
    """A NaN or infinity appeared where a finite value is required."""


class MissingLabel(GlassError):
    """A half-sequence lacks the target label required by the operation."""


class InvalidSigma(GlassError):
    """The random-walk scale must be strictly positive."""


class EmptyDataset(GlassError):
    """The operation needs at least one half-sequence."""


class NonFiniteGradient(GlassError):
    """Training aborted because a gradient coordinate became non-finite."""


class TooFewDraws(GlassError):
    """Posterior summaries need a minimum number of draws for stable quantiles."""


class EmptyList(GlassError):
    """Fusion needs at least one predictive distribution."""


class MixedOrientation(GlassError):
    """Row and column predictive distributions cannot be fused together."""


class UnlabeledTemplate(GlassError):
    """The relabeling simulator needs a fully labeled template dataset."""


class ZeroTrueEffect(GlassError):
    """Relative error is undefined when the true effect vector is zero."""


class IncompleteHalfSequence(GlassError):
    """An epoch grouping is missing one or more of the six stimuli."""


class WindowOverrun(GlassError):
    """An epoch window extends past the end of the recording."""


class InvalidBand(GlassError):
    """Filter band edges must satisfy 0 < low < high < Nyquist."""


class InvalidRate(GlassError):
    """Decimation requires the target rate to divide the source rate."""


class LengthMismatch(GlassError):
    """Prediction and truth sequences have different lengths."""


class InvalidConfig(GlassError):
    """A run configuration file failed validation."""


class DegenerateWeights(UserWarning):
    """A single importance weight dominates the posterior predictive."""
