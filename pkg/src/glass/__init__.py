"""Bayesian latent-channel decoding of P300 speller EEG.

A constrained multinomial logistic regression identifies the target stimulus
among the six of each half-sequence.  The coefficient matrix factors into a
sparse channel selection, unit contribution weights, and soft-thresholded
time-varying effects with a random-walk shrinkage prior; the posterior is
approximated by gradient-based variational inference and predictions are
importance-weighted surrogate draws.
"""

__version__ = "0.1.0"

from .errors import GlassError
from .model import (
    Dataset,
    HalfSequence,
    Hyperparams,
    ModelParams,
    StimulusEpoch,
    TimingConfig,
    latent_channel_signal,
    log_joint,
    log_likelihood,
    log_prior,
    project_to_sphere,
    soft_threshold,
    target_probabilities,
)
from .gradients import (
    GradConfig,
    VariationalParams,
    check_gradient,
    elbo_estimate,
    elbo_gradient,
    sample_surrogate,
)
from .fitting import (
    FitConfig,
    FitResult,
    PosteriorDraws,
    calibrate_tau,
    fit,
    fit_with_calibration,
    initialize_variational,
    posterior_draws,
)
from .prediction import (
    Keyboard,
    PredictiveDist,
    attach_training_log_joints,
    decode_character,
    fuse_halfsequences,
    predictive_distribution,
    training_log_joints,
)
from .summaries import ChannelSummary, EffectSummary, summarize_channels, summarize_effects
from .simulate import (
    CorruptionConfig,
    GenerativeConfig,
    GroundTruth,
    apply_corruptions,
    default_erp_templates,
    recovery_metrics,
    simulate_from_model,
    simulate_generative,
)
from .ingest import (
    ContinuousRecording,
    FilterSpec,
    StimulusEvent,
    bandpass,
    downsample,
    extract_epochs,
    identifiability_check,
)
from .evaluate import AccuracyCurve, accuracy_by_sequences, bci_utility, n_seq_80
from .storage import (
    read_checkpoint,
    read_dataset,
    read_dataset_csv,
    read_ground_truth,
    write_checkpoint,
    write_dataset,
    write_dataset_csv,
    write_ground_truth,
)
