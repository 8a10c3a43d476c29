"""Command-line driver: simulate, fit, predict, summarize, evaluate.

Every command is a pure function of (inputs, config, seed): outputs are
byte-identical across reruns, and each output directory receives an echo of
the fully resolved configuration plus the tool version.

Exit codes: 0 success, 2 configuration error, 3 non-finite training failure,
4 dimension mismatch between a model and a dataset.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import DimensionMismatch, InvalidConfig, NonFiniteGradient
from .evaluate import accuracy_by_sequences, bci_utility, n_seq_80, read_score_file, decode_from_scores
from .experiments import (
    PredictionProtocol,
    RecoveryProtocol,
    keep_first_sequences,
    predict_characters,
    recovery_ground_truth,
    recovery_template_config,
    run_sensitivity_grid,
)
from .fitting import FitConfig, fit, posterior_draws, tau_from_baseline_medians
from .gradients import GradConfig
from .ingest import identifiability_check
from .model import COLUMN, ROW, Dataset, Hyperparams
from .prediction import (
    Keyboard,
    attach_training_log_joints,
    fuse_halfsequences,
    predictive_distribution,
)
from .rng import STREAM_BASELINE, STREAM_DRAWS, derived_seed
from .simulate import (
    CorruptionConfig,
    GenerativeConfig,
    GroundTruth,
    apply_corruptions,
    default_erp_templates,
    simulate_from_model,
    simulate_generative,
)
from .storage import (
    read_checkpoint,
    read_dataset,
    write_checkpoint,
    write_dataset,
    write_ground_truth,
)
from .summaries import summarize_channels, summarize_effects


class CliError(Exception):
    """Carries the exit code of a failed command."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

_SIMULATE_KEYS = {
    "preset", "n_channels", "n_times", "sample_rate", "n_characters", "n_sequences",
    "ar_coef", "noise_var", "spatial_corr", "channel_gains", "seed",
    "erp_target", "erp_nontarget", "corruption",
}
_CORRUPTION_KEYS = {"drift_prob", "noisy_ar_coef", "noisy_var", "apply_drift", "apply_noise"}
_HYPER_KEYS = {"tau", "cauchy_scale", "delta_prior", "shrinkage_ratio"}
_FIT_KEYS = {"iterations", "step_size", "adam_beta1", "adam_beta2", "adam_eps",
             "trace_every", "mc_samples", "relax_temperature", "less_training"}
_PREDICT_KEYS = {"n_draws", "unweighted"}
_TOP_KEYS = {"seed", "simulate", "hyper", "fit", "predict", "paths"}
_PATH_KEYS = {"data", "train_data", "model", "out", "scores"}

PRESETS = ("sim1-standard", "sim1-less", "attention-drift", "noisy-eeg",
           "sim2-moderate", "sim2-high")


def _check_keys(section: dict, allowed: set, where: str):
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise InvalidConfig(f"unknown key {unknown[0]!r} in {where} "
                            f"(allowed: {', '.join(sorted(allowed))})")


class RunConfig:
    """Validated configuration: raw sections plus derived config objects."""

    def __init__(self, doc: dict):
        if not isinstance(doc, dict):
            raise InvalidConfig("configuration root must be a JSON object")
        _check_keys(doc, _TOP_KEYS, "the top level")
        self.seed = int(doc.get("seed", 0))
        self.simulate = dict(doc.get("simulate", {}))
        _check_keys(self.simulate, _SIMULATE_KEYS, "'simulate'")
        self.corruption = dict(self.simulate.get("corruption", {}))
        _check_keys(self.corruption, _CORRUPTION_KEYS, "'simulate.corruption'")
        hyper_doc = dict(doc.get("hyper", {}))
        _check_keys(hyper_doc, _HYPER_KEYS, "'hyper'")
        self.tau = hyper_doc.pop("tau", None)
        self.shrinkage_ratio = hyper_doc.pop("shrinkage_ratio", 0.5)
        self.hyper = Hyperparams(tau=0.0, **hyper_doc)
        fit_doc = dict(doc.get("fit", {}))
        _check_keys(fit_doc, _FIT_KEYS, "'fit'")
        self.less_training = fit_doc.pop("less_training", None)
        grad_kwargs = {k: fit_doc.pop(k) for k in ("mc_samples", "relax_temperature")
                       if k in fit_doc}
        self.fit = FitConfig(grad=GradConfig(seed=self.seed, **grad_kwargs), **fit_doc)
        predict_doc = dict(doc.get("predict", {}))
        _check_keys(predict_doc, _PREDICT_KEYS, "'predict'")
        self.n_draws = int(predict_doc.get("n_draws", 2000))
        self.unweighted = bool(predict_doc.get("unweighted", False))
        self.paths = dict(doc.get("paths", {}))
        _check_keys(self.paths, _PATH_KEYS, "'paths'")

    def resolved(self) -> dict:
        return {
            "tool_version": __version__,
            "seed": self.seed,
            "simulate": self.simulate,
            "hyper": {**asdict(self.hyper), "tau": self.tau,
                      "shrinkage_ratio": self.shrinkage_ratio},
            "fit": {
                "iterations": self.fit.iterations, "step_size": self.fit.step_size,
                "adam_beta1": self.fit.adam_beta1, "adam_beta2": self.fit.adam_beta2,
                "adam_eps": self.fit.adam_eps, "trace_every": self.fit.trace_every,
                "mc_samples": self.fit.grad.mc_samples,
                "relax_temperature": self.fit.grad.relax_temperature,
                "less_training": self.less_training,
            },
            "predict": {"n_draws": self.n_draws, "unweighted": self.unweighted},
            "paths": self.paths,
        }


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig({})
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CliError(2, f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    except OSError as exc:
        raise CliError(2, f"cannot read config: {exc}")
    try:
        return RunConfig(doc)
    except (InvalidConfig, TypeError, ValueError) as exc:
        raise CliError(2, f"{path}: {exc}")


def _write_resolved(out_dir: Path, config: RunConfig):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.resolved.json").write_text(
        json.dumps(config.resolved(), sort_keys=True, indent=1) + "\n")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _preset_config(name: str, seed: int) -> dict:
    if name in ("sim2-moderate", "sim2-high"):
        noise = 20.0 if name == "sim2-moderate" else 40.0
        return {"kind": "generative", "noise_var": noise}
    if name in ("sim1-standard", "sim1-less", "attention-drift", "noisy-eeg"):
        return {"kind": "label-switch", "scenario": name}
    raise InvalidConfig(f"unknown preset {name!r} (available: {', '.join(PRESETS)})")


def cmd_simulate(config: RunConfig, out_dir: Path) -> Path:
    sim = dict(config.simulate)
    sim.pop("corruption", None)
    preset = sim.pop("preset", None)
    seed = int(sim.pop("seed", config.seed))
    corruption_doc = dict(config.corruption)

    if preset is not None and preset not in PRESETS:
        raise CliError(2, f"unknown preset {preset!r} (available: {', '.join(PRESETS)})")

    if preset in ("sim1-standard", "sim1-less", "attention-drift", "noisy-eeg"):
        protocol = RecoveryProtocol()
        theta_true, tau_true, gains = recovery_ground_truth(protocol)
        template_cfg = recovery_template_config(protocol, gains, derived_seed(seed, 10))
        template, _ = simulate_generative(template_cfg)
        data = simulate_from_model(theta_true, Hyperparams(tau=tau_true), template,
                                   seed=derived_seed(seed, 11))
        if preset == "sim1-less":
            data = keep_first_sequences(data, protocol.less_training_sequences)
        elif preset == "attention-drift":
            corruption_doc.setdefault("apply_drift", True)
        elif preset == "noisy-eeg":
            corruption_doc.setdefault("apply_noise", True)
        truth = GroundTruth(theta_true=theta_true, tau_true=tau_true,
                            target_cells=_cells_from_labels(data), seed=seed)
    else:
        defaults = PredictionProtocol()
        noise_var = float(sim.pop("noise_var", 20.0))
        if preset == "sim2-high":
            noise_var = 40.0
        elif preset == "sim2-moderate":
            noise_var = 20.0
        n_times = int(sim.pop("n_times", defaults.n_times))
        sample_rate = float(sim.pop("sample_rate", defaults.sample_rate))
        target_wave, nontarget_wave = default_erp_templates(n_times, sample_rate)
        if "erp_target" in sim:
            target_wave = np.asarray(sim.pop("erp_target"), dtype=np.float64)
        if "erp_nontarget" in sim:
            nontarget_wave = np.asarray(sim.pop("erp_nontarget"), dtype=np.float64)
        gains = sim.pop("channel_gains", None)
        try:
            gen = GenerativeConfig(
                n_channels=int(sim.pop("n_channels", defaults.n_channels)),
                n_times=n_times,
                sample_rate=sample_rate,
                n_characters=int(sim.pop("n_characters", defaults.n_characters)),
                n_sequences=int(sim.pop("n_sequences", defaults.n_sequences)),
                erp_target=target_wave,
                erp_nontarget=nontarget_wave,
                ar_coef=float(sim.pop("ar_coef", defaults.ar_coef)),
                noise_var=noise_var,
                spatial_corr=float(sim.pop("spatial_corr", defaults.spatial_corr)),
                channel_gains=None if gains is None else np.asarray(gains, dtype=np.float64),
                seed=seed,
            )
        except (ValueError, DimensionMismatch) as exc:
            raise CliError(2, f"invalid simulate configuration: {exc}")
        data, truth = simulate_generative(gen)

    if corruption_doc:
        corruption = CorruptionConfig(**corruption_doc)
        data = apply_corruptions(data, corruption, seed=derived_seed(seed, 12))

    _write_resolved(out_dir, config)
    data_path = out_dir / "dataset.bin"
    write_dataset(data_path, data)
    write_ground_truth(out_dir / "ground_truth.json", truth,
                       extra={"preset": preset} if preset else None)
    return data_path


def _cells_from_labels(data: Dataset):
    cells: Dict[int, list] = {}
    for half in data.half_sequences:
        cell = cells.setdefault(half.character, [None, None])
        cell[0 if half.half_type == ROW else 1] = half.target
    return tuple((r, c) for r, c in (cells[ch] for ch in sorted(cells)))


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _load_dataset(path: str) -> Dataset:
    try:
        return read_dataset(path)
    except FileNotFoundError:
        raise CliError(2, f"dataset not found: {path}")
    except InvalidConfig as exc:
        raise CliError(2, str(exc))


def cmd_fit(data_path: str, config: RunConfig, out_dir: Path) -> List[Path]:
    data = _load_dataset(data_path)
    if config.less_training is not None:
        data = keep_first_sequences(data, int(config.less_training))
    report = identifiability_check(data)
    if not report.full_column_rank:
        print(f"warning: {report.message}", file=sys.stderr)
    _write_resolved(out_dir, config)

    ratios = config.shrinkage_ratio
    ratio_grid = list(ratios) if isinstance(ratios, (list, tuple)) else None
    try:
        if config.tau is not None:
            hyper = replace(config.hyper, tau=float(config.tau))
            result = fit(data, hyper, config.fit)
            paths = [_write_fit_outputs(out_dir, "", result, hyper, config, data)]
        else:
            baseline_seed = derived_seed(config.fit.grad.seed, STREAM_BASELINE)
            baseline_cfg = replace(config.fit, grad=replace(config.fit.grad, seed=baseline_seed))
            baseline = fit(data, replace(config.hyper, tau=0.0), baseline_cfg)
            medians = np.median(posterior_draws(baseline.xi, config.n_draws,
                                                baseline_seed).beta_raw, axis=0)
            paths = []
            for ratio in (ratio_grid if ratio_grid is not None else [float(ratios)]):
                tau = tau_from_baseline_medians(medians, float(ratio))
                hyper = replace(config.hyper, tau=tau)
                result = fit(data, hyper, config.fit)
                suffix = f"_ratio{ratio:g}" if ratio_grid is not None else ""
                paths.append(_write_fit_outputs(out_dir, suffix, result, hyper, config, data))
    except NonFiniteGradient as exc:
        raise CliError(3, f"training failed: {exc}")
    except DimensionMismatch as exc:
        raise CliError(4, str(exc))
    return paths


def _write_fit_outputs(out_dir: Path, suffix: str, result, hyper: Hyperparams,
                       config: RunConfig, data: Dataset) -> Path:
    model_path = out_dir / f"checkpoint{suffix}.json"
    write_checkpoint(model_path, result.xi, hyper, config.fit, result.seed,
                     channel_names=data.channel_names)
    with open(out_dir / f"trace{suffix}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "elbo"])
        for it, value in result.trace:
            writer.writerow([it, repr(value)])
    return model_path


# ---------------------------------------------------------------------------
# predict / summarize / evaluate
# ---------------------------------------------------------------------------

def _load_model(path: str):
    try:
        return read_checkpoint(path)
    except FileNotFoundError:
        raise CliError(2, f"model not found: {path}")
    except (InvalidConfig, KeyError, TypeError, ValueError) as exc:
        raise CliError(2, f"cannot read checkpoint {path}: {exc}")


def _model_draws(config: RunConfig, model_path: str, train_path: Optional[str]):
    xi, hyper, fit_cfg, seed, channel_names = _load_model(model_path)
    draws = posterior_draws(xi, config.n_draws, derived_seed(seed, STREAM_DRAWS))
    if train_path is not None:
        train = _load_dataset(train_path)
        try:
            draws = attach_training_log_joints(draws, train, hyper)
        except DimensionMismatch as exc:
            raise CliError(4, str(exc))
    return draws, hyper, channel_names


def cmd_predict(model_path: str, data_path: str, config: RunConfig, out_dir: Path,
                train_path: Optional[str]) -> Path:
    if train_path is None and not config.unweighted:
        raise CliError(2, "predict needs --train-data for importance weighting "
                          "(or set predict.unweighted)")
    draws, hyper, _ = _model_draws(config, model_path, train_path)
    data = _load_dataset(data_path)
    kb = Keyboard()
    by_char: dict = {}
    for half in data.half_sequences:
        by_char.setdefault(half.character, {ROW: [], COLUMN: []})[half.half_type].append(half)

    _write_resolved(out_dir, config)
    pred_path = out_dir / "predictions.csv"
    try:
        with open(pred_path, "w", newline="") as fh, \
                open(out_dir / "decoded.csv", "w", newline="") as fh2:
            writer = csv.writer(fh)
            writer.writerow(["c", "u", "n_seq_used", "argmax_j"]
                            + [f"prob_{j}" for j in range(1, 7)] + ["ess"])
            decoder = csv.writer(fh2)
            decoder.writerow(["c", "n_seq_used", "row", "col", "symbol"])
            for c in sorted(by_char):
                sides = by_char[c]
                dists = {}
                for u in (ROW, COLUMN):
                    halves = sorted(sides[u], key=lambda h: h.sequence)
                    dists[u] = [predictive_distribution(draws, draws.train_log_joint, h,
                                                        hyper, unweighted=config.unweighted)
                                for h in halves]
                max_n = max(len(dists[ROW]), len(dists[COLUMN]))
                for n in range(1, max_n + 1):
                    fused = {}
                    for u in (ROW, COLUMN):
                        if not dists[u]:
                            continue
                        probs = fuse_halfsequences(dists[u][:n])
                        fused[u] = probs
                        mean_ess = float(np.mean([d.ess for d in dists[u][:n]]))
                        writer.writerow([c, u, n, int(np.argmax(probs)) + 1]
                                        + [repr(float(p)) for p in probs]
                                        + [repr(mean_ess)])
                    if ROW in fused and COLUMN in fused:
                        row_j = int(np.argmax(fused[ROW])) + 1
                        col_j = int(np.argmax(fused[COLUMN])) + 1
                        decoder.writerow([c, n, row_j, col_j, kb.symbol(row_j, col_j)])
    except DimensionMismatch as exc:
        raise CliError(4, str(exc))
    return pred_path


def cmd_summarize(model_path: str, config: RunConfig, out_dir: Path) -> Path:
    xi, hyper, fit_cfg, seed, channel_names = _load_model(model_path)
    draws = posterior_draws(xi, config.n_draws, derived_seed(seed, STREAM_DRAWS))
    effects = summarize_effects(draws, hyper)
    channels = summarize_channels(draws)
    names = list(channel_names) if channel_names else [f"ch{e + 1}" for e in range(xi.n_channels)]

    _write_resolved(out_dir, config)
    with open(out_dir / "effects.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "median", "lower", "upper", "prob_nonzero"])
        for m in range(xi.n_times):
            writer.writerow([m + 1, repr(float(effects.median[m])), repr(float(effects.lower[m])),
                             repr(float(effects.upper[m])), repr(float(effects.prob_nonzero[m]))])
    with open(out_dir / "channels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "selection_prob", "weight", "important"])
        for e, name in enumerate(names):
            writer.writerow([name, repr(float(channels.selection_prob[e])),
                             repr(float(channels.weight[e])), int(channels.important[e])])
    plot_doc = {
        "effect_median": effects.median.tolist(),
        "effect_lower": effects.lower.tolist(),
        "effect_upper": effects.upper.tolist(),
        "prob_nonzero": effects.prob_nonzero.tolist(),
        "channel_weights": {name: float(w) for name, w in zip(names, channels.weight)},
        "selection_prob": {name: float(p) for name, p in zip(names, channels.selection_prob)},
    }
    plot_path = out_dir / "plot_data.json"
    plot_path.write_text(json.dumps(plot_doc, sort_keys=True, indent=1) + "\n")
    return plot_path


def cmd_evaluate(data_path: str, config: RunConfig, out_dir: Path,
                 model_path: Optional[str], train_path: Optional[str],
                 scores_path: Optional[str]) -> Path:
    data = _load_dataset(data_path)
    if not data.is_labeled:
        raise CliError(2, "evaluation needs a labeled dataset for the truths")
    kb = Keyboard()
    cells = _cells_from_labels(data)
    truths = [kb.symbol(r, c) for r, c in cells]
    n_max = max(h.sequence for h in data.half_sequences)

    if scores_path is not None:
        scores = read_score_file(scores_path)
        characters = sorted({h.character for h in data.half_sequences})
        decoded = {n: decode_from_scores(scores, characters, n, kb)
                   for n in range(1, n_max + 1)}
    elif model_path is not None:
        draws, hyper, _ = _model_draws(config, model_path, train_path)
        if train_path is None and not config.unweighted:
            raise CliError(2, "evaluate needs --train-data for importance weighting "
                              "(or set predict.unweighted)")
        try:
            decoded = predict_characters(draws, None, data, hyper, kb,
                                         n_seq_values=range(1, n_max + 1),
                                         unweighted=config.unweighted)
        except DimensionMismatch as exc:
            raise CliError(4, str(exc))
    else:
        raise CliError(2, "evaluate needs a model or a score file")

    curve = accuracy_by_sequences(decoded, truths)
    _write_resolved(out_dir, config)
    metrics_path = out_dir / "metrics.csv"
    with open(metrics_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n_seq", "mean_acc", "sd", "utility"])
        for n, acc, sd in zip(curve.n_seq, curve.mean, curve.sd):
            writer.writerow([int(n), repr(float(acc)), repr(float(sd)),
                             repr(bci_utility(float(acc), int(n), data.timing))])
    reach = n_seq_80(curve)
    (out_dir / "summary.json").write_text(json.dumps({
        "n_seq_80": reach,
        "max_utility": max(bci_utility(float(a), int(n), data.timing)
                           for n, a in zip(curve.n_seq, curve.mean)),
    }, sort_keys=True) + "\n")
    return metrics_path


# ---------------------------------------------------------------------------
# sensitivity grid
# ---------------------------------------------------------------------------

def cmd_sensitivity(data_path: str, config: RunConfig, out_dir: Path,
                    test_path: Optional[str], ratios: Sequence[float]) -> Path:
    train = _load_dataset(data_path)
    test = truths = None
    if test_path is not None:
        test = _load_dataset(test_path)
        kb = Keyboard()
        truths = [kb.symbol(r, c) for r, c in _cells_from_labels(test)]
    try:
        rows = run_sensitivity_grid(train, test, truths, ratios, config.fit,
                                    config.hyper, n_draws=config.n_draws)
    except NonFiniteGradient as exc:
        raise CliError(3, f"training failed: {exc}")
    _write_resolved(out_dir, config)
    table_path = out_dir / "sensitivity.csv"
    with open(table_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["ratio", "tau"] + (["n_seq", "accuracy"] if test is not None else [])
        writer.writerow(header)
        for row in rows:
            line = [repr(row["ratio"]), repr(row["tau"])]
            if test is not None:
                line += [row["n_seq"], repr(row["accuracy"])]
            writer.writerow(line)
    return table_path


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _set_threads(n: Optional[int]):
    if n is None:
        return
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(limits=int(n))
    except ImportError:
        print("warning: threadpoolctl unavailable; set OMP_NUM_THREADS before launch",
              file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glass",
        description="Bayesian latent-channel P300 decoding: simulate, fit, predict, "
                    "summarize, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--threads", type=int, help="cap BLAS thread count")
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--preset", choices=PRESETS, help="named simulation scenario")

    p = sub.add_parser("fit", help="train a model on a labeled dataset")
    common(p)
    p.add_argument("data", help="dataset file")
    p.add_argument("--iterations", type=int)
    p.add_argument("--tau", type=float, help="fixed soft-threshold (skips calibration)")
    p.add_argument("--shrinkage-ratio", type=float, nargs="+",
                   help="calibration ratio(s); several values fit one model per ratio")
    p.add_argument("--less-training", type=int, nargs="?", const=3,
                   help="keep only the first K sequences per character (default 3)")

    p = sub.add_parser("predict", help="posterior predictions for new data")
    common(p)
    p.add_argument("model", help="checkpoint file")
    p.add_argument("data", help="dataset file to predict")
    p.add_argument("--train-data", help="training dataset (for importance weights)")
    p.add_argument("--n-draws", type=int)
    p.add_argument("--unweighted", action="store_true",
                   help="plain surrogate averaging instead of importance weighting")

    p = sub.add_parser("summarize", help="posterior effect and channel summaries")
    common(p)
    p.add_argument("model", help="checkpoint file")
    p.add_argument("--n-draws", type=int)

    p = sub.add_parser("evaluate", help="accuracy and utility on labeled data")
    common(p)
    p.add_argument("data", help="labeled dataset file")
    p.add_argument("--model", help="checkpoint file")
    p.add_argument("--train-data", help="training dataset (for importance weights)")
    p.add_argument("--scores", help="external per-stimulus score CSV (c,s,u,j,score)")
    p.add_argument("--n-draws", type=int)
    p.add_argument("--unweighted", action="store_true")

    p = sub.add_parser("sensitivity", help="shrinkage-ratio grid")
    common(p)
    p.add_argument("data", help="training dataset file")
    p.add_argument("--test-data", help="labeled test dataset to score each ratio")
    p.add_argument("--ratios", type=float, nargs="+", default=[0.0, 0.5, 1.0, 2.0])
    return parser


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        config.seed = int(args.seed)
        config.fit = replace(config.fit, grad=replace(config.fit.grad, seed=config.seed))
    if getattr(args, "iterations", None) is not None:
        config.fit = replace(config.fit, iterations=int(args.iterations))
    if getattr(args, "tau", None) is not None:
        config.tau = float(args.tau)
    if getattr(args, "shrinkage_ratio", None):
        ratios = list(args.shrinkage_ratio)
        config.shrinkage_ratio = ratios if len(ratios) > 1 else ratios[0]
    if getattr(args, "less_training", None) is not None:
        config.less_training = int(args.less_training)
    if getattr(args, "n_draws", None) is not None:
        config.n_draws = int(args.n_draws)
    if getattr(args, "unweighted", False):
        config.unweighted = True
    if getattr(args, "preset", None) is not None:
        config.simulate["preset"] = args.preset
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _set_threads(args.threads)
        config = _apply_overrides(load_config(args.config), args)
        out_dir = Path(args.out)
        if args.command == "simulate":
            cmd_simulate(config, out_dir)
        elif args.command == "fit":
            cmd_fit(args.data, config, out_dir)
        elif args.command == "predict":
            cmd_predict(args.model, args.data, config, out_dir, args.train_data)
        elif args.command == "summarize":
            cmd_summarize(args.model, config, out_dir)
        elif args.command == "evaluate":
            cmd_evaluate(args.data, config, out_dir, args.model, args.train_data, args.scores)
        elif args.command == "sensitivity":
            cmd_sensitivity(args.data, config, out_dir, args.test_data, args.ratios)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except InvalidConfig as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DimensionMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
