"""Character-level accuracy by sequence count, throughput, and score-file scoring."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import LengthMismatch
from .model import COLUMN, ROW, TimingConfig
from .prediction import Keyboard

N_KEYS = 36
STIMULI_PER_SEQUENCE = 12


@dataclass(frozen=True)
class AccuracyCurve:
    """Mean/spread of character accuracy as a function of fused sequences."""

    n_seq: np.ndarray  # (K,) sequence counts, ascending
    mean: np.ndarray  # (K,)
    sd: np.ndarray  # (K,) std across groups (0 when a single group)
    counts: np.ndarray  # (K,) characters scored at each count


def accuracy_by_sequences(decoded: Dict[int, Sequence[str]], truths: Sequence[str],
                          groups: Optional[Sequence] = None) -> AccuracyCurve:
    """Fraction of characters decoded correctly at each sequence count.

    `decoded[n]` holds the decoded character per typed character when the
    first n sequences are fused.  `groups` optionally assigns each character
    to a sentence/replicate; mean and sd are then taken across per-group
    accuracies.
    """
    truths = list(truths)
    if groups is not None and len(groups) != len(truths):
        raise LengthMismatch("groups and truths lengths differ")
    n_values = sorted(decoded)
    means, sds, counts = [], [], []
    for n in n_values:
        preds = list(decoded[n])
        if len(preds) != len(truths):
            raise LengthMismatch(
                f"{len(preds)} predictions vs {len(truths)} truths at n_seq={n}"
            )
        hits = np.array([p == t for p, t in zip(preds, truths)], dtype=np.float64)
        if groups is None:
            means.append(hits.mean())
            sds.append(0.0)
        else:
            labels = list(dict.fromkeys(groups))
            accs = [hits[[g == lab for g in groups]].mean() for lab in labels]
            means.append(float(np.mean(accs)))
            sds.append(float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0)
        counts.append(len(truths))
    return AccuracyCurve(
        n_seq=np.array(n_values, dtype=np.int64),
        mean=np.array(means),
        sd=np.array(sds),
        counts=np.array(counts, dtype=np.int64),
    )


def bci_utility(accuracy: float, n_seq: int, timing: TimingConfig,
                n_keys: int = N_KEYS) -> float:
    """Expected correctly transferred bits per second.

    U = max(0, 2P - 1) * log2(n_keys - 1) / T_char, where the selection time
    T_char covers n_seq sequences of 12 flashes plus the inter-character
    pause.  Chance-level or worse accuracy gives zero.
    """
    t_char = n_seq * STIMULI_PER_SEQUENCE * (timing.flash_ms + timing.isi_ms) / 1000.0 + timing.pause_s
    return max(0.0, 2.0 * accuracy - 1.0) * math.log2(n_keys - 1) / t_char


def max_utility(curve: AccuracyCurve, timing: TimingConfig, n_keys: int = N_KEYS) -> float:
    """Best utility over the available sequence counts."""
    return max(bci_utility(p, int(n), timing, n_keys)
               for n, p in zip(curve.n_seq, curve.mean))


def n_seq_80(curve: AccuracyCurve) -> Optional[int]:
    """Smallest sequence count reaching 80% mean accuracy, or None."""
    for n, p in zip(curve.n_seq, curve.mean):
        if p >= 0.80:
            return int(n)
    return None


# ---------------------------------------------------------------------------
# External classifier score files
# ---------------------------------------------------------------------------

def read_score_file(path) -> Dict[Tuple[int, int, str, int], float]:
    """Per-stimulus scores keyed by (c, s, u, j) from a c,s,u,j,score CSV."""
    scores: Dict[Tuple[int, int, str, int], float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader)
        if [h.strip() for h in head] != ["c", "s", "u", "j", "score"]:
            raise LengthMismatch(f"expected columns c,s,u,j,score, got {head}")
        for row in reader:
            u = row[2]
            if u not in (ROW, COLUMN):
                u = ROW if int(u) == 1 else COLUMN
            scores[(int(row[0]), int(row[1]), u, int(row[3]))] = float(row[4])
    return scores


def decode_from_scores(scores: Dict[Tuple[int, int, str, int], float],
                       characters: Sequence[int], n_seq: int, kb: Keyboard) -> List[str]:
    """Mean-of-scores fusion over the first n sequences, then argmax per axis."""
    decoded = []
    for c in characters:
        picks = {}
        for u in (ROW, COLUMN):
            sums = np.zeros(6)
            hits = 0
            for s in range(1, n_seq + 1):
                for j in range(1, 7):
                    key = (c, s, u, j)
                    if key in scores:
                        sums[j - 1] += scores[key]
                        hits += 1
            if hits == 0:
                raise LengthMismatch(f"no scores for character {c} {u} within {n_seq} sequences")
            picks[u] = int(np.argmax(sums)) + 1
        decoded.append(kb.symbol(picks[ROW], picks[COLUMN]))
    return decoded
