"""Evaluation: correspondence recall/precision, keypoint transfer accuracy,
cycle-consistency violation, and measurement-rank diagnostics.

Correspondence metrics compare induced candidate pairs, never label ids,
so any permutation of the predicted label set leaves them unchanged.
Degenerate denominators (no true pairs for recall, no predicted pairs for
precision) score 1.0 and raise the ``vacuous`` flag instead of erroring,
which keeps batch evaluation robust.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import PairwiseScores, SelectionLabeling


@dataclass(frozen=True)
class MatchStats:
    """Pair counts between a prediction and the ground truth."""

    true_pairs: int
    predicted_pairs: int
    correct_pairs: int

    @property
    def recall(self) -> float:
        return 1.0 if self.true_pairs == 0 else self.correct_pairs / self.true_pairs

    @property
    def precision(self) -> float:
        return 1.0 if self.predicted_pairs == 0 else self.correct_pairs / self.predicted_pairs

    @property
    def vacuous(self) -> bool:
        return self.true_pairs == 0 or self.predicted_pairs == 0


def _as_labels(x) -> list[np.ndarray]:
    if isinstance(x, SelectionLabeling):
        return x.labels()
    return [np.asarray(lab, dtype=int) for lab in x]


def _label_positions(lab: np.ndarray) -> dict[int, int]:
    return {int(l): int(c) for c, l in enumerate(lab) if l >= 0}


def pair_stats(predicted, truth) -> MatchStats:
    """Count induced pairs over all image pairs (i < j) against the truth.

    Both arguments are selection labelings or per-image label arrays
    (-1 marks unlabeled candidates).  A predicted pair is correct when both
    candidates carry the same non-negative truth label.
    """
    pred = [_label_positions(lab) for lab in _as_labels(predicted)]
    true = [_label_positions(lab) for lab in _as_labels(truth)]
    if len(pred) != len(true):
        raise ValueError("prediction and truth must cover the same images")
    true_inv = [{c: l for l, c in t.items()} for t in true]
    n_true = n_pred = n_correct = 0
    for i, j in itertools.combinations(range(len(pred)), 2):
        n_true += len(true[i].keys() & true[j].keys())
        for lab in pred[i].keys() & pred[j].keys():
            n_pred += 1
            a, b = pred[i][lab], pred[j][lab]
            ta = true_inv[i].get(a)
            if ta is not None and ta == true_inv[j].get(b):
                n_correct += 1
    return MatchStats(n_true, n_pred, n_correct)


def recall(predicted, truth) -> float:
    """Correct induced pairs over ground-truth pairs."""
    return pair_stats(predicted, truth).recall


def precision(predicted, truth) -> float:
    """Correct induced pairs over predicted pairs (1.0 when none predicted)."""
    return pair_stats(predicted, truth).precision


def scores_pair_stats(scores: PairwiseScores, truth, threshold: float = 0.5) -> MatchStats:
    """Pair counts treating strong off-diagonal score entries as predictions.

    Grades the raw pairwise input the same way a labeling is graded, so
    input and solved precision are directly comparable.
    """
    true = [_label_positions(lab) for lab in _as_labels(truth)]
    true_inv = [{c: l for l, c in t.items()} for t in true]
    n = scores.n
    n_true = n_pred = n_correct = 0
    for i, j in itertools.combinations(range(n), 2):
        n_true += len(true[i].keys() & true[j].keys())
        try:
            block = scores.block(i, j)
        except KeyError:
            continue
        rows, cols = np.nonzero(block >= threshold)
        n_pred += rows.size
        for a, b in zip(rows, cols):
            ta = true_inv[i].get(int(a))
            if ta is not None and ta == true_inv[j].get(int(b)):
                n_correct += 1
    return MatchStats(n_true, n_pred, n_correct)


def selected_inlier_fraction(predicted, truth) -> float:
    """Fraction of selected candidates that the truth marks as inliers."""
    selected = inlier = 0
    for lp, lt in zip(_as_labels(predicted), _as_labels(truth)):
        sel = lp >= 0
        selected += int(sel.sum())
        inlier += int((lt[sel] >= 0).sum())
    return 1.0 if selected == 0 else inlier / selected


def pck(
    predicted_points: np.ndarray,
    truth_points: np.ndarray,
    h: float,
    w: float,
    alpha: float,
) -> float:
    """Fraction of points within alpha * max(h, w) of the truth (inclusive)."""
    predicted_points = np.asarray(predicted_points, dtype=float)
    truth_points = np.asarray(truth_points, dtype=float)
    if predicted_points.shape != truth_points.shape or predicted_points.shape[0] != 2:
        raise ValueError("point sets must both be 2 x q")
    if h <= 0 or w <= 0:
        raise ValueError("bounding box sides must be positive")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    dist = np.linalg.norm(predicted_points - truth_points, axis=0)
    return float((dist <= alpha * max(h, w)).mean())


def cycle_check(blocks, max_triplets: int | None = None, seed: int = 0) -> float:
    """Maximum triplet composition violation max_ijz ||P_ij - P_iz P_zj||_inf.

    ``blocks`` is a selection labeling or a mapping from ordered index
    pairs to match matrices (a missing direction falls back to the stored
    transpose).  All ordered triplets are checked unless ``max_triplets``
    asks for a seeded subsample.
    """
    if isinstance(blocks, SelectionLabeling):
        n = blocks.n
        get = blocks.pair_matrix
    else:
        n = max(max(i, j) for i, j in blocks.keys()) + 1
        store = dict(blocks)

        def get(i: int, j: int) -> np.ndarray:
            if (i, j) in store:
                return np.asarray(store[(i, j)])
            return np.asarray(store[(j, i)]).T

    triplets = [
        (i, z, j)
        for i, z, j in itertools.permutations(range(n), 3)
    ]
    if max_triplets is not None and len(triplets) > max_triplets:
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(triplets), size=max_triplets, replace=False)
        triplets = [triplets[t] for t in idx]
    worst = 0.0
    for i, z, j in triplets:
        viol = np.abs(get(i, j) - get(i, z) @ get(z, j)).max()
        worst = max(worst, float(viol))
    return worst


@dataclass(frozen=True)
class RankDiagnostic:
    """Singular spectrum and the energy fraction beyond the first r values."""

    singular_values: np.ndarray
    tail_energy_ratio: float


def rank_diagnostic(m_tilde: np.ndarray, r: int) -> RankDiagnostic:
    """Singular values of a measurement matrix and their rank-r tail ratio."""
    s = np.linalg.svd(np.asarray(m_tilde, dtype=float), compute_uv=False)
    total = float((s**2).sum())
    tail = float((s[r:] ** 2).sum())
    ratio = 0.0 if total == 0.0 else tail / total
    return RankDiagnostic(s, ratio)
