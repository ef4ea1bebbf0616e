"""Pairwise score blocks from descriptors via linear-assignment matching.

Descriptor similarity is the inner product of unit-norm columns, clamped
to [0, 1].  Each image pair keeps the assignment that maximizes total
similarity, matching min(p_i, p_j) candidates, and the binary assignment
itself becomes the score block; downstream joint optimization is what
prunes unreliable matches, so no similarity threshold is applied here.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from itertools import combinations

import numpy as np

from .assignment import solve_lap
from .errors import DimensionMismatch, MatchingError
from .model import FeatureSet, PairwiseScores


def similarity(desc_i: np.ndarray, desc_j: np.ndarray) -> np.ndarray:
    """Inner products between descriptor columns, clamped to [0, 1]."""
    desc_i = np.asarray(desc_i, dtype=float)
    desc_j = np.asarray(desc_j, dtype=float)
    if desc_i.ndim != 2 or desc_j.ndim != 2 or desc_i.shape[0] != desc_j.shape[0]:
        raise DimensionMismatch(
            f"descriptor dimensions disagree: {desc_i.shape} vs {desc_j.shape}"
        )
    return np.clip(desc_i.T @ desc_j, 0.0, 1.0)


def pairwise_match(desc_i: np.ndarray, desc_j: np.ndarray) -> np.ndarray:
    """Binary p_i x p_j match matrix maximizing total similarity.

    Exactly min(p_i, p_j) candidates are matched; the orientation with
    fewer columns is solved and transposed back if needed.
    """
    sim = similarity(desc_i, desc_j)
    p_i, p_j = sim.shape
    if p_i >= p_j:
        res = solve_lap(-sim)
        return res.as_matrix(p_i)
    res = solve_lap(-sim.T)
    return res.as_matrix(p_j).T


def scores_from_descriptors(features: list[FeatureSet], threads: int = 1) -> PairwiseScores:
    """Match every image pair of a feature list into canonical score blocks."""
    missing = [f.image_id for f in features if f.descriptors is None]
    if missing:
        raise MatchingError(f"images without descriptors: {missing}")
    sizes = tuple(f.p for f in features)
    pairs = list(combinations(range(len(features)), 2))

    def match(pair: tuple[int, int]) -> np.ndarray:
        i, j = pair
        return pairwise_match(features[i].descriptors, features[j].descriptors)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            matched = list(pool.map(match, pairs))
    else:
        matched = [match(pair) for pair in pairs]
    blocks = {pair: block.astype(float) for pair, block in zip(pairs, matched)}
    return PairwiseScores(blocks, sizes)
