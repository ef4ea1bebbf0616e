"""Affine structure-from-motion factorization of a measurement matrix.

The stacked 2n x k coordinates of consistently labeled points, after
removing per-row means (the camera translations), factor into a 2n x 3
motion matrix and a 3 x k shape matrix under orthography.  The best such
factorization comes from the rank-3 truncated SVD with singular values
split evenly between the factors.  No metric upgrade is applied, so shape
and motion are recovered up to a common invertible 3 x 3 ambiguity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InfeasibleK

DEGENERATE_REL_TOL = 1e-10


@dataclass(frozen=True)
class FactorizationResult:
    """Motion, shape, translations, residual, and a degeneracy flag."""

    motion: np.ndarray  # (2n, 3)
    shape: np.ndarray  # (3, k)
    translations: np.ndarray  # (2n,)
    reprojection_rms: float
    degenerate: bool  # centered matrix had numerical rank < 3


def affine_factorize(m_tilde: np.ndarray) -> FactorizationResult:
    """Factor a 2n x k measurement matrix into motion and shape.

    Requires k >= 4 columns and n >= 2 views.  The RMS is the Frobenius
    residual of the rank-3 reconstruction divided by sqrt(2 n k).  A
    centered matrix whose third singular value is negligible against the
    first marks the result degenerate (planar or coincident geometry).
    """
    m_tilde = np.asarray(m_tilde, dtype=float)
    if m_tilde.ndim != 2 or m_tilde.shape[0] % 2:
        raise DimensionMismatch("measurement matrix must have an even number of rows")
    two_n, k = m_tilde.shape
    if k < 4:
        raise InfeasibleK(f"need at least 4 labeled points, got {k}")
    if two_n < 4:
        raise DimensionMismatch("need at least two views")

    translations = m_tilde.mean(axis=1)
    centered = m_tilde - translations[:, None]
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    scale = np.sqrt(s[:3])
    motion = u[:, :3] * scale
    shape = scale[:, None] * vt[:3]
    degenerate = bool(s[2] <= DEGENERATE_REL_TOL * max(s[0], 1e-300))
    residual = centered - motion @ shape
    rms = float(np.linalg.norm(residual) / np.sqrt(two_n * k))
    return FactorizationResult(motion, shape, translations, rms, degenerate)
