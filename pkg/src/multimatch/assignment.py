"""Minimum-cost rectangular linear assignment with deterministic tie-breaking.

Given a p x k cost matrix with p >= k, every column is assigned a distinct
row so that the total cost is minimal.  Among equal-cost optima the solver
returns the lexicographically smallest column-major row tuple, so results
are reproducible across runs and platforms.

The core is a shortest-augmenting-path solver with dual potentials.
Rectangular inputs are padded to square with a finite sentinel (max entry
plus one) instead of infinity, which keeps the potential updates free of
overflow.  The potentials then drive the tie-break pass: a row can replace
the chosen one in some optimal solution only if its reduced cost is zero,
so for generic costs the pass inspects nothing and costs nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InfeasibleK, NonFiniteEntry

TIE_TOL = 1e-9


@dataclass(frozen=True)
class AssignmentResult:
    """Chosen row per column plus the total cost of the selection."""

    column_to_row: np.ndarray  # (k,) distinct row indices
    total_cost: float

    def as_matrix(self, p: int) -> np.ndarray:
        """Binary p x k matrix with a one at each (chosen row, column)."""
        k = self.column_to_row.shape[0]
        x = np.zeros((p, k), dtype=int)
        x[self.column_to_row, np.arange(k)] = 1
        return x


def solve_lap(cost: np.ndarray) -> AssignmentResult:
    """Assign each column of ``cost`` to a distinct row at minimum total cost.

    Requires at least as many rows as columns and finite entries.  Ties are
    broken toward the lexicographically smallest (column 0 first) row tuple.
    """
    cost = np.ascontiguousarray(cost, dtype=float)
    if cost.ndim != 2:
        raise DimensionMismatch(f"cost must be a matrix, got shape {cost.shape}")
    p, k = cost.shape
    if k == 0:
        return AssignmentResult(np.empty(0, dtype=np.intp), 0.0)
    if p < k:
        raise InfeasibleK(f"cannot assign {k} columns among {p} rows")
    if not np.isfinite(cost).all():
        raise NonFiniteEntry("cost matrix contains non-finite entries")

    col_to_row, u, v = _solve_padded(cost)
    col_to_row = _lexicographic_refine(cost, col_to_row, u, v)
    total = float(cost[col_to_row, np.arange(k)].sum())
    return AssignmentResult(col_to_row, total)


def discretize(y: np.ndarray) -> np.ndarray:
    """Round a p x k score block to the closest valid binary selection.

    Solves the assignment on the negated scores, so the result keeps the
    largest entries subject to one distinct row per column.
    """
    y = np.asarray(y, dtype=float)
    res = solve_lap(-y)
    return res.as_matrix(y.shape[0])


def _solve_padded(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve the rectangular problem; returns (col_to_row, row duals, col duals)."""
    p, k = cost.shape
    if p == k:
        padded = cost
    else:
        # Dummy columns all share one sentinel value, so they shift every
        # completion by the same constant and cannot disturb the optimum.
        sentinel = float(cost.max()) + 1.0
        padded = np.full((p, p), sentinel)
        padded[:, :k] = cost
    row_of, u, v = _solve_square(padded)
    return row_of[:k], u, v[:k]


def _solve_square(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shortest-augmenting-path assignment on a square matrix.

    Returns the column-to-row map and optimal dual potentials (u, v) with
    a[i, j] - u[i] - v[j] >= 0 for all pairs and equality on matches.
    Scans work on full-length vectors; visited columns carry an infinite
    distance so they drop out of both the relaxation and the argmin.
    """
    n = a.shape[0]
    u = np.zeros(n)
    v = np.zeros(n)
    row_of = np.full(n, -1, dtype=np.intp)
    scanned = np.empty(n, dtype=np.intp)  # visited columns, in visit order
    for i in range(n):
        minv = np.full(n, np.inf)
        way = np.full(n, -1, dtype=np.intp)  # predecessor column; -1 is the root
        n_scanned = 0
        i0 = i
        j_prev = -1
        while True:
            cur = a[i0] - (u[i0] + v)
            if n_scanned:
                cur[scanned[:n_scanned]] = np.inf
            better = cur < minv
            minv[better] = cur[better]
            way[better] = j_prev
            j1 = int(np.argmin(minv))  # ties resolve to the lowest column
            delta = minv[j1]
            visited = scanned[:n_scanned]
            u[row_of[visited]] += delta
            v[visited] -= delta
            u[i] += delta
            minv -= delta  # infinities stay infinite on visited columns
            minv[j1] = np.inf
            scanned[n_scanned] = j1
            n_scanned += 1
            if row_of[j1] < 0:
                while True:  # augment along the alternating path
                    jp = way[j1]
                    if jp < 0:
                        row_of[j1] = i
                        break
                    row_of[j1] = row_of[jp]
                    j1 = jp
                break
            i0 = int(row_of[j1])
            j_prev = j1
    return row_of, u, v


def _lexicographic_refine(
    cost: np.ndarray, col_to_row: np.ndarray, u: np.ndarray, v: np.ndarray
) -> np.ndarray:
    """Pick the lexicographically smallest column-major optimum.

    Columns are fixed left to right.  For column c only rows below the
    current choice with near-zero reduced cost can belong to another
    optimum (complementary slackness), and each such row is verified by
    re-solving the residual problem on the remaining rows and columns.
    """
    p, k = cost.shape
    tol = TIE_TOL * max(1.0, float(np.abs(cost).max()))
    cur = np.array(col_to_row, dtype=np.intp)
    value = float(cost[cur, np.arange(k)].sum())
    fixed = np.zeros(p, dtype=bool)
    prefix = 0.0
    for c in range(k):
        r_cur = int(cur[c])
        reduced = cost[:r_cur, c] - u[:r_cur] - v[c]
        candidates = np.flatnonzero(~fixed[:r_cur] & (reduced <= tol))
        n_rest = k - c - 1
        for r in candidates:
            r = int(r)
            rows_left = np.flatnonzero(~fixed)
            rows_left = rows_left[rows_left != r]
            if n_rest:
                sub = cost[np.ix_(rows_left, np.arange(c + 1, k))]
                # column minima bound the residual from below (row reuse
                # allowed), which rejects most degenerate-dual candidates
                # without an assignment solve
                bound = prefix + cost[r, c] + float(sub.min(axis=0).sum())
                if bound > value + tol:
                    continue
                sub_rows, _, _ = _solve_padded(sub)
                sub_total = float(sub[sub_rows, np.arange(n_rest)].sum())
            else:
                sub_rows = np.empty(0, dtype=np.intp)
                sub_total = 0.0
            if prefix + cost[r, c] + sub_total <= value + tol:
                cur[c] = r
                if n_rest:
                    cur[c + 1 :] = rows_left[sub_rows]
                break
        fixed[cur[c]] = True
        prefix += cost[cur[c], c]
    return cur
