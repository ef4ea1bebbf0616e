"""Problem model: feature sets, pairwise score blocks, and selection labelings.

A matching problem is posed on a collection of n images.  Image i
contributes p_i candidate feature points (2D coordinates, optionally a
unit-norm descriptor per candidate) and every image pair (i, j) carries a
p_i x p_j score block whose entries grade candidate-to-candidate matches.
A solution selects k candidates per image and labels them consistently,
encoded as per-image binary matrices with row sums at most one and column
sums exactly one (each of the k labels is realized once in every image).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, InfeasibleK, NonFiniteEntry, MatchingError

UNIT_NORM_TOL = 1e-6
SCORE_RANGE_SLACK = 1e-9


@dataclass(frozen=True)
class BlockLayout:
    """Row layout of per-image blocks inside stacked m x k matrices."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        if not self.sizes or any(int(p) < 1 for p in self.sizes):
            raise DimensionMismatch("every image must contribute at least one candidate")
        object.__setattr__(self, "sizes", tuple(int(p) for p in self.sizes))

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def m(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> tuple[int, ...]:
        out, acc = [], 0
        for p in self.sizes:
            out.append(acc)
            acc += p
        return tuple(out)

    def block_slice(self, i: int) -> slice:
        off = self.offsets[i]
        return slice(off, off + self.sizes[i])

    def split(self, stacked: np.ndarray) -> list[np.ndarray]:
        """Views of the per-image row blocks of an (m, ...) array."""
        return [stacked[self.block_slice(i)] for i in range(self.n)]


@dataclass
class FeatureSet:
    """Feature candidates of one image: coordinates and optional descriptors."""

    image_id: str
    coordinates: np.ndarray  # (2, p)
    descriptors: np.ndarray | None = None  # (d, p), unit-norm columns

    def __post_init__(self):
        self.coordinates = np.asarray(self.coordinates, dtype=float)
        if self.coordinates.ndim != 2 or self.coordinates.shape[0] != 2:
            raise DimensionMismatch(
                f"{self.image_id}: coordinates must be 2 x p, got {self.coordinates.shape}"
            )
        if self.coordinates.shape[1] < 1:
            raise DimensionMismatch(f"{self.image_id}: at least one candidate required")
        if not np.isfinite(self.coordinates).all():
            raise NonFiniteEntry(f"{self.image_id}: non-finite coordinate")
        if self.descriptors is not None:
            self.descriptors = np.asarray(self.descriptors, dtype=float)
            if self.descriptors.ndim != 2 or self.descriptors.shape[1] != self.p:
                raise DimensionMismatch(
                    f"{self.image_id}: descriptors must have one column per candidate"
                )
            if not np.isfinite(self.descriptors).all():
                raise NonFiniteEntry(f"{self.image_id}: non-finite descriptor")
            norms = np.linalg.norm(self.descriptors, axis=0)
            if np.abs(norms - 1.0).max() > UNIT_NORM_TOL:
                raise MatchingError(
                    f"{self.image_id}: descriptor columns must have unit norm"
                )

    @property
    def p(self) -> int:
        return self.coordinates.shape[1]


@dataclass
class PairwiseScores:
    """Score blocks keyed by ordered image-index pairs.

    ``blocks[(i, j)]`` is the p_i x p_j score matrix between images i and j.
    Canonical (validated) instances store keys with i <= j only, diagonal
    blocks equal to the identity, and symmetric content; use
    :func:`validate_instance` to canonicalize raw input.
    """

    blocks: dict[tuple[int, int], np.ndarray]
    sizes: tuple[int, ...]

    def __post_init__(self):
        self.sizes = tuple(int(p) for p in self.sizes)
        self.blocks = {
            (int(i), int(j)): np.asarray(b, dtype=float) for (i, j), b in self.blocks.items()
        }
        for i, j in self.blocks:
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise DimensionMismatch(f"block key ({i}, {j}) out of range for n={self.n}")

    @property
    def n(self) -> int:
        return len(self.sizes)

    @property
    def m(self) -> int:
        return sum(self.sizes)

    def block(self, i: int, j: int) -> np.ndarray:
        """Return the (i, j) block, transposing a stored (j, i) block if needed."""
        if (i, j) in self.blocks:
            return self.blocks[(i, j)]
        if (j, i) in self.blocks:
            return self.blocks[(j, i)].T
        raise KeyError((i, j))


@dataclass
class SelectionLabeling:
    """Per-image binary selection matrices mapping candidates to k labels.

    Each assignment matrix is p_i x k with row sums <= 1 and column sums
    exactly 1, i.e. the k labels pick k distinct candidates per image.
    """

    assignments: list[np.ndarray]
    k: int

    def __post_init__(self):
        self.k = int(self.k)
        self.assignments = [np.asarray(a) for a in self.assignments]

    @property
    def n(self) -> int:
        return len(self.assignments)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(a.shape[0] for a in self.assignments)

    @property
    def layout(self) -> BlockLayout:
        return BlockLayout(self.sizes)

    def validate(self) -> None:
        """Raise if any block violates the partial-permutation constraints."""
        for i, a in enumerate(self.assignments):
            if a.ndim != 2 or a.shape[1] != self.k:
                raise DimensionMismatch(f"image {i}: assignment must have {self.k} columns")
            if a.shape[0] < self.k:
                raise InfeasibleK(f"image {i}: k={self.k} exceeds p={a.shape[0]}")
            if not np.isin(a, (0, 1)).all():
                raise MatchingError(f"image {i}: assignment entries must be binary")
            if (a.sum(axis=1) > 1).any():
                raise MatchingError(f"image {i}: some candidate carries multiple labels")
            if (a.sum(axis=0) != 1).any():
                raise MatchingError(f"image {i}: every label must be used exactly once")

    def stacked(self) -> np.ndarray:
        """All blocks stacked into one (m, k) float matrix."""
        return np.vstack([a.astype(float) for a in self.assignments])

    def labels(self) -> list[np.ndarray]:
        """Per-image candidate labels; -1 marks unselected candidates."""
        out = []
        for a in self.assignments:
            lab = np.full(a.shape[0], -1, dtype=int)
            rows, cols = np.nonzero(a)
            lab[rows] = cols
            out.append(lab)
        return out

    @classmethod
    def from_labels(cls, labels: list[np.ndarray], k: int) -> "SelectionLabeling":
        blocks = []
        for lab in labels:
            lab = np.asarray(lab, dtype=int)
            a = np.zeros((lab.shape[0], k), dtype=int)
            sel = lab >= 0
            a[np.nonzero(sel)[0], lab[sel]] = 1
            blocks.append(a)
        return cls(blocks, k)

    def pair_matrix(self, i: int, j: int) -> np.ndarray:
        """Induced candidate-to-candidate matches between images i and j."""
        return self.assignments[i] @ self.assignments[j].T


@dataclass
class SolverConfig:
    """All tunables of the joint solver.

    ``k`` is the number of features selected per image, ``r`` the rank bound
    of the geometric fit, ``lam`` the geometric weight, and ``rho_schedule``
    the increasing sequence of coupling weights.  Step control covers the
    projected-gradient line search; tolerances bound the inner loop, the
    per-stage sweeps, and the outer stopping rule.
    """

    k: int
    r: int = 4
    lam: float = 1.0
    rho_schedule: tuple[float, ...] = (1.0, 10.0, 100.0)
    eta0: float | None = None  # None: 1 / (||Y||_2^2 + ||W||_inf + rho)
    backtrack: float = 0.5
    armijo: float = 1e-4
    inner_tol: float = 1e-6
    max_inner: int = 500
    outer_tol: float = 1e-7
    max_sweeps: int = 100
    seed: int = 0
    init_jitter: float = 0.25  # seeded relative jitter on the uniform start
    normalize_coords: bool = True
    threads: int = 1

    def __post_init__(self):
        self.k = int(self.k)
        self.r = int(self.r)
        self.rho_schedule = tuple(float(r) for r in self.rho_schedule)
        if self.k < 1:
            raise InfeasibleK("k must be at least 1")
        if self.r < 1:
            raise MatchingError("rank bound must be at least 1")
        if self.lam < 0:
            raise MatchingError("geometric weight must be nonnegative")
        if not self.rho_schedule or min(self.rho_schedule) <= 0:
            raise MatchingError("rho schedule must be positive and nonempty")
        if any(b <= a for a, b in zip(self.rho_schedule, self.rho_schedule[1:])):
            raise MatchingError("rho schedule must be strictly increasing")
        if not (0 < self.backtrack < 1):
            raise MatchingError("backtracking factor must lie in (0, 1)")
        if not (0 < self.armijo < 1):
            raise MatchingError("Armijo constant must lie in (0, 1)")
        if self.eta0 is not None and self.eta0 <= 0:
            raise MatchingError("initial step size must be positive")
        if min(self.inner_tol, self.outer_tol) <= 0:
            raise MatchingError("tolerances must be positive")
        if min(self.max_inner, self.max_sweeps) < 1:
            raise MatchingError("iteration limits must be at least 1")
        if self.init_jitter < 0:
            raise MatchingError("init jitter must be nonnegative")
        if self.threads < 1:
            raise MatchingError("thread count must be at least 1")


@dataclass
class ProblemInstance:
    """A validated matching problem: features plus canonical score blocks."""

    features: list[FeatureSet]
    scores: PairwiseScores

    @property
    def n(self) -> int:
        return len(self.features)

    @property
    def m(self) -> int:
        return sum(f.p for f in self.features)

    @property
    def layout(self) -> BlockLayout:
        return BlockLayout(tuple(f.p for f in self.features))

    @property
    def coordinates(self) -> list[np.ndarray]:
        return [f.coordinates for f in self.features]


def validate_instance(
    features: list[FeatureSet], scores: PairwiseScores, config: SolverConfig
) -> ProblemInstance:
    """Check shapes and ranges, symmetrize the scores, and force identity diagonals.

    Off-diagonal blocks are averaged with the transpose of their reversed
    counterpart when both orders are supplied.  Diagonal blocks are replaced
    by the identity regardless of input: a candidate always matches itself.
    Raises :class:`InfeasibleK` when ``config.k`` exceeds some image's
    candidate count, :class:`DimensionMismatch` on shape disagreements, and
    :class:`NonFiniteEntry` on NaN or infinite scores.
    """
    if not features:
        raise DimensionMismatch("at least one image is required")
    ids = [f.image_id for f in features]
    if len(set(ids)) != len(ids):
        raise MatchingError("image ids must be unique")
    sizes = tuple(f.p for f in features)
    n = len(sizes)
    if config.k > min(sizes):
        raise InfeasibleK(
            f"k={config.k} exceeds the smallest candidate count {min(sizes)}"
        )
    if tuple(scores.sizes) != sizes:
        raise DimensionMismatch(
            f"score sizes {scores.sizes} disagree with feature counts {sizes}"
        )

    canonical: dict[tuple[int, int], np.ndarray] = {}
    for i in range(n):
        canonical[(i, i)] = np.eye(sizes[i])
    seen = set()
    for (i, j), block in scores.blocks.items():
        if i == j:
            if block.shape != (sizes[i], sizes[i]):
                raise DimensionMismatch(
                    f"block ({i}, {i}) has shape {block.shape}, expected square {sizes[i]}"
                )
            continue  # replaced by the identity
        a, b = min(i, j), max(i, j)
        if (a, b) in seen:
            continue
        seen.add((a, b))
        fwd = scores.blocks.get((a, b))
        rev = scores.blocks.get((b, a))
        for blk, shape, key in ((fwd, (sizes[a], sizes[b]), (a, b)), (rev, (sizes[b], sizes[a]), (b, a))):
            if blk is not None and blk.shape != shape:
                raise DimensionMismatch(
                    f"block {key} has shape {blk.shape}, expected {shape}"
                )
        if fwd is not None and rev is not None:
            merged = 0.5 * (fwd + rev.T)
        elif fwd is not None:
            merged = fwd.copy()
        else:
            merged = rev.T.copy()
        if not np.isfinite(merged).all():
            raise NonFiniteEntry(f"block ({a}, {b}) contains non-finite scores")
        if merged.min() < -SCORE_RANGE_SLACK or merged.max() > 1.0 + SCORE_RANGE_SLACK:
            raise MatchingError(f"block ({a}, {b}) has scores outside [0, 1]")
        canonical[(a, b)] = np.clip(merged, 0.0, 1.0)

    return ProblemInstance(list(features), PairwiseScores(canonical, sizes))


def assemble_block(scores: PairwiseScores) -> sp.csr_matrix:
    """Assemble the m x m symmetric score matrix from canonical blocks.

    The block at (row offset i, column offset j) equals the (i, j) score
    block; the (j, i) position receives its transpose.  Returned sparse so
    the solver's per-iteration products stay linear in the number of stored
    matches rather than quadratic in m.
    """
    layout = BlockLayout(scores.sizes)
    offsets = layout.offsets
    if any(i > j for (i, j) in scores.blocks):
        raise DimensionMismatch("assemble_block expects canonical scores (keys with i <= j)")
    rows, cols, vals = [], [], []
    for (i, j), block in scores.blocks.items():
        r, c = np.nonzero(block)
        v = block[r, c]
        rows.append(r + offsets[i])
        cols.append(c + offsets[j])
        vals.append(v)
        if i != j:
            rows.append(c + offsets[j])
            cols.append(r + offsets[i])
            vals.append(v)
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
    w = sp.coo_matrix((vals, (rows, cols)), shape=(layout.m, layout.m))
    return w.tocsr()
