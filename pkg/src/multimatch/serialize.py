"""Plain-text documents for problems, labelings, ground truth, and traces.

Problems are single JSON documents: a format version, per-image records
(id, coordinates as two rows, optional descriptors), pairwise blocks as
sparse (row, col, value) coordinate lists keyed by image ids, and optional
solver defaults.  Desk-scale instances stay small and diffable this way,
and the sparse encoding keeps linear-matching blocks compact.  Ground
truth and labeling sidecars share one shape: per image, (candidate index,
label) pairs with -1 marking outliers.  Objective traces are CSV, one line
per recorded sweep.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .model import FeatureSet, PairwiseScores, SelectionLabeling
from .solver import TraceRecord

FORMAT_VERSION = 1

_DEFAULT_KEYS = ("k", "lambda", "r", "rho_schedule", "seed")


def problem_document(
    features: list[FeatureSet],
    scores: PairwiseScores,
    defaults: dict | None = None,
) -> str:
    """Render a problem as canonical JSON text (deterministic ordering)."""
    images = []
    for f in features:
        rec = {"id": f.image_id, "coordinates": [list(map(float, row)) for row in f.coordinates]}
        if f.descriptors is not None:
            rec["descriptors"] = [list(map(float, row)) for row in f.descriptors]
        images.append(rec)
    ids = [f.image_id for f in features]
    pairwise = []
    for (i, j) in sorted(scores.blocks):
        if i == j:
            continue  # identity diagonals are implicit in the format
        block = scores.blocks[(i, j)]
        rows, cols = np.nonzero(block)
        entries = [[int(r), int(c), float(block[r, c])] for r, c in zip(rows, cols)]
        pairwise.append({"i": ids[i], "j": ids[j], "entries": entries})
    doc = {"format_version": FORMAT_VERSION, "images": images, "pairwise": pairwise}
    if defaults:
        unknown = set(defaults) - set(_DEFAULT_KEYS)
        if unknown:
            raise ParseError(f"unknown solver defaults: {sorted(unknown)}")
        doc["solver_defaults"] = {k: defaults[k] for k in _DEFAULT_KEYS if k in defaults}
    return json.dumps(doc, indent=2) + "\n"


def save_problem(path, features, scores, defaults: dict | None = None) -> None:
    Path(path).write_text(problem_document(features, scores, defaults))


def load_problem(path) -> tuple[list[FeatureSet], PairwiseScores, dict]:
    """Parse a problem document into features, raw scores, and defaults."""
    doc = _load_json(path)
    try:
        _check_version(doc)
        features = []
        for rec in doc["images"]:
            desc = rec.get("descriptors")
            features.append(
                FeatureSet(
                    str(rec["id"]),
                    np.asarray(rec["coordinates"], dtype=float),
                    None if desc is None else np.asarray(desc, dtype=float),
                )
            )
        index = {f.image_id: i for i, f in enumerate(features)}
        sizes = tuple(f.p for f in features)
        blocks: dict[tuple[int, int], np.ndarray] = {}
        for rec in doc.get("pairwise", []):
            i, j = index[str(rec["i"])], index[str(rec["j"])]
            block = np.zeros((sizes[i], sizes[j]))
            for r, c, v in rec["entries"]:
                block[int(r), int(c)] = float(v)
            blocks[(i, j)] = block
        defaults = dict(doc.get("solver_defaults", {}))
        if "rho_schedule" in defaults:
            defaults["rho_schedule"] = tuple(float(r) for r in defaults["rho_schedule"])
        return features, PairwiseScores(blocks, sizes), defaults
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed problem document ({exc})") from exc


def _pairs_document(ids, sizes, labels, extra: dict) -> str:
    images = []
    for image_id, p, lab in zip(ids, sizes, labels):
        pairs = [[int(c), int(l)] for c, l in enumerate(lab)]
        images.append({"id": image_id, "p": int(p), "pairs": pairs})
    doc = {"format_version": FORMAT_VERSION, **extra, "images": images}
    return json.dumps(doc, indent=2) + "\n"


def save_truth(path, labels, ids, universe_size: int) -> None:
    """Write per-candidate universe labels, -1 for outliers, for every image."""
    sizes = [len(lab) for lab in labels]
    text = _pairs_document(ids, sizes, labels, {"universe_size": int(universe_size)})
    Path(path).write_text(text)


def load_truth(path) -> tuple[list[str], list[np.ndarray], int]:
    doc = _load_json(path)
    try:
        _check_version(doc)
        ids, labels = _read_pairs(doc)
        return ids, labels, int(doc["universe_size"])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed ground-truth document ({exc})") from exc


def save_labeling(path, labeling: SelectionLabeling, ids) -> None:
    """Write the selected candidate indices and their labels per image."""
    images = []
    for image_id, a, lab in zip(ids, labeling.assignments, labeling.labels()):
        sel = np.nonzero(lab >= 0)[0]
        pairs = [[int(c), int(lab[c])] for c in sel]
        images.append({"id": image_id, "p": int(a.shape[0]), "pairs": pairs})
    doc = {"format_version": FORMAT_VERSION, "k": labeling.k, "images": images}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_labeling(path) -> tuple[list[str], SelectionLabeling]:
    doc = _load_json(path)
    try:
        _check_version(doc)
        ids, labels = _read_pairs(doc)
        return ids, SelectionLabeling.from_labels(labels, int(doc["k"]))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed labeling document ({exc})") from exc


def save_trace(path, trace: list[TraceRecord]) -> None:
    lines = ["stage,iteration,cycle,geo,coupling,total"]
    for rec in trace:
        lines.append(
            f"{rec.stage},{rec.iteration},{rec.cycle!r},{rec.geo!r},"
            f"{rec.coupling!r},{rec.total!r}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def save_point_cloud(path, shape: np.ndarray) -> None:
    """Write a rank-3 shape as a plain text table: label x y z."""
    lines = ["# label x y z"]
    for label, point in enumerate(np.asarray(shape, dtype=float).T):
        lines.append(f"{label} {point[0]!r} {point[1]!r} {point[2]!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def _load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object at top level")
    return doc


def _check_version(doc: dict) -> None:
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ParseError(f"unsupported format version {version!r}")


def _read_pairs(doc: dict) -> tuple[list[str], list[np.ndarray]]:
    ids, labels = [], []
    if not doc["images"]:
        raise ParseError("document lists no images")
    for rec in doc["images"]:
        ids.append(str(rec["id"]))
        lab = np.full(int(rec["p"]), -1, dtype=int)
        for c, l in rec["pairs"]:
            lab[int(c)] = int(l)
        labels.append(lab)
    return ids, labels
