import json

import numpy as np
import pytest

from multimatch import ParseError, SelectionLabeling, generate
from multimatch.serialize import (
    load_labeling,
    load_problem,
    load_truth,
    problem_document,
    save_labeling,
    save_problem,
    save_trace,
    save_truth,
)
from multimatch.solver import TraceRecord


@pytest.fixture
def planted():
    return generate(3, 3, outliers_per_image=2, coord_noise_sigma=0.01,
                    match_corruption_rate=0.2, seed=17)


def test_problem_roundtrip_identical_instance(tmp_path, planted):
    path = tmp_path / "problem.json"
    inst = planted.instance
    save_problem(path, inst.features, inst.scores, {"k": 3, "lambda": 1.0})
    features, scores, defaults = load_problem(path)
    assert [f.image_id for f in features] == [f.image_id for f in inst.features]
    for fa, fb in zip(features, inst.features):
        assert np.array_equal(fa.coordinates, fb.coordinates)
    for (i, j), blk in inst.scores.blocks.items():
        if i != j:
            assert np.array_equal(scores.blocks[(i, j)], blk)
    assert defaults == {"k": 3, "lambda": 1.0}
    # serialize -> parse -> serialize is a fixed point
    text1 = problem_document(features, scores, defaults)
    features2, scores2, defaults2 = load_problem(path)
    text2 = problem_document(features2, scores2, defaults2)
    assert text1 == text2


def test_problem_document_is_deterministic(planted):
    inst = planted.instance
    a = problem_document(inst.features, inst.scores)
    b = problem_document(inst.features, inst.scores)
    assert a == b


def test_problem_roundtrip_with_descriptors(tmp_path, rng):
    from multimatch import FeatureSet, PairwiseScores

    desc = rng.normal(size=(4, 3))
    desc /= np.linalg.norm(desc, axis=0)
    feats = [
        FeatureSet("a", rng.random((2, 3)), desc),
        FeatureSet("b", rng.random((2, 2))),
    ]
    scores = PairwiseScores({(0, 1): rng.integers(0, 2, size=(3, 2)).astype(float)}, (3, 2))
    path = tmp_path / "p.json"
    save_problem(path, feats, scores)
    features, scores2, _ = load_problem(path)
    assert np.array_equal(features[0].descriptors, desc)
    assert features[1].descriptors is None
    assert np.array_equal(scores2.blocks[(0, 1)], scores.blocks[(0, 1)])


def test_truth_roundtrip(tmp_path, planted):
    path = tmp_path / "truth.json"
    ids = [f.image_id for f in planted.instance.features]
    save_truth(path, planted.truth_labels, ids, planted.universe_size)
    got_ids, labels, u = load_truth(path)
    assert got_ids == ids and u == 3
    for a, b in zip(labels, planted.truth_labels):
        assert np.array_equal(a, b)


def test_labeling_roundtrip(tmp_path, rng):
    from conftest import random_labeling

    lab = random_labeling(rng, [4, 5], 3)
    path = tmp_path / "lab.json"
    save_labeling(path, lab, ["x", "y"])
    ids, loaded = load_labeling(path)
    assert ids == ["x", "y"]
    assert loaded.k == 3
    for a, b in zip(loaded.assignments, lab.assignments):
        assert np.array_equal(a, b)


def test_trace_is_csv(tmp_path):
    path = tmp_path / "trace.csv"
    save_trace(path, [TraceRecord("init", 0, 1.5, 0.0, 0.0, 1.5),
                      TraceRecord("rho=1", 1, 1.0, 0.25, 0.01, 1.26)])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "stage,iteration,cycle,geo,coupling,total"
    assert lines[1].startswith("init,0,")
    assert len(lines) == 3


def test_load_problem_rejects_bad_documents(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("not json at all")
    with pytest.raises(ParseError):
        load_problem(bad)
    bad.write_text(json.dumps({"format_version": 99, "images": []}))
    with pytest.raises(ParseError):
        load_problem(bad)
    bad.write_text(json.dumps({"format_version": 1}))
    with pytest.raises(ParseError):
        load_problem(bad)
    with pytest.raises(ParseError):
        load_problem(tmp_path / "missing.json")


def test_load_labeling_rejects_empty_images(tmp_path):
    path = tmp_path / "lab.json"
    path.write_text(json.dumps({"format_version": 1, "k": 2, "images": []}))
    with pytest.raises(ParseError):
        load_labeling(path)
