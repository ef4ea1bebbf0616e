import numpy as np
import pytest

from multimatch import (
    BlockLayout,
    DimensionMismatch,
    FeatureSet,
    InfeasibleK,
    MatchingError,
    NonFiniteEntry,
    PairwiseScores,
    SelectionLabeling,
    SolverConfig,
    assemble_block,
    validate_instance,
)
from conftest import random_labeling, random_scores, toy_features


def test_validate_accepts_consistent_dimensions(rng):
    features = toy_features([3, 3], rng)
    scores = random_scores(rng, [3, 3])
    inst = validate_instance(features, scores, SolverConfig(k=2))
    assert inst.m == 6 and inst.n == 2
    assert np.array_equal(inst.scores.block(0, 0), np.eye(3))


def test_validate_rejects_infeasible_k(rng):
    features = toy_features([3, 3], rng)
    scores = random_scores(rng, [3, 3])
    with pytest.raises(InfeasibleK):
        validate_instance(features, scores, SolverConfig(k=4))


def test_validate_rejects_bad_block_shape(rng):
    features = toy_features([3, 3], rng)
    scores = PairwiseScores({(0, 1): rng.random((3, 2))}, (3, 3))
    with pytest.raises(DimensionMismatch):
        validate_instance(features, scores, SolverConfig(k=2))


def test_validate_rejects_non_finite(rng):
    features = toy_features([2, 2], rng)
    block = np.array([[0.5, np.nan], [0.1, 0.2]])
    scores = PairwiseScores({(0, 1): block}, (2, 2))
    with pytest.raises(NonFiniteEntry):
        validate_instance(features, scores, SolverConfig(k=1))


def test_validate_rejects_out_of_range_scores(rng):
    features = toy_features([2, 2], rng)
    scores = PairwiseScores({(0, 1): np.full((2, 2), 1.5)}, (2, 2))
    with pytest.raises(MatchingError):
        validate_instance(features, scores, SolverConfig(k=1))


def test_validate_symmetrizes_and_forces_identity_diagonal(rng):
    features = toy_features([2, 2], rng)
    fwd = rng.random((2, 2))
    rev = rng.random((2, 2))
    scores = PairwiseScores(
        {(0, 1): fwd, (1, 0): rev, (0, 0): rng.random((2, 2))}, (2, 2)
    )
    inst = validate_instance(features, scores, SolverConfig(k=1))
    assert np.allclose(inst.scores.block(0, 1), 0.5 * (fwd + rev.T))
    assert np.array_equal(inst.scores.block(0, 0), np.eye(2))
    assert np.array_equal(inst.scores.block(1, 0), inst.scores.block(0, 1).T)


def test_feature_set_checks_unit_descriptors():
    coords = np.zeros((2, 2))
    good = np.array([[1.0, 0.0], [0.0, 1.0]])
    FeatureSet("a", coords, good)
    with pytest.raises(MatchingError):
        FeatureSet("a", coords, 2.0 * good)


def test_assemble_single_image_is_identity():
    features = toy_features([2])
    inst = validate_instance(features, PairwiseScores({}, (2,)), SolverConfig(k=1))
    w = assemble_block(inst.scores).toarray()
    assert np.array_equal(w, np.eye(2))


def test_assemble_two_singletons():
    features = toy_features([1, 1])
    scores = PairwiseScores({(0, 1): np.array([[0.7]])}, (1, 1))
    inst = validate_instance(features, scores, SolverConfig(k=1))
    w = assemble_block(inst.scores).toarray()
    assert np.array_equal(w, np.array([[1.0, 0.7], [0.7, 1.0]]))


def test_assemble_matches_index_arithmetic_oracle(rng):
    sizes = [2, 2, 2]
    features = toy_features(sizes, rng)
    scores = random_scores(rng, sizes)
    inst = validate_instance(features, scores, SolverConfig(k=2))
    w = assemble_block(inst.scores).toarray()

    # Independent oracle: place blocks by cumulative-sum offsets.
    offsets = [0, 2, 4]
    expected = np.zeros((6, 6))
    for i in range(3):
        expected[offsets[i] : offsets[i] + 2, offsets[i] : offsets[i] + 2] = np.eye(2)
    for i in range(3):
        for j in range(i + 1, 3):
            blk = inst.scores.block(i, j)
            expected[offsets[i] : offsets[i] + 2, offsets[j] : offsets[j] + 2] = blk
            expected[offsets[j] : offsets[j] + 2, offsets[i] : offsets[i] + 2] = blk.T
    assert np.array_equal(w, expected)
    assert np.array_equal(w, w.T)


def test_assemble_then_extract_roundtrips(rng):
    sizes = [3, 2, 4]
    features = toy_features(sizes, rng)
    inst = validate_instance(features, random_scores(rng, sizes), SolverConfig(k=2))
    w = assemble_block(inst.scores).toarray()
    layout = inst.layout
    for (i, j), blk in inst.scores.blocks.items():
        sl_i, sl_j = layout.block_slice(i), layout.block_slice(j)
        assert np.array_equal(w[sl_i, sl_j], blk)


def test_layout_offsets_and_split():
    layout = BlockLayout((3, 2, 4))
    assert layout.offsets == (0, 3, 5)
    assert layout.m == 9 and layout.n == 3
    stacked = np.arange(18).reshape(9, 2)
    parts = layout.split(stacked)
    assert [p.shape[0] for p in parts] == [3, 2, 4]
    assert np.array_equal(np.vstack(parts), stacked)


def test_labeling_pair_products_are_partial_permutations(rng):
    for _ in range(20):
        sizes = rng.integers(2, 6, size=3)
        k = int(rng.integers(1, min(sizes) + 1))
        lab = random_labeling(rng, sizes, k)
        lab.validate()
        for i in range(3):
            for j in range(3):
                prod = lab.pair_matrix(i, j)
                assert prod.min() >= 0
                assert prod.sum(axis=0).max() <= 1
                assert prod.sum(axis=1).max() <= 1


def test_labeling_triplet_consistency_by_construction(rng):
    sizes = [4, 5, 3]
    lab = random_labeling(rng, sizes, 3)
    for i in range(3):
        for z in range(3):
            for j in range(3):
                direct = lab.pair_matrix(i, j)
                composed = lab.pair_matrix(i, z) @ lab.pair_matrix(z, j)
                assert np.array_equal(direct, composed)


def test_labeling_labels_roundtrip(rng):
    lab = random_labeling(rng, [4, 3], 2)
    rebuilt = SelectionLabeling.from_labels(lab.labels(), 2)
    for a, b in zip(lab.assignments, rebuilt.assignments):
        assert np.array_equal(a, b)


def test_labeling_validate_rejects_bad_column_sums():
    bad = SelectionLabeling([np.zeros((3, 2), dtype=int)], 2)
    with pytest.raises(MatchingError):
        bad.validate()


def test_solver_config_validation():
    with pytest.raises(MatchingError):
        SolverConfig(k=2, rho_schedule=(1.0, 1.0))
    with pytest.raises(MatchingError):
        SolverConfig(k=2, rho_schedule=())
    with pytest.raises(InfeasibleK):
        SolverConfig(k=0)
    with pytest.raises(MatchingError):
        SolverConfig(k=2, lam=-0.5)
    cfg = SolverConfig(k=2)
    assert cfg.lam == 1.0 and cfg.r == 4 and cfg.rho_schedule == (1.0, 10.0, 100.0)
