"""Pairwise DI matrices, stratified splits, k-NN voting and evaluation."""

import numpy as np
import pytest

from soda.classify import (
    DiMatrix,
    Prediction,
    evaluate,
    nn_classify,
    pairwise_matrix,
    split,
)
from soda.errors import (
    ClassTooSmall,
    EmptyInput,
    IncompatibleAlphabets,
    LengthMismatch,
    NoTrainData,
)
from soda.ingest import SymbolSequence


def iid_seq(m, n, p, seed, sid, label=None):
    rng = np.random.default_rng(seed)
    return SymbolSequence(sid, label, p, rng.integers(0, p, size=(m, n)))


def coupled_copy(src, seed, sid, label=None):
    """Lag-1 noisy copy: 90% of realizations repeat src's previous frame."""
    rng = np.random.default_rng(seed)
    out = rng.integers(0, src.p, size=src.frames.shape)
    for t in range(1, src.num_frames):
        coin = rng.random(src.n) < 0.9
        out[t, coin] = src.frames[t - 1, coin]
    return SymbolSequence(sid, label, src.p, out)


def hand_matrix(sym, labels, ids=None):
    sym = np.asarray(sym, dtype=np.float64)
    ids = tuple(ids or (f"s{i}" for i in range(sym.shape[0])))
    return DiMatrix(ids=ids, labels=tuple(labels), forward=sym / 2.0, sym=sym, order_k=1)


class TestPairwiseMatrix:
    def test_shape_and_symmetrization(self):
        seqs = [iid_seq(8, 60, 3, seed=i, sid=f"s{i}", label="a") for i in range(3)]
        mat = pairwise_matrix(seqs, k=1, lambda_mode=0.0)
        assert mat.forward.shape == (3, 3)
        assert np.array_equal(mat.sym, mat.forward + mat.forward.T)
        assert mat.ids == ("s0", "s1", "s2")
        assert mat.labels == ("a", "a", "a")
        assert mat.order_k == 1

    def test_threads_only_affect_speed(self):
        seqs = [iid_seq(6, 40, 3, seed=10 + i, sid=f"s{i}") for i in range(3)]
        one = pairwise_matrix(seqs, lambda_mode=0.0, threads=1)
        two = pairwise_matrix(seqs, lambda_mode=0.0, threads=2)
        auto = pairwise_matrix(seqs, lambda_mode=0.0, threads=0)
        assert np.array_equal(one.forward, two.forward)
        assert np.array_equal(one.forward, auto.forward)

    def test_coupled_pair_scores_above_independent(self):
        x = iid_seq(12, 200, 3, seed=1, sid="x")
        y = coupled_copy(x, seed=2, sid="y")
        z = iid_seq(12, 200, 3, seed=3, sid="z")
        mat = pairwise_matrix([x, y, z], lambda_mode=0.0)
        assert mat.sym[0, 1] > mat.sym[0, 2]
        assert mat.sym[0, 1] > mat.sym[1, 2]

    def test_alphabet_mismatch(self):
        a = iid_seq(6, 30, 3, seed=4, sid="a")
        b = iid_seq(6, 30, 4, seed=5, sid="b")
        with pytest.raises(IncompatibleAlphabets):
            pairwise_matrix([a, b])

    def test_pair_ids_annotate_errors(self):
        a = iid_seq(6, 30, 3, seed=6, sid="left")
        b = SymbolSequence("right", None, 3, np.zeros((6, 20), dtype=np.int32))
        with pytest.raises(LengthMismatch, match="left.*right"):
            pairwise_matrix([a, b], lambda_mode=0.0)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            pairwise_matrix([])


class TestSplit:
    def test_even_two_class_split(self):
        labels = ["a"] * 4 + ["b"] * 4
        parts = split(labels, ratio=0.5, seed=0)
        assert parts.train.size == 4 and parts.test.size == 4
        assert sorted(np.concatenate([parts.train, parts.test]).tolist()) == list(range(8))
        train_labels = [labels[i] for i in parts.train]
        assert train_labels.count("a") == 2 and train_labels.count("b") == 2

    def test_largest_remainder_assignment(self):
        # shares 1.5 each; the leftover seat goes to the first-seen class
        labels = ["a"] * 3 + ["b"] * 3
        parts = split(labels, ratio=0.5, seed=1)
        train_labels = [labels[i] for i in parts.train]
        assert train_labels.count("a") == 2
        assert train_labels.count("b") == 1

    def test_every_class_on_both_sides(self):
        labels = ["a"] * 5 + ["b"] * 5 + ["c"] * 5
        for ratio in (0.2, 0.4, 0.9):
            parts = split(labels, ratio=ratio, seed=2)
            for side in (parts.train, parts.test):
                assert {labels[i] for i in side} == {"a", "b", "c"}

    def test_deterministic_given_seed(self):
        labels = ["a"] * 6 + ["b"] * 6
        a = split(labels, ratio=0.5, seed=7)
        b = split(labels, ratio=0.5, seed=7)
        assert np.array_equal(a.train, b.train)
        c = split(labels, ratio=0.5, seed=8)
        assert not np.array_equal(a.train, c.train)

    def test_class_too_small(self):
        with pytest.raises(ClassTooSmall):
            split(["a", "a", "b"], ratio=0.5)

    @pytest.mark.parametrize("ratio", [0.0, 1.0, -0.5])
    def test_bad_ratio(self, ratio):
        with pytest.raises(ClassTooSmall):
            split(["a", "a", "b", "b"], ratio=ratio)

    def test_missing_label(self):
        with pytest.raises(NoTrainData):
            split(["a", None, "a", "a"], ratio=0.5)

    def test_empty_labels(self):
        with pytest.raises(EmptyInput):
            split([])


class TestNnClassify:
    def test_single_neighbor(self):
        sym = np.array([
            [0.0, 0.9, 0.1, 0.2],
            [0.9, 0.0, 0.1, 0.1],
            [0.1, 0.1, 0.0, 0.8],
            [0.2, 0.1, 0.8, 0.0],
        ])
        mat = hand_matrix(sym, ["a", "a", "b", "b"])
        preds = nn_classify(mat, train=[0, 2], test=[1, 3], k_neighbors=1)
        assert [p.predicted for p in preds] == ["a", "b"]
        assert [p.truth for p in preds] == ["a", "b"]

    def test_majority_vote_beats_single_closest(self):
        # nearest neighbor is class a, but two b's outvote it at k=3
        sym = np.array([
            [0.0, 1.0, 0.8, 0.7],
            [1.0, 0.0, 0.0, 0.0],
            [0.8, 0.0, 0.0, 0.0],
            [0.7, 0.0, 0.0, 0.0],
        ])
        mat = hand_matrix(sym, [None, "a", "b", "b"])
        preds = nn_classify(mat, train=[1, 2, 3], test=[0], k_neighbors=3)
        assert preds[0].predicted == "b"
        assert preds[0].class_scores == {"a": 1.0, "b": pytest.approx(0.75)}

    def test_vote_tie_breaks_by_summed_similarity(self):
        sym = np.array([
            [0.0, 0.9, 0.8, 0.0],
            [0.9, 0.0, 0.0, 0.0],
            [0.8, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ])
        mat = hand_matrix(sym, [None, "a", "b", "b"])
        preds = nn_classify(mat, train=[1, 2], test=[0], k_neighbors=2)
        assert preds[0].predicted == "a"

    def test_full_tie_breaks_by_lowest_index(self):
        sym = np.array([
            [0.0, 0.5, 0.5],
            [0.5, 0.0, 0.0],
            [0.5, 0.0, 0.0],
        ])
        mat = hand_matrix(sym, [None, "b", "a"])
        preds = nn_classify(mat, train=[1, 2], test=[0], k_neighbors=2)
        assert preds[0].predicted == "b"

    def test_k_clamps_to_train_size(self):
        sym = np.zeros((3, 3))
        sym[0, 1] = sym[1, 0] = 0.4
        mat = hand_matrix(sym, [None, "a", "b"])
        preds = nn_classify(mat, train=[1, 2], test=[0], k_neighbors=100)
        assert preds[0].predicted == "a"

    def test_scaling_similarities_changes_nothing(self):
        rng = np.random.default_rng(9)
        base = rng.random((6, 6))
        sym = base + base.T
        labels = ["a", "a", "a", "b", "b", "b"]
        one = nn_classify(hand_matrix(sym, labels), [0, 1, 3, 4], [2, 5], k_neighbors=3)
        three = nn_classify(hand_matrix(3.0 * sym, labels), [0, 1, 3, 4], [2, 5], k_neighbors=3)
        assert [p.predicted for p in one] == [p.predicted for p in three]

    def test_empty_train(self):
        mat = hand_matrix(np.zeros((2, 2)), ["a", "a"])
        with pytest.raises(NoTrainData):
            nn_classify(mat, train=[], test=[0])

    def test_unlabeled_train_member(self):
        mat = hand_matrix(np.zeros((2, 2)), ["a", None])
        with pytest.raises(NoTrainData):
            nn_classify(mat, train=[1], test=[0])

    def test_bad_k(self):
        mat = hand_matrix(np.zeros((2, 2)), ["a", "a"])
        with pytest.raises(NoTrainData):
            nn_classify(mat, train=[0], test=[1], k_neighbors=0)


class TestEvaluate:
    def test_accuracy_and_confusion(self):
        preds = [
            Prediction("s0", "a", "a", {"a": 0.9, "b": 0.1}),
            Prediction("s1", "a", "b", {"a": 0.3, "b": 0.5}),
            Prediction("s2", "b", "b", {"a": 0.2, "b": 0.7}),
        ]
        report = evaluate(preds)
        assert report.accuracy == pytest.approx(2.0 / 3.0)
        assert report.labels == ("a", "b")
        assert report.confusion.tolist() == [[1, 1], [0, 1]]

    def test_average_precision_hand_computed(self):
        # class a ranking: s0 (hit), s2 (miss), s1 (hit) -> (1/1 + 2/3) / 2
        preds = [
            Prediction("s0", "a", "a", {"a": 0.9, "b": 0.1}),
            Prediction("s1", "a", "b", {"a": 0.3, "b": 0.5}),
            Prediction("s2", "b", "b", {"a": 0.5, "b": 0.7}),
        ]
        report = evaluate(preds)
        assert report.average_precision["a"] == pytest.approx((1.0 + 2.0 / 3.0) / 2.0)
        assert report.average_precision["b"] == pytest.approx(1.0)

    def test_predicted_only_class_gets_column_not_ap(self):
        preds = [
            Prediction("s0", "a", "c", {"a": 0.2, "c": 0.9}),
            Prediction("s1", "a", "a", {"a": 0.8, "c": 0.1}),
        ]
        report = evaluate(preds)
        assert report.labels == ("a", "c")
        assert report.confusion.tolist() == [[1, 1], [0, 0]]
        assert "c" not in report.average_precision

    def test_empty_predictions(self):
        with pytest.raises(EmptyInput):
            evaluate([])
