import math

import numpy as np
import pytest

import oracles
from updp.data import SynthConfig, synth_generate
from updp.errors import EmptySelection, LabelOutOfRange, NotEnoughNeighbors, SingleClass
from updp.evaluation import (
    class_counts,
    class_coverage,
    evaluate_selection,
    kl_balance,
    knn_accuracy,
    linear_probe,
)
from updp.model import ModelConfig, init_model
from updp.selection import STRATEGIES, SelectionResult, run_strategy


def labels_from_counts(counts):
    return np.repeat(np.arange(len(counts)), counts)


class TestKnn:
    def test_identical_point(self, rng):
        L = rng.standard_normal((5, 3))
        assert knn_accuracy(L, [0, 1, 2, 3, 4], L[[2]], [2], k=1) == 1.0

    def test_single_class_majority(self, rng):
        L, T = rng.standard_normal((4, 3)), rng.standard_normal((10, 3))
        test_labels = [1] * 3 + [0] * 7
        assert knn_accuracy(L, [1, 1, 1, 1], T, test_labels, k=4) == pytest.approx(0.3)

    def test_vote_tie_smallest_class(self):
        L = np.array([[1.0, 0.0], [1.0, 0.1]])
        assert knn_accuracy(L, [3, 1], np.array([[1.0, 0.05]]), [1], k=2) == 1.0

    def test_separated_gaussians(self):
        ds = synth_generate(SynthConfig(num_classes=3, per_class=100, dim=16, separation=10.0, sigma=0.5, seed=2))
        x = ds.features[:, 0]
        picks = np.concatenate([np.flatnonzero(ds.labels == c)[:2] for c in range(3)])
        rest = np.setdiff1d(np.arange(300), picks)
        assert knn_accuracy(x[picks], ds.labels[picks], x[rest], ds.labels[rest], k=1) > 0.95

    @pytest.mark.parametrize("k", [0, 6])
    def test_bad_k(self, rng, k):
        with pytest.raises(NotEnoughNeighbors):
            knn_accuracy(rng.standard_normal((5, 2)), np.zeros(5, int), rng.standard_normal((2, 2)), [0, 0], k)


class TestProbe:
    def test_separable(self, rng):
        X = np.concatenate([rng.uniform(0.5, 1.5, (20, 2)), -rng.uniform(0.5, 1.5, (20, 2))])
        y = np.repeat([0, 1], 20)
        assert linear_probe(X, y, X, y) == 1.0

    def test_single_class(self, rng):
        with pytest.raises(SingleClass):
            linear_probe(rng.standard_normal((4, 2)), [2, 2, 2, 2], rng.standard_normal((3, 2)), [0, 1, 2])

    def test_missing_class_hurts(self):
        ds = synth_generate(SynthConfig(num_classes=10, per_class=100, dim=32, seed=3))
        x, y = ds.features[:, 0], ds.labels
        stratified = np.concatenate([np.flatnonzero(y == c)[:4] for c in range(10)])
        missing = np.concatenate([np.flatnonzero(y == c)[: (8 if c == 0 else 0 if c == 5 else 4)] for c in range(10)])
        def score(sel):
            rest = np.setdiff1d(np.arange(y.size), sel)
            return linear_probe(x[sel], y[sel], x[rest], y[rest])
        full, gap = score(stratified), score(missing)
        assert gap < 0.9 < full


class TestBalance:
    def test_stratified(self):
        assert kl_balance(labels_from_counts([4] * 10), 10) == 0.0

    def test_point_mass(self):
        assert kl_balance([3] * 7, 10) == pytest.approx(math.log(10), abs=1e-12)

    def test_fixture(self):
        counts = [8, 2, 4, 4, 4, 4, 4, 4, 4, 2]
        value = kl_balance(labels_from_counts(counts), 10)
        assert value == pytest.approx(oracles.kl_to_uniform(counts), abs=1e-12)
        assert value == pytest.approx(math.log(2) / 10, abs=1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_bounds(self, seed):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 7, int(rng.integers(1, 50)))
        v = kl_balance(y, 7)
        assert 0 <= v <= math.log(7) + 1e-12
        assert v == pytest.approx(oracles.kl_to_uniform(np.bincount(y, minlength=7).tolist()), abs=1e-12)

    def test_empty(self):
        with pytest.raises(EmptySelection):
            kl_balance([], 3)

    def test_out_of_range(self):
        with pytest.raises(LabelOutOfRange):
            class_counts([0, 3], 3)


class TestCoverage:
    def test_full(self):
        assert class_coverage(np.arange(10), 10) == 1.0

    def test_single(self):
        assert class_coverage([4] * 9, 10) == pytest.approx(0.1)

    def test_missing_class(self):
        assert class_coverage(labels_from_counts([9, 0, 4, 4, 4, 4, 4, 4, 4, 3]), 10) == pytest.approx(0.9)


@pytest.fixture(scope="module")
def ds():
    return synth_generate(SynthConfig(num_classes=4, per_class=25, dim=8, seed=5))


class TestEvaluateSelection:
    def test_report(self, ds):
        sel = SelectionResult("random", 8, list(range(8)))
        rep = evaluate_selection(sel, ds.features[:, 0], ds.labels, 4)
        assert sum(rep.class_counts) == 8
        assert 0 <= rep.knn_accuracy <= 1 and 0 <= rep.probe_accuracy <= 1
        assert rep.kl_balance == pytest.approx(kl_balance(ds.labels[:8], 4))

    def test_small_budget_uses_one_neighbor(self, ds):
        sel = SelectionResult("random", 3, [0, 1, 2])
        evaluate_selection(sel, ds.features[:, 0], ds.labels, 4)

    def test_single_class_selection(self, ds):
        members = np.flatnonzero(ds.labels == 2)[:3].tolist()
        rep = evaluate_selection(SelectionResult("x", 3, members), ds.features[:, 0], ds.labels, 4)
        assert rep.probe_accuracy == pytest.approx(22 / 97)
        assert rep.class_coverage == 0.25

    def test_label_firewall(self, ds):
        """Selections are invariant to any relabeling of the ground truth."""
        model = init_model(ModelConfig(d_in=8, num_clusters=6, d_h=8, d_z=4, d_w=4), 0)
        perm = np.random.default_rng(0).permutation(4)
        relabeled = type(ds)(ds.features, perm[ds.labels], ds.num_classes)
        for name in STRATEGIES:
            a = run_strategy(name, model, ds, 6, 0).indices
            b = run_strategy(name, model, relabeled, 6, 0).indices
            assert a == b
