import numpy as np
import pytest

from genforest.data import DataError, dataset_from_rows, REAL
from genforest.forest import GenerativeForest, SplitPredicate, Tree
from genforest.measure import uniform_mass


def _manual_forest(toy2d, preds):
    """Build a GF of stumps over toy2d: one tree per (feature, threshold)."""
    trees, leaf_rows = [], []
    for j, t in preds:
        tree = Tree(toy2d.schema)
        li, ri = tree.split(tree.root, SplitPredicate(feature=j, threshold=t))
        rows = np.arange(toy2d.m)
        left = rows[toy2d.columns[j][rows] <= t]
        right = rows[toy2d.columns[j][rows] > t]
        trees.append(tree)
        leaf_rows.append({li: left, ri: right})
    return GenerativeForest(toy2d.schema, trees, dataset=toy2d, leaf_rows=leaf_rows)


class TestTree:
    def test_split_bookkeeping(self, toy2d):
        tree = Tree(toy2d.schema)
        assert tree.is_leaf(tree.root) and tree.n_leaves() == 1
        li, ri = tree.split(tree.root, SplitPredicate(feature=0, threshold=0.5))
        assert not tree.is_leaf(tree.root)
        assert sorted(tree.leaves()) == sorted([li, ri])
        lsup = tree.supports[li].restrictions[0]
        rsup = tree.supports[ri].restrictions[0]
        assert lsup.hi == 0.5 and rsup.lo == 0.5 and rsup.lo_open

    def test_leaf_of_routing(self, toy2d):
        tree = Tree(toy2d.schema)
        li, ri = tree.split(tree.root, SplitPredicate(feature=0, threshold=0.5))
        assert tree.leaf_of([0.3, 0.9]) == li
        assert tree.leaf_of([0.5, 0.9]) == li  # boundary goes left
        assert tree.leaf_of([0.51, 0.1]) == ri

    def test_path_to(self, toy2d):
        tree = Tree(toy2d.schema)
        li, ri = tree.split(tree.root, SplitPredicate(feature=0, threshold=0.5))
        lli, lri = tree.split(li, SplitPredicate(feature=1, threshold=0.5))
        assert tree.path_to(lri) == [li, lri]
        assert tree.path_to(ri) == [ri]


class TestPartition:
    def test_two_crossed_stumps_four_elements(self, toy2d):
        forest = _manual_forest(toy2d, [(0, 0.5), (1, 0.5)])
        elems = forest.enumerate_partition()
        assert len(elems) == 4
        assert sorted(e.count for e in elems) == [2, 2, 2, 2]

    def test_nested_same_feature_intersection(self, toy2d):
        # stump at 0.5 crossed with stump at 0.25 on the same axis: the
        # (<=0.25, >0.5) combination is empty, leaving 3 elements
        forest = _manual_forest(toy2d, [(0, 0.5), (0, 0.25)])
        elems = forest.enumerate_partition()
        assert len(elems) == 3

    def test_partition_is_exhaustive(self, toy_forest, toy2d):
        forest, _ = toy_forest
        elems = forest.enumerate_partition()
        assert sum(e.count for e in elems) == toy2d.m
        total_u = sum(e.umass for e in elems)
        assert total_u == pytest.approx(1.0, abs=1e-9)
        assert all(
            e.umass == pytest.approx(uniform_mass(forest.schema, e.support), abs=1e-12)
            for e in elems
        )

    def test_partition_element_of_membership(self, toy_forest, toy2d):
        forest, _ = toy_forest
        for i in range(toy2d.m):
            elem = forest.partition_element_of(toy2d.row(i))
            assert elem.support.contains(toy2d.row(i))
            assert i in set(elem.rows.tolist())

    def test_prune_zero_count(self, toy_forest):
        forest, _ = toy_forest
        pruned = forest.enumerate_partition(prune_zero_count=True)
        assert all(e.count > 0 for e in pruned)
        full = forest.enumerate_partition()
        assert len(pruned) <= len(full)


class TestDensity:
    def test_positive_at_training_points(self, toy_forest, toy2d):
        forest, _ = toy_forest
        for i in range(toy2d.m):
            val, point_mass = forest.density(toy2d.row(i))
            assert val > 0
            assert not point_mass

    def test_integrates_to_one(self, toy_forest):
        forest, _ = toy_forest
        vol = forest.domain_volume()
        total = 0.0
        for e in forest.enumerate_partition():
            if e.umass > 0:
                # density is constant on each element
                mid = [
                    (r.lo + r.hi) / 2 for r in e.support.restrictions
                ]
                val, _ = forest.density(mid)
                total += val * e.umass * vol
        assert total == pytest.approx(1.0, abs=1e-9)


class TestSerialization:
    def test_roundtrip(self, toy_forest, toy2d, tmp_path):
        forest, _ = toy_forest
        p = tmp_path / "model.json"
        forest.save(p)
        back = GenerativeForest.load(p, dataset=toy2d)
        assert back.T == forest.T
        a = forest.enumerate_partition()
        b = back.enumerate_partition()
        assert [(e.leaf_ids, e.count) for e in a] == [(e.leaf_ids, e.count) for e in b]

    def test_byte_identical_saves(self, toy_forest, tmp_path):
        forest, _ = toy_forest
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        forest.save(p1)
        forest.save(p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_data_hash_mismatch(self, toy_forest, toy2d, tmp_path):
        forest, _ = toy_forest
        p = tmp_path / "model.json"
        forest.save(p)
        cols = [c.copy() for c in toy2d.columns]
        cols[0][0] += 0.01
        with pytest.raises(DataError):
            GenerativeForest.load(p, dataset=toy2d.with_columns(cols))

    def test_eogt_roundtrip_without_dataset(self, toy_forest, tmp_path):
        forest, _ = toy_forest
        eogt = forest.to_eogt()
        p = tmp_path / "eogt.json"
        eogt.save(p)
        back = GenerativeForest.load(p)
        assert back.mode == "eogt"
        assert back.arc_p == eogt.arc_p

    def test_garbage_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(DataError):
            GenerativeForest.load(p)


class TestEogt:
    def test_arc_probabilities_valid(self, toy_forest):
        forest, _ = toy_forest
        eogt = forest.to_eogt()
        for probs in eogt.arc_p:
            for p in probs.values():
                assert 0.0 <= p <= 1.0

    def test_arc_probability_values(self, toy2d):
        forest = _manual_forest(toy2d, [(0, 0.5)])
        eogt = forest.to_eogt()
        root = forest.trees[0].root
        assert eogt.arc_p[0][root] == pytest.approx(0.5)  # 4 of 8 rows right

    def test_expected_depth_positive(self, toy_forest):
        forest, _ = toy_forest
        d = forest.expected_depth()
        assert d > 0
        assert forest.to_eogt().expected_depth() > 0


class TestValidation:
    def test_bad_pi(self, toy2d):
        with pytest.raises(ValueError):
            _f = GenerativeForest(
                toy2d.schema, [Tree(toy2d.schema)], pi=1.5,
                dataset=toy2d, leaf_rows=[{0: np.arange(toy2d.m)}],
            )

    def test_gf_needs_dataset(self, toy2d):
        with pytest.raises(ValueError):
            GenerativeForest(toy2d.schema, [Tree(toy2d.schema)])
