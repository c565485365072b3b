import json
from itertools import combinations
from math import comb

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genus0 import trees as T
from genus0.trees import Split, Tree

from conftest import stable_trees, trees_with_perm

# enumeration totals frozen from an independent brute-force pass: for each
# degree, every r-subset of stable 2-partitions was tested for pairwise
# compatibility (a-value 3) and assembled into a tree.
TREE_COUNTS = {
    4: [1, 3],
    5: [1, 10, 15],
    6: [1, 25, 105, 105],
    7: [1, 56, 490, 1260, 945],
    8: [1, 119, 1918, 9450, 17325, 10395],
}


def double_factorial(k):
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


class TestSplit:
    def test_canonical_side_contains_label_one(self):
        s = Split.of([3, 4, 5], 5)
        assert s.side == T.mask_of([1, 2], 5)

    def test_rejects_unstable(self):
        with pytest.raises(ValueError):
            Split.of([1], 4)
        with pytest.raises(ValueError):
            Split.of([1, 2, 3], 4)

    def test_parse_and_str(self):
        s = Split.parse("{12|345}")
        assert s == Split.of([1, 2], 5)
        assert str(s) == "{12|345}"
        wide = Split.of([1, 10], 10)
        assert Split.parse(str(wide)) == wide

    def test_a_value_equal_case(self):
        s = Split.of([1, 2], 5)
        assert T.a_value(s, s) == 2

    def test_a_value_crossing(self):
        assert T.a_value(Split.of([1, 2], 4), Split.of([1, 3], 4)) == 4

    def test_a_value_nested(self):
        assert T.a_value(Split.of([1, 2], 5), Split.of([1, 2, 3], 5)) == 3

    def test_a_value_exhaustive_n5(self):
        # cross-check the bitmask fast path against literal set algebra
        splits = [Split(5, p) for p in T.stable_splits(5)]
        universe = set(range(1, 6))
        for s, t in combinations(splits, 2):
            blocks = [set(T.labels_of(s.side)), universe - set(T.labels_of(s.side))]
            cuts = sum(
                1
                for a in blocks
                for b in (set(T.labels_of(t.side)), universe - set(T.labels_of(t.side)))
                if a & b
            )
            assert T.a_value(s, t) == cuts


class TestEnumeration:
    @pytest.mark.parametrize("n", [4, 5, 6, 7])
    def test_frozen_counts(self, n):
        got = [len(T.enumerate_stable_trees(n, r)) for r in range(n - 2)]
        assert got == TREE_COUNTS[n]

    @pytest.mark.slow
    def test_frozen_counts_n8(self):
        got = [len(T.enumerate_stable_trees(8, r)) for r in range(6)]
        assert got == TREE_COUNTS[8]

    @pytest.mark.parametrize("n", [4, 5, 6, 7, 8])
    def test_degree_one_count_formula(self, n):
        assert len(T.enumerate_stable_trees(n, 1)) == 2 ** (n - 1) - n - 1
        # equivalently: half the number of proper stable subsets
        assert len(T.stable_splits(n)) == sum(comb(n, k) for k in range(2, n - 1)) // 2

    @pytest.mark.parametrize("n", [4, 5, 6, 7])
    def test_top_degree_trivalent(self, n):
        top = T.enumerate_stable_trees(n, n - 3)
        assert len(top) == double_factorial(2 * n - 5)
        for t in top:
            assert set(t.valencies()) == {3}

    def test_overfull_degree_empty(self):
        assert T.enumerate_stable_trees(5, 3) == ()

    def test_no_duplicates_and_sorted(self):
        for n in (4, 5, 6):
            for r in range(n - 2):
                ts = T.enumerate_stable_trees(n, r)
                assert len(set(ts)) == len(ts)
                assert list(ts) == sorted(ts)

    @pytest.mark.parametrize("n", [5, 6])
    def test_edges_of_one_tree_pairwise_compatible(self, n):
        for r in range(2, n - 2):
            for t in T.enumerate_stable_trees(n, r):
                for e, g in combinations(range(r), 2):
                    assert (
                        T.a_value(t.edge_partition(e), t.edge_partition(g)) == 3
                    )


class TestTreeStructure:
    def test_edge_partition_round_trip(self):
        cat = Tree.parse("{12|345}{123|45}")
        assert cat.edge_partition(0) == Split.of([1, 2], 5)
        assert cat.edge_partition(1) == Split.of([1, 2, 3], 5)

    def test_caterpillar_model(self):
        cat = Tree.parse("{12|345}{123|45}")
        assert sorted(cat.valencies()) == [3, 3, 3]
        # middle vertex carries tail 3 and both edges
        mids = [
            v
            for v in range(3)
            if {f.kind for f in cat.flags_at(v)} == {"tail", "edge"}
            and sum(f.kind == "edge" for f in cat.flags_at(v)) == 2
        ]
        assert len(mids) == 1
        (tail,) = [f for f in cat.flags_at(mids[0]) if f.kind == "tail"]
        assert tail.ref == 3

    def test_rejects_crossing_parts(self):
        with pytest.raises(ValueError):
            Tree.make(4, [T.mask_of([1, 2], 4), T.mask_of([1, 3], 4)])

    def test_rejects_duplicate_parts(self):
        with pytest.raises(ValueError):
            Tree.make(5, [T.mask_of([1, 2], 5), T.mask_of([3, 4, 5], 5)])

    def test_one_vertex_needs_three_labels(self):
        with pytest.raises(ValueError):
            Tree.one_vertex(2)

    def test_branches_partition_labels(self):
        for t in T.enumerate_stable_trees(6, 2):
            for v in range(t.degree + 1):
                total = 0
                for f in t.flags_at(v):
                    assert total & f.branch == 0
                    total |= f.branch
                assert total == T.full_mask(6)


class TestProduct:
    def test_product_of_compatible_edges(self):
        a = Tree.parse("{12|345}")
        b = Tree.parse("{123|45}")
        assert T.tree_product(a, b) == Tree.parse("{12|345}{123|45}")

    def test_product_crossing_is_none(self):
        a = Tree.parse("{12|34}")
        b = Tree.parse("{13|24}")
        assert T.tree_product(a, b) is None

    def test_self_product(self):
        a = Tree.parse("{12|345}{123|45}")
        assert T.tree_product(a, a) == a

    @given(stable_trees(max_n=6), stable_trees(max_n=6))
    def test_product_is_union_of_partitions(self, a, b):
        if a.n != b.n:
            return
        p = T.tree_product(a, b)
        if p is not None:
            assert set(p.parts) == set(a.parts) | set(b.parts)
            assert p == T.tree_product(b, a)


class TestTransplant:
    def test_single_tail_move_inserts_edge(self):
        t = Tree.parse("{12|345}")
        v_345 = next(
            v for v in (0, 1) if any(f.ref == 3 and f.kind == "tail" for f in t.flags_at(v))
        )
        moved = [f for f in t.flags_at(v_345) if f.kind == "tail" and f.ref == 3]
        assert T.transplant(t, 0, moved) == Tree.parse("{12|345}{123|45}")

    def test_contract_round_trip(self):
        t = Tree.parse("{12|345}")
        v = 1
        moved = [f for f in t.flags_at(v) if f.kind == "tail" and f.ref == 4]
        bigger = T.transplant(t, 0, moved)
        new_edge = next(
            e for e in range(bigger.degree) if bigger.parts[e] not in t.parts
        )
        assert T.contract_edge(bigger, new_edge) == t

    def test_maximal_move_leaves_valency_three(self):
        # moving every movable flag but two must leave the old endpoint
        # with exactly three flags: the edge plus the two stragglers
        t = Tree.one_vertex(6)
        g = [f for f in t.flags_at(0) if f.ref in (1, 2)]
        one_edge = T.insert_edge(t, 0, g)
        v = next(
            v
            for v in (0, 1)
            if sum(f.kind == "tail" for f in one_edge.flags_at(v)) == 4
        )
        movable = [
            f for f in one_edge.flags_at(v) if f.kind == "tail" and f.ref in (3, 4)
        ]
        out = T.transplant(one_edge, 0, movable)
        assert sorted(out.valencies()) == [3, 3, 4]

    def test_rejects_empty_and_oversized(self):
        t = Tree.parse("{12|345}")
        with pytest.raises(ValueError):
            T.transplant(t, 0, [])
        v = 1
        all_tails = [f for f in t.flags_at(v) if f.kind == "tail"]
        with pytest.raises(ValueError):
            T.transplant(t, 0, all_tails)  # endpoint would drop below valency 3

    def test_rejects_moving_the_edge_itself(self):
        t = Tree.parse("{123|456}")
        flags = list(t.flags_at(0))
        with pytest.raises(ValueError):
            T.transplant(t, 0, [f for f in flags if f.kind == "edge"])


class TestForget:
    def test_forget_to_minimum(self):
        t, contracted = T.forget_and_stabilize(Tree.parse("{12|34}"), 4)
        assert t == Tree.one_vertex(3)
        assert contracted == 1

    def test_forget_from_one_vertex(self):
        t, contracted = T.forget_and_stabilize(Tree.one_vertex(5), 2)
        assert t == Tree.one_vertex(4)
        assert contracted == 0

    def test_forget_trivalent_middle_contracts(self):
        # middle vertex of the n=5 caterpillar has valency exactly 3, so
        # removing its tail merges the two edges into one
        t, contracted = T.forget_and_stabilize(Tree.parse("{12|345}{123|45}"), 3)
        assert t == Tree.parse("{12|34}")
        assert contracted == 1

    def test_forget_fat_middle_survives(self):
        # same shape but a second middle tail keeps the vertex stable
        cat6 = Tree.parse("{12|3456}{45|1236}")
        t, contracted = T.forget_and_stabilize(cat6, 3)
        assert contracted == 0
        # old tail 6 becomes 5 and stays in the middle: 12 - (5) - 34
        assert t == Tree.parse("{12|345}{34|125}")

    def test_relabelling_preserves_order(self):
        t, _ = T.forget_and_stabilize(Tree.parse("{16|2345}"), 3)
        # labels 4,5,6 slide down to 3,4,5
        assert t == Tree.parse("{15|234}")

    @given(stable_trees(min_n=5), st.data())
    def test_forget_keeps_stability(self, t, data):
        label = data.draw(st.integers(1, t.n))
        out, contracted = T.forget_and_stabilize(t, label)
        assert out.n == t.n - 1
        assert contracted in (0, 1)
        assert all(k >= 3 for k in out.valencies())
        assert out.degree == t.degree - contracted


class TestCanonical:
    def test_idempotent(self):
        t = Tree.parse("{12|345}{123|45}")
        assert T.canonicalize(t) == t

    def test_json_round_trip(self):
        for n in (4, 5, 6):
            for r in range(n - 2):
                for t in T.enumerate_stable_trees(n, r):
                    assert Tree.from_json(t.to_json()) == t

    def test_json_lists_smaller_side(self):
        payload = json.loads(Tree.parse("{12|3456}").to_json())
        assert payload == {"n": 6, "edges": [[1, 2]]}
        tied = json.loads(Tree.parse("{124|356}").to_json())
        assert tied["edges"] == [[1, 2, 4]]

    def test_parse_str_round_trip(self):
        for t in T.enumerate_stable_trees(6, 3):
            assert Tree.parse(str(t)) == t

    @given(trees_with_perm(max_n=6))
    def test_relabel_is_group_action(self, tp):
        t, perm = tp
        u = T.relabel(t, perm)
        inv = [0] * t.n
        for i, x in enumerate(perm, start=1):
            inv[x - 1] = i
        assert T.relabel(u, tuple(inv)) == t

    def test_orbit_sizes(self):
        assert [(k) for _, k in T.orbit_reps(5, 1)] == [10]
        assert [(k) for _, k in T.orbit_reps(5, 2)] == [15]
        # degree-1 orbits at n=6: the 2|4 splits (15) and the 3|3 splits (10)
        assert sorted(k for _, k in T.orbit_reps(6, 1)) == [10, 15]

    def test_orbits_partition_enumeration(self):
        for n, r in [(5, 2), (6, 2), (6, 3)]:
            total = sum(k for _, k in T.orbit_reps(n, r))
            assert total == len(T.enumerate_stable_trees(n, r))

    @given(trees_with_perm(max_n=6))
    def test_relabel_lands_in_enumeration(self, tp):
        t, perm = tp
        u = T.relabel(t, perm)
        assert u in set(T.enumerate_stable_trees(t.n, t.degree))
