import math

import numpy as np
import pytest

from pancakes.analysis import (
    CostModelParams,
    check_radii,
    child_radius_growth,
    dataset_lfd,
    model_grid,
    radii_scaling_report,
    recursive_model_cost,
    recursive_model_cost_sum,
    stride_radius,
    to_csv,
    total_model_cost,
    unitary_model_cost,
)
from pancakes.compressor import compress
from pancakes.errors import InvalidInputError
from pancakes.metrics import get_metric
from pancakes.synthetic import grid_sequences, mutated_corpus, uniform_disk
from pancakes.tree import build_tree


class TestStrideRadius:
    def test_first_stride_is_root(self):
        assert stride_radius(CostModelParams(3.5, 2, 4), 1) == 3.5

    def test_example(self):
        assert stride_radius(CostModelParams(4, 2, 3), 2) == pytest.approx(2.0, rel=1e-12)

    def test_decreasing(self):
        p = CostModelParams(10, 3, 6)
        radii = [stride_radius(p, i) for i in range(1, 7)]
        assert all(a > b for a, b in zip(radii, radii[1:]))

    def test_ceiling_applied(self):
        assert CostModelParams(1, 1.2, 1).depth == 2

    def test_out_of_range(self):
        with pytest.raises(InvalidInputError):
            stride_radius(CostModelParams(1, 1, 2), 3)

    def test_invalid_params(self):
        with pytest.raises(InvalidInputError):
            CostModelParams(1, 0, 1)
        with pytest.raises(InvalidInputError):
            CostModelParams(-1, 1, 1)
        with pytest.raises(InvalidInputError):
            CostModelParams(1, 1, 0)


class TestRecursiveCost:
    def test_hand_example(self):
        assert recursive_model_cost(CostModelParams(1, 1, 1)) == pytest.approx(2.0, rel=1e-12)

    @pytest.mark.parametrize("r", [1.0, 10.0])
    def test_closed_form_matches_sum(self, r):
        for L in range(1, 5):
            for S in range(1, 7):
                p = CostModelParams(r, L, S)
                closed, summed = recursive_model_cost(p), recursive_model_cost_sum(p)
                assert abs(closed - summed) <= 1e-9 * abs(summed)

    def test_grows_exponentially_in_strides(self):
        for L in range(1, 5):
            costs = [recursive_model_cost(CostModelParams(1, L, s)) for s in range(1, 8)]
            ratios = [b / a for a, b in zip(costs, costs[1:])]
            # successive ratios approach 2^(L/2) from above
            assert all(q > 2 ** (L / 2) - 1e-9 for q in ratios)


class TestUnitaryCost:
    def test_singleton_leaves(self):
        assert unitary_model_cost(CostModelParams(5, 2, 2, n=16)) == 0

    def test_hand_example(self):
        assert unitary_model_cost(CostModelParams(1, 1, 1, n=8)) == pytest.approx(3 * math.sqrt(2))

    def test_decreasing_in_strides(self):
        costs = [unitary_model_cost(CostModelParams(1, 1, s, n=4096)) for s in range(1, 12)]
        assert all(a > b for a, b in zip(costs, costs[1:]))

    def test_too_few_points(self):
        with pytest.raises(InvalidInputError):
            unitary_model_cost(CostModelParams(1, 2, 3, n=10))


class TestTotalCost:
    def test_additive(self):
        for L in range(1, 4):
            for S in range(1, 4):
                p = CostModelParams(2.0, L, S, n=2 ** 14)
                assert total_model_cost(p) == recursive_model_cost(p) + unitary_model_cost(p)

    def test_interior_optimum(self):
        rows = model_grid(100.0, 1, 2 ** 16, range(1, 17))
        totals = [r["T"] for r in rows]
        best = int(np.argmin(totals))
        assert 0 < best < len(totals) - 1

    def test_upper_bounds_measured_cost(self):
        # balanced-ish uniform data: the best stride count bounds the measured cost
        seqs, _ = grid_sequences(4096, 64, seed=3)
        tree = build_tree(seqs, get_metric("hamming"), seed=1)
        plan = compress(tree)
        L = dataset_lfd(tree)
        rows = model_grid(tree.root.radius, L, len(seqs), range(1, 20))
        assert plan.root.min_distance <= min(r["T"] for r in rows)

    def test_csv(self, tmp_path):
        rows = model_grid(1.0, 2, 64, range(1, 4))
        text = to_csv(rows, tmp_path / "grid.csv")
        assert text.splitlines()[0] == "r,L,S,n,T_R,T_U,T"
        assert (tmp_path / "grid.csv").read_text() == text


class TestTreeReports:
    def test_single_point(self):
        tree = build_tree([b"A"], get_metric("hamming"))
        assert radii_scaling_report(tree) == [{"depth": 0, "max_radius": 0.0, "flagged": False}]

    def test_radii_cover_members(self):
        data = mutated_corpus(300, n_seeds=5, length=(30, 60), seed=2)
        tree = build_tree(data, get_metric("levenshtein"), seed=1)
        assert check_radii(tree) == []

    def test_report_rows(self):
        tree = build_tree(list(uniform_disk(2000, seed=1)), get_metric("euclidean"), seed=1)
        rows = radii_scaling_report(tree, window=2)
        assert [r["depth"] for r in rows] == list(range(len(rows)))
        for r in rows:
            if r["depth"] >= 2:
                above = rows[r["depth"] - 2]["max_radius"]
                assert r["flagged"] == (r["max_radius"] > above * math.sqrt(2) / 2)

    def test_child_can_outgrow_parent(self):
        # the disk split leaves a half-disk whose median center sits far from its corners
        witnessed = False
        for seed in range(5):
            tree = build_tree(list(uniform_disk(4000, seed=seed)), get_metric("euclidean"), seed=seed)
            witnessed |= any(depth == 0 for depth, _, _ in child_radius_growth(tree))
        assert witnessed

    def test_lfd_of_planar_data(self):
        tree = build_tree(list(uniform_disk(5000, seed=2)), get_metric("euclidean"), seed=2)
        assert abs(dataset_lfd(tree) - 2) <= 0.5

    def test_lfd_of_grid_sequences(self):
        seqs, _ = grid_sequences(5000, 128, seed=2)
        tree = build_tree(seqs, get_metric("hamming"), seed=2)
        assert abs(dataset_lfd(tree) - 2) <= 0.5
