import math

import numpy as np
import pytest

from vdsa.allocation import (SearchFrontier, composition_array, enumerate_allocations,
                             equal_allocation, global_optimal, heuristic_allocation,
                             heuristic_weights, iterative_optimal, largest_remainder,
                             n_compositions)
from vdsa.bounds import BoundEvaluator, bounds_for_plan
from vdsa.core import ChannelSet, CbrEstimate
from vdsa.errors import CapacityError, DomainError

FIG = ChannelSet((0.2, 0.35, 0.6, 0.8))


class TestEqual:
    def test_exact_division(self):
        assert equal_allocation(8, 4, 0).counts == (2, 2, 2, 2)

    def test_remainder_on_distinct_channels(self):
        seen = set()
        for seed in range(10_000):
            c = equal_allocation(6, 4, seed).counts
            assert sum(c) == 6 and max(c) - min(c) <= 1
            seen.add(c)
        # all C(4,2) placements of the two extras occur
        assert len(seen) == 6

    def test_budget_below_channels(self):
        c = equal_allocation(3, 4, 1).counts
        assert sorted(c) == [0, 1, 1, 1]


class TestEnumeration:
    def test_count_with_base(self):
        rows = list(enumerate_allocations(2, 4, (1, 1, 1, 1)))
        assert len(rows) == 10 == math.comb(5, 3)
        assert len(set(rows)) == 10
        assert all(sum(r) == 6 and min(r) >= 1 for r in rows)

    def test_zero_total(self):
        assert list(enumerate_allocations(0, 3, (2, 0, 1))) == [(2, 0, 1)]

    def test_two_channels(self):
        assert set(enumerate_allocations(1, 2, (0, 0))) == {(1, 0), (0, 1)}

    def test_composition_array_matches_generator(self):
        a = composition_array(5, 3)
        assert a.shape[0] == n_compositions(5, 3)
        assert {tuple(r) for r in a} == set(enumerate_allocations(5, 3))
        # lexicographic order
        assert [tuple(r) for r in a] == sorted(tuple(r) for r in a)


class TestGlobal:
    def test_first_iteration_single_tuple(self):
        r = global_optimal(FIG, 8, 1)
        assert r.plan.counts == (2, 2, 2, 2)
        assert r.maximizers == ((2, 2, 2, 2),)
        assert r.bounds.upper == pytest.approx(bounds_for_plan(FIG, (2, 2, 2, 2)).upper, abs=1e-12)

    def test_is_true_maximum(self):
        r = global_optimal(FIG, 4, 3)
        best = max(bounds_for_plan(FIG, t).upper for t in enumerate_allocations(8, 4, (1,) * 4))
        assert r.bounds.upper == pytest.approx(best, abs=1e-12)

    def test_cap(self):
        with pytest.raises(CapacityError) as err:
            global_optimal(FIG, 8, 20, cap=1000)
        assert err.value.index == 20

    def test_budget_below_channels(self):
        with pytest.raises(DomainError):
            global_optimal(FIG, 3, 2)

    def test_trivial_channel_set(self):
        r = global_optimal(ChannelSet((0.0, 1.0, 1.0)), 3, 2)
        assert r.bounds.upper == 1.0 and r.bounds.lower == 1.0


class TestIterative:
    def test_first_step_from_base(self):
        fr, plan = iterative_optimal(FIG, 8, SearchFrontier.start(8, 4))
        assert plan.counts == (2, 2, 2, 2) and fr.iteration == 1

    def test_cumulative_counts_non_decreasing(self):
        ev = BoundEvaluator(FIG, 60)
        fr = SearchFrontier.start(6, 4)
        prev = None
        for i in range(10):
            fr, plan = iterative_optimal(FIG, 6, fr, evaluator=ev)
            assert plan.total == 6 * (i + 1)
            if prev is not None:
                assert all(a >= b for a, b in zip(plan.counts, prev))
            prev = plan.counts

    def test_never_beats_global(self):
        ev = BoundEvaluator(FIG, 40)
        fr = SearchFrontier.start(5, 4)
        for i in range(1, 8):
            fr, _ = iterative_optimal(FIG, 5, fr, evaluator=ev)
            g = global_optimal(FIG, 5, i, evaluator=ev)
            assert fr.bound <= g.bounds.upper + 1e-12

    def test_degenerate_set_already_certain(self):
        cs = ChannelSet((0.0, 1.0, 1.0, 1.0))
        fr, _ = iterative_optimal(cs, 4, SearchFrontier.start(4, 4))
        assert fr.bound == 1.0

    def test_frontier_cap_truncates(self):
        # every allocation of an all-equal set ties, so the frontier overflows
        cs = ChannelSet((0.0, 0.0, 1.0, 1.0))
        fr, _ = iterative_optimal(cs, 8, SearchFrontier(((1, 1, 1, 1),), 1.0, 0), cap=5)
        assert fr.truncated and len(fr.tuples) == 5


class TestHeuristic:
    def test_rounding_example(self):
        assert heuristic_allocation((0.2, 0.35, 0.6, 0.8), -2, 8).counts == (3, 3, 1, 1)

    def test_weights_example(self):
        w = heuristic_weights(np.array([0.2, 0.35, 0.6, 0.8]), -2)
        ref = np.exp(-2 * np.array([0.35, 0.35, 0.6, 0.8]))
        assert np.allclose(w / w.sum(), ref / ref.sum(), rtol=1e-12)
        assert np.allclose(8 * ref / ref.sum(), [2.655, 2.655, 1.610, 1.079], atol=1e-3)

    def test_gamma_zero_is_equal_shape(self):
        w = heuristic_weights(np.array([0.1, 0.5, 0.9]), 0.0)
        assert np.all(w == 1.0)
        assert heuristic_allocation((0.1, 0.5, 0.9, 0.3), 0.0, 8).counts == (2, 2, 2, 2)

    def test_very_negative_gamma_top_two(self):
        assert heuristic_allocation((0.2, 0.35, 0.6, 0.8), -50, 8).counts == (4, 4, 0, 0)

    def test_accepts_estimate(self):
        est = CbrEstimate((1, 2, 3, 4), (5, 5, 5, 5))
        assert sum(heuristic_allocation(est, -2, 8).counts) == 8

    def test_positive_gamma_rejected(self):
        with pytest.raises(DomainError):
            heuristic_allocation((0.2, 0.3), 1.0, 4)

    def test_largest_remainder_ties_to_lower_index(self):
        assert largest_remainder(np.ones(4), 6).tolist() == [2, 2, 1, 1]

    def test_largest_remainder_rowwise(self):
        w = np.array([[1.0, 1.0, 1.0], [5.0, 1.0, 0.0]])
        out = largest_remainder(w, 4)
        assert out.sum(axis=1).tolist() == [4, 4]
        assert out[1].tolist() == [3, 1, 0]
