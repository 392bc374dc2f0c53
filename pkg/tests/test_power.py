# tests/test_power.py
import math

import numpy as np
import pytest

from src.config import settings
from src.errors import CapabilityError, DomainError
from src.oracle import bisect_waterfill, exhaustive_assignment
from src.power import (
    Assignment, WeightedChannel, allocation_value, assign_and_waterfill, realized_queue_rates,
    realized_rate, water_level, waterfill,
)


def _channels(weights, gains):
    return [WeightedChannel(i, w, h) for i, (w, h) in enumerate(zip(weights, gains))]


class TestWaterfill:
    def test_symmetric_pair(self):
        plan = waterfill(_channels([1.0, 1.0], [1.0, 1.0]), 8.0)
        assert plan.water_level == pytest.approx(0.2)
        assert plan.powers.tolist() == pytest.approx([4.0, 4.0])

    def test_single_channel_takes_the_budget(self):
        plan = waterfill(_channels([1.0], [2.0]), 8.0)
        assert plan.water_level == pytest.approx(2.0 / 17.0)
        assert plan.total_power == pytest.approx(8.0)

    def test_weak_channel_is_dropped(self):
        plan = waterfill(_channels([1.0, 1.0], [10.0, 0.1]), 1.0)
        assert plan.water_level == pytest.approx(1.0 / 1.1)
        assert plan.powers.tolist() == pytest.approx([1.0, 0.0])
        assert plan.active == (0,)

    def test_empty_input(self):
        plan = waterfill([], 8.0)
        assert plan.water_level is None
        assert plan.channel_ids == ()

    def test_zero_weights_get_no_power(self):
        plan = waterfill(_channels([0.0, 1.0], [5.0, 1.0]), 4.0)
        assert plan.powers[0] == 0.0
        assert plan.total_power == pytest.approx(4.0)

    def test_invalid_inputs(self):
        with pytest.raises(DomainError):
            waterfill(_channels([1.0], [0.0]), 8.0)
        with pytest.raises(DomainError):
            waterfill(_channels([1.0], [1.0]), 0.0)
        with pytest.raises(DomainError):
            waterfill(_channels([-1.0], [1.0]), 8.0)

    def test_budget_is_spent_and_levels_match_bisection(self):
        rng = np.random.default_rng(21)
        for _ in range(1000):
            n = int(rng.integers(1, 12))
            weights = rng.uniform(0.05, 2.0, n)
            gains = rng.rayleigh(4.5, n) + 1e-3
            p_max = float(rng.uniform(0.5, 16.0))
            channels = _channels(weights, gains)
            plan = waterfill(channels, p_max)
            assert plan.total_power == pytest.approx(p_max, rel=1e-9)
            reference = bisect_waterfill(channels, p_max)
            assert abs(plan.water_level - reference) <= 1e-6 * max(1.0, reference)

    def test_bisection_single_channel_closed_form(self):
        assert bisect_waterfill(_channels([1.5], [3.0]), 8.0) == pytest.approx(1.5 / (8.0 + 1.0 / 3.0))

    def test_water_level_reports_active_count(self):
        lam, m = water_level([1.0, 1.0], [10.0, 0.1], 1.0)
        assert m == 1 and lam == pytest.approx(1.0 / 1.1)


class TestRates:
    def test_single_channel_rate(self):
        plan = waterfill(_channels([1.0], [1.0]), 4.0)
        assert realized_rate(plan, [1]) == pytest.approx(math.log2(5.0))

    def test_no_successful_channel(self):
        plan = waterfill(_channels([1.0, 1.0], [1.0, 1.0]), 8.0)
        assert realized_rate(plan, [0, 0]) == 0.0

    def test_rate_cap(self):
        plan = waterfill(_channels([1.0], [1000.0]), 8.0)
        assert realized_rate(plan, [1], r_max=5.0) == 5.0

    def test_flags_must_cover_the_plan(self):
        plan = waterfill(_channels([1.0, 1.0], [1.0, 1.0]), 8.0)
        with pytest.raises(DomainError):
            realized_rate(plan, [1])

    def test_queue_rates_follow_the_assignment(self):
        assignment, plan = assign_and_waterfill([5.0, 5.0], np.array([[1.0, 1.0], [1.0, 1.0]]), [1.0, 1.0], 8.0)
        rates = realized_queue_rates(plan, assignment, [1, 1])
        assert rates.sum() == pytest.approx(realized_rate(plan, [1, 1]))


class TestAssignment:
    def test_single_queue_is_weighted_waterfilling(self):
        gains = np.array([[2.0], [0.5], [1.0]])
        weights = [1.0, 0.8, 0.5]
        assignment, plan = assign_and_waterfill([7.0], gains, weights, 8.0)
        reference = waterfill(_channels([w * 7.0 for w in weights], gains[:, 0]), 8.0)
        assert np.allclose(plan.powers, reference.powers)
        assert assignment.matrix.sum() == 3
        assert assignment.objective == pytest.approx(allocation_value([w * 7.0 for w in weights], reference))

    def test_dominant_queue_takes_every_channel(self):
        gains = np.array([[5.0, 5.0], [4.0, 4.0], [6.0, 6.0]])
        assignment, _ = assign_and_waterfill([10.0, 2.0], gains, [1.0, 1.0, 1.0], 8.0)
        assert assignment.matrix[:, 0].tolist() == [1, 1, 1]

    def test_each_channel_serves_one_queue(self):
        rng = np.random.default_rng(3)
        assignment, _ = assign_and_waterfill(rng.uniform(1, 50, 3), rng.uniform(0.5, 8, (5, 3)), np.ones(5), 8.0)
        assert np.all(assignment.matrix.sum(axis=1) == 1)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            assign_and_waterfill([1.0, 2.0], np.ones((3, 3)), [1.0] * 3, 8.0)
        with pytest.raises(DomainError):
            assign_and_waterfill([1.0, 2.0], np.ones((3, 2)), [1.0] * 2, 8.0)

    def test_no_channels(self):
        assignment, plan = assign_and_waterfill([1.0, 2.0], np.ones((0, 2)), [], 8.0)
        assert assignment.matrix.shape == (0, 2)
        assert plan.water_level is None

    def test_small_instances_match_exhaustive(self):
        rng = np.random.default_rng(17)
        for _ in range(1000):
            queues = rng.uniform(1.0, 100.0, 2)
            gains = rng.rayleigh(4.5, (4, 2)) + 1e-3
            weights = rng.uniform(0.3, 1.0, 4)
            assignment, _ = assign_and_waterfill(queues, gains, weights, 8.0)
            _, best = exhaustive_assignment(queues, gains, weights, 8.0)
            assert assignment.objective == pytest.approx(best, rel=1e-9)

    def test_greedy_never_beats_exhaustive(self, monkeypatch):
        monkeypatch.setattr(settings, "exact_assignment_max_maps", 0)
        rng = np.random.default_rng(20)
        for _ in range(300):
            queues = rng.uniform(1.0, 100.0, 2)
            gains = rng.rayleigh(4.5, (4, 2)) + 1e-3
            weights = rng.uniform(0.3, 1.0, 4)
            assignment, _ = assign_and_waterfill(queues, gains, weights, 8.0)
            _, best = exhaustive_assignment(queues, gains, weights, 8.0)
            assert assignment.objective <= best + 1e-9 * max(1.0, best)

    def test_greedy_matches_exhaustive_with_a_dominant_queue(self, monkeypatch):
        monkeypatch.setattr(settings, "exact_assignment_max_maps", 0)
        rng = np.random.default_rng(18)
        for _ in range(50):
            queues = np.array([rng.uniform(50.0, 100.0), rng.uniform(1.0, 5.0)])
            base = rng.uniform(1.0, 8.0, 4)
            gains = np.column_stack([base, base * rng.uniform(0.5, 1.0, 4)])
            weights = rng.uniform(0.3, 1.0, 4)
            assignment, _ = assign_and_waterfill(queues, gains, weights, 8.0)
            _, best = exhaustive_assignment(queues, gains, weights, 8.0)
            assert assignment.objective == pytest.approx(best, rel=1e-9)

    def test_no_single_move_improves_the_assignment(self):
        rng = np.random.default_rng(19)
        for _ in range(50):
            queues = rng.uniform(1.0, 100.0, 3)
            gains = rng.rayleigh(4.5, (5, 3)) + 1e-3
            weights = rng.uniform(0.3, 1.0, 5)
            assignment, _ = assign_and_waterfill(queues, gains, weights, 8.0)
            choice = assignment.matrix.argmax(axis=1)
            for i in range(5):
                for j in range(3):
                    trial = choice.copy()
                    trial[i] = j
                    w = weights * queues[trial]
                    plan = waterfill(_channels(w, gains[np.arange(5), trial]), 8.0)
                    assert allocation_value(w, plan) <= assignment.objective + 1e-9 * max(1.0, assignment.objective)

    def test_exhaustive_single_queue(self):
        gains = np.array([[2.0], [1.0]])
        assignment, best = exhaustive_assignment([3.0], gains, [1.0, 1.0], 8.0)
        plan = waterfill(_channels([3.0, 3.0], [2.0, 1.0]), 8.0)
        assert best == pytest.approx(allocation_value([3.0, 3.0], plan), rel=1e-9)
        assert assignment.matrix.sum() == 2

    def test_exhaustive_cap(self):
        with pytest.raises(CapabilityError):
            exhaustive_assignment([1.0, 1.0], np.ones((7, 2)), [1.0] * 7, 8.0)

    def test_assignment_queue_lookup(self):
        assert Assignment(np.array([[0, 1], [1, 0]])).queue_of(0) == 1
