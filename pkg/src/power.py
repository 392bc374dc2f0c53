# src/power.py
"""Second-stage allocation: waterfilling power and multi-queue channel assignment.

Rates follow the Shannon abstraction r_i = I_i log2(1 + h_i P_i). The water-level
algebra maximizes sum_i w_i ln(1 + h_i P_i); the natural-log objective and the
log2 rates differ by the constant 1/ln 2, which changes no argmax.
"""
import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from src.config import settings
from src.errors import DomainError, InternalError


@dataclass(frozen=True)
class WeightedChannel:
    id: int
    weight: float
    gain: float


@dataclass(frozen=True)
class PowerPlan:
    channel_ids: Tuple[int, ...]
    water_level: Optional[float]   # None when no channel is active
    powers: np.ndarray
    gains: np.ndarray
    rates: np.ndarray              # log2(1 + h P), before transmission flags

    @property
    def total_power(self) -> float:
        return float(self.powers.sum())

    @property
    def active(self) -> Tuple[int, ...]:
        return tuple(cid for cid, p in zip(self.channel_ids, self.powers) if p > 0)

    def power_of(self, channel_id: int) -> float:
        for cid, p in zip(self.channel_ids, self.powers):
            if cid == channel_id:
                return float(p)
        return 0.0


EMPTY_PLAN = PowerPlan((), None, np.zeros(0), np.zeros(0), np.zeros(0))


@dataclass(frozen=True)
class Assignment:
    matrix: np.ndarray                       # T_ij, channels x queues
    channel_ids: Tuple[int, ...] = field(default=())
    objective: float = 0.0                   # sum_i w_i Q_j ln(1 + h_ij P_i)

    def queue_of(self, position: int) -> int:
        return int(np.argmax(self.matrix[position]))


def water_level(weights: Sequence[float], gains: Sequence[float], p_max: float) -> Tuple[Optional[float], int]:
    """Returns (lambda, number of active channels).

    Channels are ranked by w*h; the active set shrinks from the bottom while
    Lambda(m) = sum w / (P_max + sum 1/h) is not below the m-th w*h.
    """
    n = len(weights)
    order = sorted(range(n), key=lambda k: (-weights[k] * gains[k], k))
    sum_w = [0.0] * (n + 1)
    sum_inv = [0.0] * (n + 1)
    for pos, k in enumerate(order):
        sum_w[pos + 1] = sum_w[pos] + weights[k]
        sum_inv[pos + 1] = sum_inv[pos] + 1.0 / gains[k]

    m = n
    while m > 0:
        lam = sum_w[m] / (p_max + sum_inv[m])
        k = order[m - 1]
        if lam < weights[k] * gains[k]:
            return lam, m
        m -= 1
    return None, 0


def _powers(weights: np.ndarray, gains: np.ndarray, lam: Optional[float]) -> np.ndarray:
    if lam is None:
        return np.zeros(len(weights))
    return np.maximum(weights / lam - 1.0 / gains, 0.0)


def _check_inputs(weights: np.ndarray, gains: np.ndarray, p_max: float) -> None:
    if p_max <= 0:
        raise DomainError(f"power budget must be positive, got {p_max}")
    if np.any(gains <= 0):
        raise DomainError("channel gains must be positive")
    if np.any(weights < 0):
        raise DomainError("channel weights must be non-negative")


def waterfill(channels: Sequence[WeightedChannel], p_max: float) -> PowerPlan:
    """Optimal P maximizing sum w_i ln(1 + h_i P_i) under sum P_i <= P_max"""
    weights = np.array([ch.weight for ch in channels], dtype=float)
    gains = np.array([ch.gain for ch in channels], dtype=float)
    _check_inputs(weights, gains, p_max)
    if not channels:
        return EMPTY_PLAN

    lam, _ = water_level(weights.tolist(), gains.tolist(), p_max)
    powers = _powers(weights, gains, lam)
    return PowerPlan(
        channel_ids=tuple(ch.id for ch in channels),
        water_level=lam,
        powers=powers,
        gains=gains,
        rates=np.log2(1.0 + gains * powers),
    )


def allocation_value(weights: Sequence[float], plan: PowerPlan) -> float:
    """sum w_i ln(1 + h_i P_i), the value waterfilling maximizes"""
    w = np.asarray(weights, dtype=float)
    return float(np.sum(w * np.log1p(plan.gains * plan.powers)))


def realized_rate(plan: PowerPlan, flags: Sequence[int], r_max: float = np.inf) -> float:
    """r = sum I_i log2(1 + h_i P_i), capped at r_max"""
    flags = np.asarray(flags, dtype=float)
    if flags.shape != plan.rates.shape:
        raise DomainError("transmission flags must cover every planned channel")
    return float(min(np.sum(flags * plan.rates), r_max))


def realized_queue_rates(
    plan: PowerPlan, assignment: Assignment, flags: Sequence[int], r_max: float = np.inf
) -> np.ndarray:
    """Per-queue service r_j = sum_i I_i T_ij log2(1 + h_ij P_i), each capped at r_max"""
    flags = np.asarray(flags, dtype=float)
    if flags.shape != plan.rates.shape:
        raise DomainError("transmission flags must cover every planned channel")
    if assignment.matrix.shape[0] == 0:
        return np.zeros(assignment.matrix.shape[1])
    per_queue = (flags * plan.rates) @ assignment.matrix
    return np.minimum(per_queue, r_max)


def _pick_queue(queues: np.ndarray, gains_row: np.ndarray, allowed: Sequence[int]) -> int:
    # longest queue, then larger gain, then lower index
    return max(allowed, key=lambda j: (queues[j], gains_row[j], -j))


def _assignment_value(
    weights: np.ndarray, queues: np.ndarray, gains: np.ndarray, choice: np.ndarray, p_max: float
) -> float:
    rows = np.arange(len(choice))
    w = weights * queues[choice]
    h = gains[rows, choice]
    lam, _ = water_level(w.tolist(), h.tolist(), p_max)
    p = _powers(w, h, lam)
    return float(np.sum(w * np.log1p(h * p)))


def assign_and_waterfill(
    queues: Sequence[float],
    gains: np.ndarray,
    weights: Sequence[float],
    p_max: float,
    channel_ids: Optional[Sequence[int]] = None,
    polish: bool = True,
) -> Tuple[Assignment, PowerPlan]:
    """Channel-to-queue assignment with waterfilling.

    When J^n is at most settings.exact_assignment_max_maps every map is tried.
    Otherwise every channel starts on the longest queue; channels priced out by the
    water level move to the longest queue on which they clear it, until a
    fixed point. With polish, single-channel moves that raise the objective
    are then applied until none is left.
    """
    q = np.asarray(queues, dtype=float)
    h = np.asarray(gains, dtype=float)
    w = np.asarray(weights, dtype=float)
    if q.ndim != 1 or len(q) == 0:
        raise DomainError("at least one queue is required")
    if h.ndim != 2 or h.shape[1] != len(q) or h.shape[0] != len(w):
        raise DomainError(f"gain matrix {h.shape} does not match {len(w)} channels x {len(q)} queues")
    if np.any(q < 0):
        raise DomainError("queue lengths must be non-negative")
    _check_inputs(w, h, p_max)
    n, n_queues = h.shape
    ids = tuple(channel_ids) if channel_ids is not None else tuple(range(n))
    if n == 0:
        return Assignment(np.zeros((0, n_queues), dtype=int), ids, 0.0), EMPTY_PLAN

    if n_queues == 1:
        plan = waterfill([WeightedChannel(cid, w[i] * q[0], h[i, 0]) for i, cid in enumerate(ids)], p_max)
        matrix = np.ones((n, 1), dtype=int)
        return Assignment(matrix, ids, allocation_value(w * q[0], plan)), plan

    rows = np.arange(n)
    if n_queues ** n <= settings.exact_assignment_max_maps:
        choice = _best_map(w, q, h, p_max)
    else:
        choice = _greedy_map(w, q, h, p_max, polish)

    weight_now = w * q[choice]
    plan = waterfill(
        [WeightedChannel(cid, weight_now[i], h[i, choice[i]]) for i, cid in enumerate(ids)], p_max
    )
    matrix = np.zeros((n, n_queues), dtype=int)
    matrix[rows, choice] = 1
    return Assignment(matrix, ids, allocation_value(weight_now, plan)), plan


def _best_map(w: np.ndarray, q: np.ndarray, h: np.ndarray, p_max: float) -> np.ndarray:
    best, best_value = None, -np.inf
    for choice in itertools.product(range(len(q)), repeat=len(w)):
        choice = np.array(choice, dtype=int)
        value = _assignment_value(w, q, h, choice, p_max)
        if best is None or value > best_value + 1e-12 * max(1.0, abs(best_value)):
            best, best_value = choice, value
    return best


def _greedy_map(w: np.ndarray, q: np.ndarray, h: np.ndarray, p_max: float, polish: bool) -> np.ndarray:
    n, n_queues = h.shape
    all_queues = list(range(n_queues))
    choice = np.array([_pick_queue(q, h[i], all_queues) for i in range(n)], dtype=int)
    rows = np.arange(n)
    cap = n * n_queues
    for _ in range(cap + 1):
        weight_now = w * q[choice]
        gain_now = h[rows, choice]
        lam, _ = water_level(weight_now.tolist(), gain_now.tolist(), p_max)
        if lam is None:
            break
        changed = False
        for i in range(n):
            if weight_now[i] * gain_now[i] > lam:
                continue
            allowed = [j for j in all_queues if w[i] * q[j] * h[i, j] > lam]
            if allowed:
                target = _pick_queue(q, h[i], allowed)
                if target != choice[i]:
                    choice[i] = target
                    changed = True
        if not changed:
            break
    else:
        raise InternalError(f"channel assignment did not settle within {cap} rounds")

    best = _assignment_value(w, q, h, choice, p_max)
    improved = polish
    while improved:
        improved = False
        for i in range(n):
            for j in all_queues:
                if j == choice[i]:
                    continue
                trial = choice.copy()
                trial[i] = j
                value = _assignment_value(w, q, h, trial, p_max)
                if value > best + 1e-12 * max(1.0, abs(best)):
                    choice, best, improved = trial, value, True
    return choice
