# src/oracle.py
"""Brute-force references for the pricing, waterfilling, selection and
assignment algorithms. Nothing here calls the routines it checks."""
import itertools
import math
from typing import Optional, Sequence, Tuple

import numpy as np

from src.config import settings
from src.demand import DemandModel, PricingDecision
from src.errors import CapabilityError, DomainError
from src.models import SensingTech
from src.power import Assignment, WeightedChannel
from src.selection import SelectionInstance, SelectionResult


def _power_sum(weights: np.ndarray, gains: np.ndarray, lam: float) -> float:
    return float(np.sum(np.maximum(weights / lam - 1.0 / gains, 0.0)))


def _bisect_level(weights: np.ndarray, gains: np.ndarray, p_max: float) -> Optional[float]:
    live = weights > 0
    if not np.any(live):
        return None
    w, h = weights[live], gains[live]
    hi = float(np.max(w * h))
    lo = hi / 2.0
    while _power_sum(w, h, lo) < p_max:
        lo /= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _power_sum(w, h, mid) > p_max:
            lo = mid
        else:
            hi = mid
        if abs(_power_sum(w, h, mid) - p_max) <= 1e-12 * p_max:
            break
    lam = 0.5 * (lo + hi)

    # snap to the closed form on the active set the bisection found
    active = w * h > lam
    exact = float(np.sum(w[active]) / (p_max + np.sum(1.0 / h[active])))
    if np.all(w[active] * h[active] > exact) and np.all(w[~active] * h[~active] <= exact):
        return exact
    return lam


def bisect_waterfill(channels: Sequence[WeightedChannel], p_max: float) -> Optional[float]:
    """Water level lambda with sum_i (w_i/lambda - 1/h_i)^+ = P_max"""
    if not channels:
        raise DomainError("bisection needs at least one channel")
    weights = np.array([c.weight for c in channels], dtype=float)
    gains = np.array([c.gain for c in channels], dtype=float)
    if p_max <= 0 or np.any(gains <= 0):
        raise DomainError("bisection needs P_max > 0 and positive gains")
    return _bisect_level(weights, gains, p_max)


def grid_price(demand: DemandModel, market: float, backlog: float, v: float, grid_steps: int) -> PricingDecision:
    """argmax of (q - Q/V) D(M, q) over a uniform grid on [0, q_max]"""
    if grid_steps < 2:
        raise DomainError("the price grid needs at least two points")
    shift = backlog / v
    grid = np.linspace(0.0, demand.q_max, grid_steps)
    values = np.array([(q - shift) * demand.expected_demand(market, q) for q in grid])
    k = int(np.argmax(values))
    return PricingDecision(price=float(grid[k]), admit=bool(values[k] > 0), objective=float(values[k]))


def _channel_terms(instance: SelectionInstance, tech: SensingTech):
    """(ids, is_sensing, omega, alpha, h, cost) for every channel of the instance"""
    ids, sensing, omega, alpha, gains, costs = [], [], [], [], [], []
    for cid, h, c in zip(instance.leasing_ids, instance.leasing_gains, instance.leasing_costs):
        ids.append(cid); sensing.append(False)
        omega.append(1.0); alpha.append(1.0); gains.append(float(h)); costs.append(float(c))
    for cid, h, z, p in zip(instance.sensing_ids, instance.sensing_gains,
                            instance.virtual_queues, instance.idle_probs):
        hit = p * (1.0 - tech.p_fa)
        miss = (1.0 - p) * tech.p_md
        ids.append(cid); sensing.append(True)
        omega.append(hit / (hit + miss) if hit + miss > 0 else 0.0)
        alpha.append(hit)
        gains.append(float(h))
        costs.append(tech.cost + z * (1.0 - p) * tech.p_md / instance.v)
    return ids, sensing, np.array(omega), np.array(alpha), np.array(gains), np.array(costs)


def brute_force_selection(
    instance: SelectionInstance, tech: Optional[SensingTech] = None
) -> SelectionResult:
    """Exact minimum of U over every (leasing subset, sensing subset) pair,
    and over the whole menu when no technology is given"""
    total = len(instance.leasing_ids) + len(instance.sensing_ids)
    cap = settings.selection_oracle_max_channels
    if total > cap:
        raise CapabilityError(f"{total} channels exceed the brute-force cap of {cap}")

    if tech is not None:
        menu = [(None, tech)]
    else:
        menu = sorted(enumerate(instance.techs), key=lambda kt: (kt[1].cost, kt[0]))
    qv = instance.q_over_v
    best: Optional[SelectionResult] = None

    for index, candidate_tech in menu:
        ids, sensing, omega, alpha, gains, costs = _channel_terms(instance, candidate_tech)
        best_here = SelectionResult(candidate_tech, index, (), (), 0.0, None)
        masks = sorted(itertools.product((False, True), repeat=total), key=sum)
        for mask in masks:
            chosen = np.array(mask, dtype=bool)
            if not chosen.any():
                continue
            lam = _bisect_level(omega[chosen], gains[chosen], instance.p_max)
            value = float(np.sum(costs[chosen]))
            if lam is not None and qv > 0:
                ratio = omega[chosen] * gains[chosen] / lam
                logs = np.where(ratio > 1.0, np.log(np.maximum(ratio, 1.0)), 0.0)
                value -= qv * float(np.sum(alpha[chosen] * logs))
            if value < best_here.objective - 1e-12 * max(1.0, abs(best_here.objective)):
                picked = [k for k in range(total) if mask[k]]
                best_here = SelectionResult(
                    candidate_tech, index,
                    sensing_set=tuple(sorted(ids[k] for k in picked if sensing[k])),
                    leasing_set=tuple(sorted(ids[k] for k in picked if not sensing[k])),
                    objective=value, water_level=lam,
                )
        if best is None or best_here.objective < best.objective - 1e-12 * max(1.0, abs(best.objective)):
            best = best_here
    return best


def exhaustive_assignment(
    queues: Sequence[float], gains: np.ndarray, weights: Sequence[float], p_max: float
) -> Tuple[Assignment, float]:
    """Best of all J^n channel-to-queue maps, each followed by waterfilling"""
    q = np.asarray(queues, dtype=float)
    h = np.asarray(gains, dtype=float)
    w = np.asarray(weights, dtype=float)
    n, n_queues = h.shape
    if n > settings.assignment_oracle_max_channels or n_queues > settings.assignment_oracle_max_queues:
        raise CapabilityError(
            f"{n} channels x {n_queues} queues exceed the exhaustive assignment cap"
        )
    rows = np.arange(n)
    best_value, best_choice = -math.inf, None
    for choice in itertools.product(range(n_queues), repeat=n):
        choice = np.array(choice, dtype=int)
        weight = w * q[choice]
        gain = h[rows, choice]
        lam = _bisect_level(weight, gain, p_max)
        if lam is None:
            value = 0.0
        else:
            powers = np.maximum(weight / lam - 1.0 / gain, 0.0)
            value = float(np.sum(weight * np.log1p(gain * powers)))
        if value > best_value + 1e-12 * max(1.0, abs(best_value) if best_value > -math.inf else 1.0):
            best_value, best_choice = value, choice
    matrix = np.zeros((n, n_queues), dtype=int)
    if n:
        matrix[rows, best_choice] = 1
    else:
        best_value = 0.0
    return Assignment(matrix, tuple(range(n)), best_value), best_value
