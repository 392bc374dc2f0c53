# src/selection.py
"""First-stage decisions: which technology to sense with, which channels to
sense and which to lease.

Each channel is ranked by its virtual gain g (its gain discounted by its cost),
and the chosen sets are searched as prefixes of the g-sorted candidate lists.
The objective U of a set is

    U = sum_i C_i - (Q/V) sum_i alpha_i (ln(w_i h_i / lambda))^+

with lambda the water level of the set; smaller is better and the empty set
scores 0.
"""
import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.config import settings
from src.errors import CapabilityError, DomainError
from src.models import Band, OccupancyModel, SensingTech
from src.power import water_level


@dataclass(frozen=True)
class SelectionInstance:
    backlog: float
    v: float
    p_max: float
    techs: Tuple[SensingTech, ...]
    leasing_ids: Tuple[int, ...]
    leasing_gains: np.ndarray
    leasing_costs: np.ndarray
    sensing_ids: Tuple[int, ...]
    sensing_gains: np.ndarray
    virtual_queues: np.ndarray
    idle_probs: np.ndarray
    # every sensing channel shares one transition matrix (or is i.i.d.)
    uniform_transitions: bool = True

    def __post_init__(self):
        if self.backlog < 0 or self.v <= 0 or self.p_max <= 0:
            raise DomainError("selection needs Q >= 0, V > 0 and P_max > 0")
        if len(self.leasing_ids) != len(self.leasing_gains) or len(self.leasing_ids) != len(self.leasing_costs):
            raise DomainError("leasing candidates are inconsistent")
        sizes = {len(self.sensing_ids), len(self.sensing_gains), len(self.virtual_queues), len(self.idle_probs)}
        if len(sizes) != 1:
            raise DomainError("sensing candidates are inconsistent")
        if set(self.leasing_ids) & set(self.sensing_ids):
            raise DomainError("a channel cannot be in both bands")

    @property
    def q_over_v(self) -> float:
        return self.backlog / self.v


@dataclass(frozen=True)
class Candidate:
    id: int
    band: Band
    weight: float        # omega
    alpha: float
    gain: float          # h
    cost: float          # C^l, or the virtual sensing cost
    virtual_gain: float  # g


@dataclass(frozen=True)
class SelectionResult:
    tech: Optional[SensingTech]
    tech_index: Optional[int]
    sensing_set: Tuple[int, ...]
    leasing_set: Tuple[int, ...]
    objective: float
    water_level: Optional[float]

    @property
    def empty(self) -> bool:
        return not self.sensing_set and not self.leasing_set


Number = Union[float, np.ndarray]


def virtual_sensing_cost(cost: float, z: Number, v: float, busy_prob: Number, p_md: float) -> Number:
    """C^s + (1/V) Z E[X], with E[X] = P(busy) P_md"""
    if v <= 0:
        raise DomainError("V must be positive")
    return cost + z * busy_prob * p_md / v


def posterior_weights(
    tech: SensingTech,
    occupancy: Union[OccupancyModel, float, np.ndarray],
    prev_state: Optional[int] = None,
) -> Tuple[Number, Number]:
    """(omega, alpha): P(idle | sensed idle) and P(idle and sensed idle)"""
    if isinstance(occupancy, OccupancyModel):
        state = occupancy.initial_state if prev_state is None else prev_state
        idle = occupancy.idle_prob(state)
    else:
        idle = occupancy
    idle = np.asarray(idle, dtype=float)
    alpha = idle * (1.0 - tech.p_fa)
    denom = alpha + (1.0 - idle) * tech.p_md
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = np.where(denom > 0, alpha / np.where(denom > 0, denom, 1.0), 0.0)
    if omega.ndim == 0:
        return float(omega), float(alpha)
    return omega, alpha


def _discounted(gain: float, cost: float, scale: float) -> float:
    # gain * exp(-cost / scale); a zero scale leaves nothing of a positive cost
    if scale <= 0:
        return gain if cost <= 0 else 0.0
    return gain * math.exp(-cost / scale)


def _by_virtual_gain(candidate: Candidate) -> Tuple[float, int]:
    return -candidate.virtual_gain, candidate.id


def virtual_gains(instance: SelectionInstance, tech: SensingTech) -> Tuple[List[Candidate], List[Candidate]]:
    """Leasing and sensing candidates sorted by decreasing virtual gain.

    With Q = 0 nothing is worth transmitting and both lists come back empty.
    """
    if instance.backlog <= 0:
        return [], []
    qv = instance.q_over_v

    leasing = [
        Candidate(cid, Band.LEASING, 1.0, 1.0, float(h), float(c), _discounted(float(h), float(c), qv))
        for cid, h, c in zip(instance.leasing_ids, instance.leasing_gains, instance.leasing_costs)
    ]

    omega, alpha = posterior_weights(tech, np.asarray(instance.idle_probs, dtype=float))
    omega, alpha = np.atleast_1d(omega), np.atleast_1d(alpha)
    costs = np.atleast_1d(virtual_sensing_cost(
        tech.cost, np.asarray(instance.virtual_queues, dtype=float), instance.v,
        1.0 - np.asarray(instance.idle_probs, dtype=float), tech.p_md,
    ))
    sensing = []
    for k, cid in enumerate(instance.sensing_ids):
        w, a, h, c = float(omega[k]), float(alpha[k]), float(instance.sensing_gains[k]), float(costs[k])
        g = 0.0 if w <= 0 or a <= 0 else _discounted(w * h, c, qv * a)
        sensing.append(Candidate(cid, Band.SENSING, w, a, h, c, g))

    return sorted(leasing, key=_by_virtual_gain), sorted(sensing, key=_by_virtual_gain)


def search_threshold(candidates: Sequence[Candidate], p_max: float) -> int:
    """The largest prefix length m with Lambda(m) < g_m, else 0"""
    if not candidates:
        return 0
    weights = np.cumsum([c.weight for c in candidates])
    inv_gains = np.cumsum([1.0 / c.gain for c in candidates])
    levels = weights / (p_max + inv_gains)
    passing = np.flatnonzero(levels < np.array([c.virtual_gain for c in candidates]))
    return int(passing[-1]) + 1 if len(passing) else 0


def evaluate_set(chosen: Sequence[Candidate], q_over_v: float, p_max: float) -> Tuple[float, Optional[float]]:
    """(U, lambda) of one candidate set"""
    if not chosen:
        return 0.0, None
    weights = [c.weight for c in chosen]
    gains = [c.gain for c in chosen]
    lam, _ = water_level(weights, gains, p_max)
    cost = sum(c.cost for c in chosen)
    if lam is None:
        return cost, None
    gain = 0.0
    for c in chosen:
        ratio = c.weight * c.gain / lam
        if ratio > 1.0:
            gain += c.alpha * math.log(ratio)
    return cost - q_over_v * gain, lam


def satisfies_selection_condition(candidate: Candidate, q_over_v: float, lam: float) -> bool:
    """C_i <= (Q/V) alpha_i (ln(w_i h_i / lambda))^+"""
    ratio = candidate.weight * candidate.gain / lam
    gain = math.log(ratio) if ratio > 1.0 else 0.0
    return candidate.cost <= q_over_v * candidate.alpha * gain + 1e-12


def _better(value: float, best: float) -> bool:
    return value < best - 1e-12 * max(1.0, abs(best))


def _group_by_prior(instance: SelectionInstance, sensing: List[Candidate]) -> List[List[Candidate]]:
    # channel-uniform Markov mode: the prev-idle and prev-busy types, each in g order
    prior = dict(zip(instance.sensing_ids, (float(p) for p in instance.idle_probs)))
    groups: Dict[float, List[Candidate]] = {}
    for cand in sensing:
        groups.setdefault(prior[cand.id], []).append(cand)
    if len(groups) > 2:
        raise DomainError(
            f"channel-uniform transitions give at most two prior idle probabilities, got {len(groups)}"
        )
    return [groups[key] for key in sorted(groups, reverse=True)]


def _empty_result(tech: Optional[SensingTech], tech_index: Optional[int]) -> SelectionResult:
    return SelectionResult(tech, tech_index, (), (), 0.0, None)


@dataclass(frozen=True)
class _PrefixSums:
    """Running sums over the first m candidates of a g-sorted list, m = 0..cap"""
    weight: np.ndarray
    inv_gain: np.ndarray
    cost: np.ndarray
    alpha: np.ndarray
    alpha_log: np.ndarray   # sum of alpha ln(w h)
    boundary: np.ndarray    # g of the m-th candidate; +inf for the empty prefix


def _prefix_sums(candidates: Sequence[Candidate]) -> _PrefixSums:
    w = np.array([c.weight for c in candidates], dtype=float)
    h = np.array([c.gain for c in candidates], dtype=float)
    alpha = np.array([c.alpha for c in candidates], dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha_log = np.where(alpha > 0, alpha * np.log(w * h), 0.0)

    def running(values) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(values, dtype=float)))

    return _PrefixSums(
        weight=running(w),
        inv_gain=running(1.0 / h),
        cost=running([c.cost for c in candidates]),
        alpha=running(alpha),
        alpha_log=running(alpha_log),
        boundary=np.concatenate(([np.inf], [c.virtual_gain for c in candidates])),
    )


def _prefix_grid(tables: Sequence[_PrefixSums], q_over_v: float, p_max: float) -> np.ndarray:
    """U over every combination of prefix lengths, one axis per list; inf where infeasible.

    A combination is feasible when each non-empty prefix's last channel clears
    the water level of the union. Every chosen channel then has w h >= g > lambda,
    so the whole union is active and lambda, U follow from the running sums.
    """
    ndim = len(tables)

    def along(values: np.ndarray, axis: int) -> np.ndarray:
        shape = [1] * ndim
        shape[axis] = -1
        return values.reshape(shape)

    def total(field: str) -> np.ndarray:
        return sum(along(getattr(table, field), k) for k, table in enumerate(tables))

    sum_w, sum_inv = total("weight"), total("inv_gain")
    boundary = along(tables[0].boundary, 0)
    for k, table in enumerate(tables[1:], start=1):
        boundary = np.minimum(boundary, along(table.boundary, k))

    level = sum_w / (p_max + sum_inv)
    with np.errstate(divide="ignore", invalid="ignore"):
        objective = total("cost") - q_over_v * (total("alpha_log") - total("alpha") * np.log(level))
    grid = np.where((boundary > level) & (level > 0), objective, np.inf)
    grid = np.broadcast_to(grid, tuple(len(table.boundary) for table in tables)).copy()
    grid[(0,) * ndim] = 0.0
    return grid


def select_channels(
    instance: SelectionInstance, tech: SensingTech, tech_index: Optional[int] = None,
    split_by_prior: bool = False,
) -> SelectionResult:
    """Best (leasing prefix, sensing prefix) pair for one technology.

    With split_by_prior the sensing band is cut into its prior types and one
    prefix per type is searched.
    """
    if instance.backlog <= 0:
        return _empty_result(tech, tech_index)
    qv, p_max = instance.q_over_v, instance.p_max
    leasing, sensing = virtual_gains(instance, tech)
    groups = _group_by_prior(instance, sensing) if split_by_prior else [sensing]
    lists = [leasing] + [group for group in groups if group]
    lists = [band[:search_threshold(band, p_max)] for band in lists]

    grid = _prefix_grid([_prefix_sums(band) for band in lists], qv, p_max)
    best_value = float(grid.min())
    if not _better(best_value, 0.0):
        return _empty_result(tech, tech_index)
    # first combination, in (leasing, sensing...) order, within rounding of the minimum
    tolerance = 1e-12 * max(1.0, abs(best_value))
    flat = int(np.flatnonzero(grid.ravel() <= best_value + tolerance)[0])
    cuts = np.unravel_index(flat, grid.shape)

    chosen = [cand for band, cut in zip(lists, cuts) for cand in band[:int(cut)]]
    value, lam = evaluate_set(chosen, qv, p_max)
    return SelectionResult(
        tech, tech_index,
        sensing_set=tuple(c.id for c in chosen if c.band == Band.SENSING),
        leasing_set=tuple(c.id for c in chosen if c.band == Band.LEASING),
        objective=value, water_level=lam,
    )


def _menu_order(techs: Sequence[SensingTech]) -> List[int]:
    return sorted(range(len(techs)), key=lambda k: (techs[k].cost, k))


def optimize_sensing_and_channels(instance: SelectionInstance, split_by_prior: bool = False) -> SelectionResult:
    """Enumerate the sensing menu, keep the lowest U"""
    if not instance.techs:
        raise DomainError("the sensing technology menu is empty")
    order = _menu_order(instance.techs)
    best: Optional[SelectionResult] = None
    for k in order:
        result = select_channels(instance, instance.techs[k], k, split_by_prior)
        if best is None or _better(result.objective, best.objective):
            best = result
    return best


def _exhaustive_sensing(instance: SelectionInstance, tech: SensingTech, tech_index: int) -> SelectionResult:
    qv, p_max = instance.q_over_v, instance.p_max
    leasing, sensing = virtual_gains(instance, tech)
    lease_cap = search_threshold(leasing, p_max)
    best = _empty_result(tech, tech_index)
    for size in range(len(sensing) + 1):
        for subset in itertools.combinations(sensing, size):
            for i in range(lease_cap + 1):
                chosen = list(leasing[:i]) + list(subset)
                if not chosen:
                    continue
                value, lam = evaluate_set(chosen, qv, p_max)
                if lam is None or (i > 0 and leasing[i - 1].virtual_gain <= lam):
                    continue
                if _better(value, best.objective):
                    best = SelectionResult(
                        tech, tech_index,
                        sensing_set=tuple(c.id for c in subset),
                        leasing_set=tuple(c.id for c in leasing[:i]),
                        objective=value, water_level=lam,
                    )
    return best


def markov_select_channels(instance: SelectionInstance) -> SelectionResult:
    """Selection when primary activity is Markov and S(t-1) is known.

    Channel-uniform transitions split the sensing band into a prev-busy and a
    prev-idle type with a threshold per type; otherwise sensing subsets are
    searched exhaustively against every leasing prefix.
    """
    if not instance.techs:
        raise DomainError("the sensing technology menu is empty")
    if instance.uniform_transitions:
        return optimize_sensing_and_channels(instance, split_by_prior=True)

    cap = settings.markov_exhaustive_max_sensing
    if len(instance.sensing_ids) > cap:
        raise CapabilityError(
            f"{len(instance.sensing_ids)} sensing channels exceed the exhaustive cap of {cap}; "
            "use channel-uniform transitions or a smaller sensing band"
        )
    if instance.backlog <= 0:
        k = _menu_order(instance.techs)[0]
        return _empty_result(instance.techs[k], k)

    best: Optional[SelectionResult] = None
    for k in _menu_order(instance.techs):
        result = _exhaustive_sensing(instance, instance.techs[k], k)
        if best is None or _better(result.objective, best.objective):
            best = result
    return best
