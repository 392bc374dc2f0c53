# src/controller.py
"""One slot of PMC / M-PMC: price and admit, select and sense, allocate power,
transmit, update real and virtual queues, account profit and check bounds."""
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.demand import optimal_price
from src.environment import EnvSample, Environment, SensingOutcome
from src.errors import BoundViolationError, DomainError
from src.logger_config import logger
from src.models import OccupancyKind, OccupancyModel, OccupancyMode, PolicyConfig, PolicyMode, SensingTech
from src.power import (
    Assignment, PowerPlan, WeightedChannel, assign_and_waterfill, realized_queue_rates,
    realized_rate, waterfill,
)
from src.selection import (
    SelectionInstance, SelectionResult, markov_select_channels, optimize_sensing_and_channels,
    posterior_weights,
)


@dataclass(frozen=True)
class SystemState:
    queues: np.ndarray           # Q_j, packets
    virtual_queues: np.ndarray   # Z_i per sensing channel
    t: int = 0

    @classmethod
    def initial(cls, n_queues: int, n_sensing: int) -> "SystemState":
        return cls(np.zeros(n_queues), np.zeros(n_sensing), 0)


@dataclass(frozen=True)
class Decision:
    prices: np.ndarray
    admits: np.ndarray
    tech: Optional[SensingTech]
    tech_index: Optional[int]
    sensing_set: Tuple[int, ...]
    leasing_set: Tuple[int, ...]
    plan: PowerPlan
    assignment: Assignment


@dataclass(frozen=True)
class SlotMetrics:
    t: int
    markets: np.ndarray
    prices: np.ndarray
    admits: np.ndarray
    leasing_price: float
    arrivals: np.ndarray
    rates: np.ndarray
    queues: np.ndarray            # after the update
    revenues: np.ndarray          # q_j O_j A_j
    sensing_cost: float
    leasing_cost: float
    profit: float
    n_sense: int
    n_lease: int
    tech_index: Optional[int]
    tech_cost: float
    collisions: np.ndarray        # X_i per sensing channel
    virtual_queues: np.ndarray    # after the update
    queue_violation: bool
    collision_queue_violation: bool

    @property
    def revenue(self) -> float:
        return float(self.revenues.sum())

    @property
    def collisions_total(self) -> int:
        return int(self.collisions.sum())


@dataclass(frozen=True)
class StabilityBounds:
    q_bound: float
    z_bound: Optional[float]   # None: kappa is infinite, Z monitor off
    kappa: Optional[float]


def update_queue(backlog, rate, admit, arrivals):
    """Q' = (Q - r)^+ + O A"""
    return np.maximum(np.asarray(backlog, dtype=float) - rate, 0.0) + np.asarray(admit, dtype=float) * arrivals


def update_virtual_queue(z, eta, collision):
    """Z' = (Z - eta)^+ + X"""
    return np.maximum(np.asarray(z, dtype=float) - eta, 0.0) + collision


def _priors_seen(occupancy: OccupancyModel, mode: OccupancyMode) -> Tuple[float, ...]:
    # idle probabilities the controller may plan with on this channel
    if mode == OccupancyMode.MARKOV and occupancy.kind == OccupancyKind.MARKOV:
        return occupancy.p_0to1, occupancy.p_1to1
    return (occupancy.stationary_idle_prob(),)


def stability_bounds(policy: PolicyConfig) -> StabilityBounds:
    """Q_max = V q_max + A_max; Z_max = kappa (V q_max + A_max) + 1.

    kappa uses the menu technology maximizing p0(1-P_fa)/((1-p0)P_md); with
    several sensing channels the largest per-channel kappa is kept.
    """
    scenario = policy.scenario
    base = policy.v * scenario.demand.q_max + scenario.demand.a_max
    techs = scenario.techs if policy.fixed_tech is None else [scenario.techs[policy.fixed_tech]]

    sensing = [scenario.channels[i] for i in scenario.sensing_ids]
    if not sensing:
        return StabilityBounds(q_bound=base, z_bound=None, kappa=None)

    kappa = 0.0
    for channel in sensing:
        for p0 in _priors_seen(channel.occupancy, scenario.occupancy_mode):
            if p0 in (0.0, 1.0):
                kappa = math.inf
                break
            best_ratio = 0.0
            for tech in techs:
                if tech.p_md == 0.0:
                    best_ratio = math.inf
                    break
                best_ratio = max(best_ratio, p0 * (1.0 - tech.p_fa) / ((1.0 - p0) * tech.p_md))
            kappa = max(kappa, scenario.r_max * best_ratio)

    if math.isinf(kappa):
        logger.info("Collision queue monitor disabled: kappa is unbounded for this menu")
        return StabilityBounds(q_bound=base, z_bound=None, kappa=None)
    return StabilityBounds(q_bound=base, z_bound=kappa * base + 1.0, kappa=kappa)


@dataclass(frozen=True)
class SlotContext:
    """Per-run constants of a controller"""
    techs: Tuple[SensingTech, ...]
    tech_indices: Tuple[int, ...]     # menu position of each entry of techs
    bounds: StabilityBounds
    use_history: bool                 # Markov mode: condition on S(t-1)
    uniform_transitions: bool
    stationary_idle: np.ndarray


def build_context(policy: PolicyConfig, environment: Environment) -> SlotContext:
    scenario = policy.scenario
    if policy.fixed_tech is None:
        indices = tuple(range(len(scenario.techs)))
    else:
        indices = (policy.fixed_tech,)
    occupancies = [scenario.channels[i].occupancy for i in environment.sensing_ids]
    signatures = {(o.kind, o.p0, o.p_0to1, o.p_1to1) for o in occupancies}
    return SlotContext(
        techs=tuple(scenario.techs[k] for k in indices),
        tech_indices=indices,
        bounds=stability_bounds(policy),
        use_history=scenario.occupancy_mode == OccupancyMode.MARKOV,
        uniform_transitions=len(signatures) <= 1,
        stationary_idle=np.array([o.stationary_idle_prob() for o in occupancies], dtype=float),
    )


def _pick_reference_queue(queues: np.ndarray, gains_row: np.ndarray) -> int:
    return max(range(len(queues)), key=lambda j: (queues[j], gains_row[j], -j))


def _selection_instance(
    state: SystemState, sample: EnvSample, policy: PolicyConfig,
    environment: Environment, context: SlotContext, idle: np.ndarray,
) -> SelectionInstance:
    queues = state.queues
    if len(queues) == 1:
        reference = np.zeros(sample.gains.shape[0], dtype=int)
    else:
        # each channel is valued toward the queue that would win it alone
        reference = np.array([_pick_reference_queue(queues, row) for row in sample.gains], dtype=int)
    gains = sample.gains[np.arange(sample.gains.shape[0]), reference]
    leasing_ids = environment.leasing_ids
    sensing_ids = environment.sensing_ids
    return SelectionInstance(
        backlog=float(queues.max()),
        v=policy.v,
        p_max=policy.scenario.p_max,
        techs=context.techs,
        leasing_ids=leasing_ids,
        leasing_gains=gains[list(leasing_ids)],
        leasing_costs=np.full(len(leasing_ids), sample.leasing_price),
        sensing_ids=sensing_ids,
        sensing_gains=gains[list(sensing_ids)],
        virtual_queues=state.virtual_queues,
        idle_probs=idle,
        uniform_transitions=context.uniform_transitions,
    )


def _allocate(
    state: SystemState, sample: EnvSample, policy: PolicyConfig, selection: SelectionResult,
    outcome: SensingOutcome, idle_of: dict,
) -> Tuple[List[int], List[float], PowerPlan, Assignment]:
    """Power over leased channels and sensed-idle channels only"""
    ids = list(selection.leasing_set)
    weights = [1.0] * len(ids)
    for cid in outcome.sensed_idle():
        omega, _ = posterior_weights(selection.tech, idle_of[cid])
        ids.append(cid)
        weights.append(float(omega))

    p_max = policy.scenario.p_max
    queues = state.queues
    if len(queues) == 1:
        plan = waterfill(
            [WeightedChannel(cid, w, float(sample.gains[cid, 0])) for cid, w in zip(ids, weights)], p_max
        )
        assignment = Assignment(np.ones((len(ids), 1), dtype=int), tuple(ids))
    else:
        assignment, plan = assign_and_waterfill(
            queues, sample.gains[ids, :].reshape(len(ids), len(queues)), weights, p_max, channel_ids=ids,
        )
    return ids, weights, plan, assignment


def _slot(
    state: SystemState, sample: EnvSample, policy: PolicyConfig,
    environment: Environment, context: Optional[SlotContext] = None,
) -> Tuple[Decision, SlotMetrics, SystemState]:
    context = context or build_context(policy, environment)
    scenario = policy.scenario
    queues = state.queues
    n_queues = len(queues)

    # (1) pricing and admission per queue, from the slot-start backlog
    pricing = [
        optimal_price(environment.demand, float(sample.markets[j]), float(queues[j]), policy.v)
        for j in range(n_queues)
    ]
    prices = np.array([p.price for p in pricing])
    admits = np.array([p.admit for p in pricing], dtype=bool)

    # (2) technology and channel sets
    if context.use_history:
        idle = environment.idle_probs(sample.prev_states)
    else:
        idle = context.stationary_idle
    instance = _selection_instance(state, sample, policy, environment, context, idle)
    if context.use_history:
        selection = markov_select_channels(instance)
    else:
        selection = optimize_sensing_and_channels(instance)
    tech_index = None if selection.tech_index is None else context.tech_indices[selection.tech_index]

    # (3) sensing, (4) allocation, (5) transmission
    outcome = environment.sense(selection.tech, sample, selection.sensing_set)
    idle_of = dict(zip(environment.sensing_ids, (float(p) for p in idle)))
    ids, _, plan, assignment = _allocate(state, sample, policy, selection, outcome, idle_of)
    true_state = sample.true_state_map()
    flags = [true_state.get(cid, 1) for cid in ids]   # leased channels always succeed
    if n_queues == 1:
        rates = np.array([realized_rate(plan, flags, scenario.r_max)])
    else:
        rates = realized_queue_rates(plan, assignment, flags, scenario.r_max)

    # (6) arrivals, (7) queue updates
    arrivals = np.array([
        environment.sample_arrivals(float(sample.markets[j]), float(prices[j]), bool(admits[j])).packets
        for j in range(n_queues)
    ], dtype=float)
    new_queues = update_queue(queues, rates, admits, arrivals)

    collisions = np.zeros(len(environment.sensing_ids), dtype=int)
    position = {cid: k for k, cid in enumerate(environment.sensing_ids)}
    for cid, x in zip(outcome.channels, outcome.collisions):
        collisions[position[cid]] = int(x)
    new_z = update_virtual_queue(state.virtual_queues, environment.etas, collisions)

    # (8) profit: sensing and leasing are paid whatever the outcome
    revenues = prices * admits * arrivals
    tech_cost = selection.tech.cost if selection.tech is not None else 0.0
    sensing_cost = tech_cost * len(selection.sensing_set)
    leasing_cost = sample.leasing_price * len(selection.leasing_set)
    profit = float(revenues.sum()) - sensing_cost - leasing_cost

    bounds = context.bounds
    queue_violation = bool(np.any(new_queues > bounds.q_bound))
    z_violation = bounds.z_bound is not None and bool(np.any(new_z > bounds.z_bound))
    if queue_violation or z_violation:
        logger.warning(
            f"Bound violation at slot {sample.t}: max Q={new_queues.max():.3f} (bound {bounds.q_bound}), "
            f"max Z={new_z.max() if len(new_z) else 0.0:.3f} (bound {bounds.z_bound})"
        )
        if policy.strict_bounds:
            raise BoundViolationError(f"queue bound exceeded at slot {sample.t}")

    decision = Decision(
        prices=prices, admits=admits, tech=selection.tech, tech_index=tech_index,
        sensing_set=selection.sensing_set, leasing_set=selection.leasing_set,
        plan=plan, assignment=assignment,
    )
    metrics = SlotMetrics(
        t=sample.t, markets=sample.markets, prices=prices, admits=admits,
        leasing_price=sample.leasing_price, arrivals=arrivals, rates=rates, queues=new_queues,
        revenues=revenues, sensing_cost=sensing_cost, leasing_cost=leasing_cost, profit=profit,
        n_sense=len(selection.sensing_set), n_lease=len(selection.leasing_set),
        tech_index=tech_index if selection.sensing_set else None, tech_cost=tech_cost,
        collisions=collisions, virtual_queues=new_z,
        queue_violation=queue_violation, collision_queue_violation=z_violation,
    )
    return decision, metrics, SystemState(new_queues, new_z, state.t + 1)


def pmc_step(
    state: SystemState, sample: EnvSample, policy: PolicyConfig,
    environment: Environment, context: Optional[SlotContext] = None,
) -> Tuple[Decision, SlotMetrics, SystemState]:
    """One slot of the single-queue policy"""
    if len(state.queues) != 1:
        raise DomainError("PMC runs exactly one queue")
    return _slot(state, sample, policy, environment, context)


def mpmc_step(
    state: SystemState, sample: EnvSample, policy: PolicyConfig,
    environment: Environment, context: Optional[SlotContext] = None,
) -> Tuple[Decision, SlotMetrics, SystemState]:
    """One slot of the multi-queue policy; J = 1 collapses to pmc_step"""
    if sample.gains.shape[1] != len(state.queues):
        raise DomainError("gain matrix and queue vector disagree on the number of queues")
    return _slot(state, sample, policy, environment, context)


class Controller:
    """Runs a policy slot after slot against one environment"""

    def __init__(self, policy: PolicyConfig, environment: Environment):
        self.policy = policy
        self.environment = environment
        self.context = build_context(policy, environment)
        self.state = SystemState.initial(len(policy.scenario.queues), len(environment.sensing_ids))
        self._step = pmc_step if policy.mode == PolicyMode.PMC else mpmc_step

    @property
    def bounds(self) -> StabilityBounds:
        return self.context.bounds

    def step(self) -> Tuple[Decision, SlotMetrics]:
        sample = self.environment.sample_slot()
        decision, metrics, self.state = self._step(
            self.state, sample, self.policy, self.environment, self.context
        )
        return decision, metrics
