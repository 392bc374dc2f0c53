# src/environment.py
"""Exogenous processes of one time slot.

An Environment owns one random stream per stochastic process so that switching
one process on or off never perturbs the draws of the others.
"""
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from src.demand import DemandModel
from src.errors import ConfigurationError, DomainError
from src.logger_config import logger
from src.models import (
    GainKind, GainSemantics, LengthDistribution, LengthKind, OccupancyKind,
    ScenarioConfig, SensingTech,
)

STREAM_NAMES = ("occupancy", "gains", "price", "market", "arrivals", "sensing")

# Rayleigh draws can hit exactly zero; gains must stay strictly positive
MIN_GAIN = 1e-12


def make_streams(seed: int, replication: int = 0) -> Dict[str, np.random.Generator]:
    """Independent named generators for one replication"""
    return {
        name: np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication, k)))
        for k, name in enumerate(STREAM_NAMES)
    }


@dataclass(frozen=True)
class EnvSample:
    """phi(t) plus the hidden primary-user states of the slot"""
    t: int
    markets: np.ndarray          # (J,) market state per queue
    gains: np.ndarray            # (channels, J)
    leasing_price: float
    sensing_ids: Tuple[int, ...]
    true_states: np.ndarray      # (sensing,) 1 = idle; never shown to the controller
    prev_states: np.ndarray      # (sensing,) states of the previous slot

    @property
    def market(self) -> float:
        return float(self.markets[0])

    @property
    def channel_gains(self) -> np.ndarray:
        return self.gains[:, 0]

    def true_state_map(self) -> Dict[int, int]:
        return {cid: int(s) for cid, s in zip(self.sensing_ids, self.true_states)}


@dataclass(frozen=True)
class SensingOutcome:
    channels: Tuple[int, ...]
    sensed: np.ndarray       # W_i, 1 = sensed idle
    collisions: np.ndarray   # X_i = (1 - S_i) W_i

    def sensed_idle(self) -> Tuple[int, ...]:
        return tuple(cid for cid, w in zip(self.channels, self.sensed) if w == 1)


@dataclass(frozen=True)
class Arrivals:
    packets: int
    users: int
    lengths: Tuple[int, ...]


NO_ARRIVALS = Arrivals(packets=0, users=0, lengths=())


def sense(
    tech: SensingTech,
    true_states: Mapping[int, int],
    sensing_set: Sequence[int],
    rng: np.random.Generator,
) -> SensingOutcome:
    """Imperfect sensing of the chosen channels with one technology"""
    channels = tuple(int(c) for c in sensing_set)
    for cid in channels:
        if cid not in true_states:
            raise DomainError(f"channel {cid} is not in the sensing band")
    if not channels:
        empty = np.zeros(0, dtype=int)
        return SensingOutcome(channels=(), sensed=empty, collisions=empty)

    states = np.array([true_states[cid] for cid in channels], dtype=int)
    u = rng.random(len(channels))
    sensed = np.where(states == 1, u < 1.0 - tech.p_fa, u < tech.p_md).astype(int)
    collisions = (1 - states) * sensed
    return SensingOutcome(channels=channels, sensed=sensed, collisions=collisions)


def _draw_lengths(length: LengthDistribution, count: int, rng: np.random.Generator) -> np.ndarray:
    if length.kind == LengthKind.UNIFORM:
        return rng.integers(length.low, length.high + 1, size=count)
    if length.kind == LengthKind.FIXED:
        return np.full(count, length.value, dtype=np.int64)
    return rng.geometric(1.0 / length.mean_length, size=count)


def sample_arrivals(
    demand: DemandModel,
    market: float,
    price: float,
    admit: bool,
    rng: np.random.Generator,
) -> Arrivals:
    """A(t): Poisson users with i.i.d. file lengths, truncated at A_max"""
    if price < 0:
        raise DomainError(f"price must be non-negative, got {price}")
    if not admit:
        return NO_ARRIVALS
    rate = demand.expected_users(market, price)
    if rate <= 0.0:
        return NO_ARRIVALS
    users = int(rng.poisson(rate))
    if users == 0:
        return NO_ARRIVALS

    apps = rng.choice(len(demand.app_weights), size=users, p=demand.app_weights)
    lengths = np.zeros(users, dtype=np.int64)
    for k, app in enumerate(demand.spec.applications):
        mask = apps == k
        count = int(mask.sum())
        if count:
            lengths[mask] = _draw_lengths(app.length, count, rng)

    # drop the users whose files would push the slot past A_max
    keep = np.cumsum(lengths) <= demand.a_max
    lengths = lengths[keep]
    return Arrivals(packets=int(lengths.sum()), users=len(lengths), lengths=tuple(int(x) for x in lengths))


class Environment:
    """Draws phi(t) and the hidden channel states slot after slot"""

    def __init__(self, scenario: ScenarioConfig, streams: Dict[str, np.random.Generator]):
        self.scenario = scenario
        self.streams = streams
        channels = scenario.channels
        n_queues = len(scenario.queues)

        self.sensing_ids: Tuple[int, ...] = tuple(scenario.sensing_ids)
        self.leasing_ids: Tuple[int, ...] = tuple(scenario.leasing_ids)
        self.etas = np.array([channels[i].eta for i in self.sensing_ids], dtype=float)

        occupancies = [channels[i].occupancy for i in self.sensing_ids]
        self._markov = np.array([occ.kind == OccupancyKind.MARKOV for occ in occupancies], dtype=bool)
        self._p0 = np.array([occ.p0 for occ in occupancies], dtype=float)
        self._p01 = np.array([occ.p_0to1 if occ.p_0to1 is not None else occ.p0 for occ in occupancies])
        self._p11 = np.array([occ.p_1to1 if occ.p_1to1 is not None else occ.p0 for occ in occupancies])
        self.prev_states = np.array([occ.initial_state for occ in occupancies], dtype=int)

        # per (channel, queue) gain parameters; a queue-level model overrides the channel's
        self._fixed = np.zeros((len(channels), n_queues), dtype=bool)
        self._sigma = np.ones((len(channels), n_queues))
        self._fixed_h = np.ones((len(channels), n_queues))
        for j, queue in enumerate(scenario.queues):
            for i, channel in enumerate(channels):
                model = queue.gain or channel.gain
                if model.kind == GainKind.FIXED:
                    self._fixed[i, j] = True
                    self._fixed_h[i, j] = model.h
                else:
                    self._sigma[i, j] = model.sigma
        self._power_gains = scenario.gain_semantics == GainSemantics.POWER

        self._market_values = np.array(scenario.market.values, dtype=float)
        self._market_probs = np.array(scenario.market.probabilities, dtype=float)
        self._price_values = np.array(scenario.leasing_price.values, dtype=float)
        self._price_probs = np.array(scenario.leasing_price.probabilities, dtype=float)
        self.demand = DemandModel(scenario.demand, markets=scenario.market.values)
        self.t = 0

    @classmethod
    def from_config(cls, raw: Any, seed: int, replication: int = 0) -> "Environment":
        try:
            scenario = raw if isinstance(raw, ScenarioConfig) else ScenarioConfig.model_validate(raw)
        except ValidationError as e:
            logger.error(f"Rejected scenario configuration: {e.error_count()} errors")
            raise ConfigurationError("invalid scenario configuration", errors=e.errors())
        return cls(scenario, make_streams(seed, replication))

    def idle_probs(self, prev_states: Optional[np.ndarray] = None) -> np.ndarray:
        """Prior idle probability per sensing channel for the coming slot"""
        prev = self.prev_states if prev_states is None else prev_states
        markov_p = np.where(prev == 1, self._p11, self._p01)
        return np.where(self._markov, markov_p, self._p0)

    def sample_slot(self) -> EnvSample:
        prev = self.prev_states.copy()
        u = self.streams["occupancy"].random(len(self.sensing_ids))
        states = (u < self.idle_probs(prev)).astype(int)
        self.prev_states = states

        raw = self.streams["gains"].rayleigh(1.0, size=self._sigma.shape)
        faded = self._sigma * raw
        if self._power_gains:
            faded = faded ** 2
        gains = np.maximum(np.where(self._fixed, self._fixed_h, faded), MIN_GAIN)

        price = float(self.streams["price"].choice(self._price_values, p=self._price_probs))
        markets = self.streams["market"].choice(
            self._market_values, size=self._sigma.shape[1], p=self._market_probs
        )
        sample = EnvSample(
            t=self.t, markets=markets, gains=gains, leasing_price=price,
            sensing_ids=self.sensing_ids, true_states=states, prev_states=prev,
        )
        self.t += 1
        return sample

    def sense(self, tech: SensingTech, sample: EnvSample, sensing_set: Sequence[int]) -> SensingOutcome:
        return sense(tech, sample.true_state_map(), sensing_set, self.streams["sensing"])

    def sample_arrivals(self, market: float, price: float, admit: bool) -> Arrivals:
        return sample_arrivals(self.demand, market, price, admit, self.streams["arrivals"])


def sample_slot(environment: Environment) -> EnvSample:
    return environment.sample_slot()
