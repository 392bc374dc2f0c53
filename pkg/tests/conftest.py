# tests/conftest.py
import numpy as np
import pytest

from src.environment import Environment, make_streams
from src.models import (
    Band, ChannelSpec, ExperimentConfig, GainKind, GainModel, OccupancyModel, PolicyConfig,
    QueueSpec, ScenarioConfig, SensingTech,
)
from src.presets import S7_TECHS, s7_scenario
from src.selection import SelectionInstance


@pytest.fixture
def small_scenario():
    """4 sensing + 3 leasing channels with the s7 menu and demand"""
    def build(**kwargs) -> ScenarioConfig:
        kwargs.setdefault("n_sensing", 4)
        kwargs.setdefault("n_leasing", 3)
        return s7_scenario(**kwargs)
    return build


@pytest.fixture
def two_queue_scenario(small_scenario):
    return small_scenario(queues=[
        QueueSpec(name="q1", gain=GainModel(sigma=4.5)),
        QueueSpec(name="q2", gain=GainModel(sigma=5.5)),
    ])


@pytest.fixture
def small_experiment(small_scenario):
    def build(**kwargs) -> ExperimentConfig:
        kwargs.setdefault("name", "small")
        kwargs.setdefault("scenario", small_scenario())
        kwargs.setdefault("v_values", [10.0])
        kwargs.setdefault("horizon", 30)
        return ExperimentConfig(**kwargs)
    return build


@pytest.fixture
def make_controller_inputs():
    """(policy, environment) for a scenario and V"""
    def build(scenario: ScenarioConfig, v: float = 10.0, seed: int = 7, **policy_kwargs):
        policy = PolicyConfig(scenario=scenario, v=v, **policy_kwargs)
        return policy, Environment(scenario, make_streams(seed, 0))
    return build


@pytest.fixture
def one_sensing_one_leasing():
    def build(occupancy: OccupancyModel, tech: SensingTech = SensingTech(cost=0.0, p_fa=0.0, p_md=0.0)):
        return ScenarioConfig(
            channels=[
                ChannelSpec(band=Band.SENSING, eta=0.01, occupancy=occupancy),
                ChannelSpec(band=Band.LEASING, gain=GainModel(kind=GainKind.FIXED, h=1.0)),
            ],
            techs=[tech],
        )
    return build


@pytest.fixture
def random_instance():
    """Random selection instances; equal_gains makes each band homogeneous"""
    def build(rng: np.random.Generator, n_leasing: int, n_sensing: int, equal_gains: bool = False,
              techs=tuple(S7_TECHS), uniform: bool = True) -> SelectionInstance:
        if equal_gains:
            leasing_gains = np.full(n_leasing, rng.uniform(0.5, 8.0))
            leasing_costs = np.full(n_leasing, rng.choice([0.5, 0.75, 1.0, 1.25, 1.5]))
            sensing_gains = np.full(n_sensing, rng.uniform(0.5, 8.0))
            virtual_queues = np.full(n_sensing, rng.uniform(0.0, 50.0))
            idle = np.full(n_sensing, rng.uniform(0.05, 0.95))
        else:
            leasing_gains = rng.uniform(0.5, 8.0, n_leasing)
            leasing_costs = rng.choice([0.5, 0.75, 1.0, 1.25, 1.5], n_leasing)
            sensing_gains = rng.uniform(0.5, 8.0, n_sensing)
            virtual_queues = rng.uniform(0.0, 50.0, n_sensing)
            idle = np.full(n_sensing, rng.uniform(0.05, 0.95)) if uniform else rng.uniform(0.05, 0.95, n_sensing)
        return SelectionInstance(
            backlog=float(rng.uniform(10.0, 500.0)),
            v=float(rng.choice([5.0, 10.0, 50.0, 100.0])),
            p_max=8.0,
            techs=tuple(techs),
            leasing_ids=tuple(range(n_leasing)),
            leasing_gains=leasing_gains,
            leasing_costs=leasing_costs,
            sensing_ids=tuple(range(n_leasing, n_leasing + n_sensing)),
            sensing_gains=sensing_gains,
            virtual_queues=virtual_queues,
            idle_probs=idle,
            uniform_transitions=uniform,
        )
    return build
