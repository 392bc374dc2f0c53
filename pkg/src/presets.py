# src/presets.py
"""Embedded experiment configurations.

The s7-* presets share one 32-channel system: 20 sensing channels (tolerance
0.001 on the first ten, 0.005 on the rest), 12 leasing channels, Rayleigh
gains with sigma 4.5, a 3-technology menu, P_max = 8 and the quadratic demand
D(M, q) = (1/M)(q - 5)^2 with M uniform on {1, 2}.
"""
from typing import Callable, Dict, List, Optional

from src.errors import ConfigurationError
from src.models import (
    Band, ChannelSpec, DemandSpec, ExperimentConfig, GainModel, OccupancyKind, OccupancyMode,
    OccupancyModel, PolicyMode, PresetInfo, QueueSpec, ScenarioConfig, SensingTech, Strategy,
    SweepConfig,
)

S7_TECHS = [
    SensingTech(cost=0.0, p_fa=0.5, p_md=0.5),
    SensingTech(cost=0.1, p_fa=0.1, p_md=0.08),
    SensingTech(cost=0.5, p_fa=0.008, p_md=0.005),
]
S7_V_VALUES = [5.0, 10.0, 50.0, 100.0, 200.0]
SWEEP_P0 = [round(k * 0.05, 2) for k in range(21)]


def s7_scenario(
    p0: float = 0.6,
    sigma: float = 4.5,
    queues: Optional[List[QueueSpec]] = None,
    occupancy: Optional[OccupancyModel] = None,
    n_sensing: int = 20,
    n_leasing: int = 12,
    occupancy_mode: OccupancyMode = OccupancyMode.IID,
) -> ScenarioConfig:
    occupancy = occupancy or OccupancyModel(p0=p0)
    half = n_sensing // 2
    channels = [
        ChannelSpec(
            band=Band.SENSING,
            gain=GainModel(sigma=sigma),
            occupancy=occupancy.model_copy(),
            eta=0.001 if i < half else 0.005,
        )
        for i in range(n_sensing)
    ]
    channels += [ChannelSpec(band=Band.LEASING, gain=GainModel(sigma=sigma)) for _ in range(n_leasing)]
    return ScenarioConfig(
        channels=channels,
        techs=list(S7_TECHS),
        demand=DemandSpec(),
        queues=queues or [QueueSpec(name="q1")],
        occupancy_mode=occupancy_mode,
    )


def _s7_pmc() -> ExperimentConfig:
    return ExperimentConfig(
        name="s7-pmc",
        description="Single-queue profit maximization on the 32-channel system, V in {5, 10, 50, 100, 200}",
        scenario=s7_scenario(),
        mode=PolicyMode.PMC,
        v_values=list(S7_V_VALUES),
        horizon=100_000,
        replications=5,
    )


def _s7_sensing_sweep() -> ExperimentConfig:
    return ExperimentConfig(
        name="s7-sensing-sweep",
        description="Idle probability p0 over [0, 1] for zero-, low-, high-cost sensing and the adaptive menu",
        scenario=s7_scenario(),
        mode=PolicyMode.PMC,
        v_values=[100.0],
        horizon=20_000,
        replications=3,
        sweep=SweepConfig(
            p0_values=list(SWEEP_P0),
            strategies=[
                Strategy(name="zero", tech_index=0),
                Strategy(name="low", tech_index=1),
                Strategy(name="high", tech_index=2),
                Strategy(name="adaptive"),
            ],
        ),
    )


def _s7_mpmc_2q() -> ExperimentConfig:
    return ExperimentConfig(
        name="s7-mpmc-2q",
        description="Two user clusters with gain sigma 4.5 and 5.5 sharing the 32-channel system",
        scenario=s7_scenario(queues=[
            QueueSpec(name="q1", gain=GainModel(sigma=4.5)),
            QueueSpec(name="q2", gain=GainModel(sigma=5.5)),
        ]),
        mode=PolicyMode.MPMC,
        v_values=[100.0],
        horizon=100_000,
        replications=10,
    )


def _markov_demo() -> ExperimentConfig:
    return ExperimentConfig(
        name="markov-demo",
        description="Markov primary activity (P(0->1) = 0.3, P(1->1) = 0.8) with history-aware selection",
        scenario=s7_scenario(
            occupancy=OccupancyModel(kind=OccupancyKind.MARKOV, p_0to1=0.3, p_1to1=0.8),
            n_sensing=10,
            n_leasing=6,
            occupancy_mode=OccupancyMode.MARKOV,
        ),
        mode=PolicyMode.PMC,
        v_values=[50.0, 100.0],
        horizon=20_000,
        replications=3,
    )


PRESETS: Dict[str, Callable[[], ExperimentConfig]] = {
    "s7-pmc": _s7_pmc,
    "s7-sensing-sweep": _s7_sensing_sweep,
    "s7-mpmc-2q": _s7_mpmc_2q,
    "markov-demo": _markov_demo,
}


def list_presets() -> List[PresetInfo]:
    return [PresetInfo(name=name, description=build().description or "") for name, build in PRESETS.items()]


def get_preset(name: str) -> ExperimentConfig:
    """A fresh copy of the named preset"""
    build = PRESETS.get(name)
    if build is None:
        raise ConfigurationError(f"unknown preset '{name}'; available presets: {', '.join(PRESETS)}")
    return build()
