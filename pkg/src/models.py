# src/models.py
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Band(str, Enum):
    SENSING = "sensing"
    LEASING = "leasing"


class OccupancyKind(str, Enum):
    IID = "iid"
    MARKOV = "markov"


class GainKind(str, Enum):
    RAYLEIGH = "rayleigh"
    FIXED = "fixed"


class GainSemantics(str, Enum):
    AMPLITUDE = "amplitude"
    POWER = "power"


class OccupancyMode(str, Enum):
    IID = "iid"
    MARKOV = "markov"


class PolicyMode(str, Enum):
    PMC = "pmc"
    MPMC = "mpmc"


class DemandFamily(str, Enum):
    QUADRATIC_S7 = "quadratic_s7"
    LINEAR = "linear"
    TABLE = "table"


class LengthKind(str, Enum):
    UNIFORM = "uniform"
    FIXED = "fixed"
    GEOMETRIC = "geometric"


# ==================== Channel models ====================

class OccupancyModel(BaseModel):
    """Primary-user activity on a sensing channel (1 = idle)"""
    kind: OccupancyKind = OccupancyKind.IID
    p0: float = Field(0.6, ge=0.0, le=1.0)
    p_0to1: Optional[float] = Field(None, ge=0.0, le=1.0)
    p_1to1: Optional[float] = Field(None, ge=0.0, le=1.0)
    initial_state: int = Field(1, ge=0, le=1)

    @model_validator(mode="after")
    def _check_markov(self) -> "OccupancyModel":
        if self.kind == OccupancyKind.MARKOV and (self.p_0to1 is None or self.p_1to1 is None):
            raise ValueError("markov occupancy needs both p_0to1 and p_1to1")
        return self

    def idle_prob(self, prev_state: int) -> float:
        """Probability of an idle slot given the previous true state"""
        if self.kind == OccupancyKind.IID:
            return self.p0
        return self.p_1to1 if prev_state == 1 else self.p_0to1

    def stationary_idle_prob(self) -> float:
        if self.kind == OccupancyKind.IID:
            return self.p0
        leave_busy = self.p_0to1
        leave_idle = 1.0 - self.p_1to1
        if leave_busy + leave_idle == 0.0:
            return float(self.initial_state)
        return leave_busy / (leave_busy + leave_idle)


class GainModel(BaseModel):
    kind: GainKind = GainKind.RAYLEIGH
    sigma: Optional[float] = Field(4.5, gt=0.0)
    h: Optional[float] = Field(None, gt=0.0)

    @model_validator(mode="after")
    def _check_params(self) -> "GainModel":
        if self.kind == GainKind.RAYLEIGH and self.sigma is None:
            raise ValueError("rayleigh gain needs sigma")
        if self.kind == GainKind.FIXED and self.h is None:
            raise ValueError("fixed gain needs h")
        return self


class ChannelSpec(BaseModel):
    band: Band
    gain: GainModel = Field(default_factory=GainModel)
    occupancy: Optional[OccupancyModel] = None
    eta: Optional[float] = Field(None, gt=0.0)  # collisions/slot, sensing only

    @model_validator(mode="after")
    def _check_band(self) -> "ChannelSpec":
        if self.band == Band.SENSING:
            if self.eta is None:
                raise ValueError("sensing channels need a collision tolerance eta > 0")
            if self.occupancy is None:
                self.occupancy = OccupancyModel()
        else:
            # leased channels are always available
            self.occupancy = None
            self.eta = None
        return self


class SensingTech(BaseModel):
    """One sensing technology of the menu: (cost, P_fa, P_md)"""
    model_config = ConfigDict(frozen=True)

    cost: float = Field(..., ge=0.0)
    p_fa: float = Field(..., ge=0.0, le=1.0)
    p_md: float = Field(..., ge=0.0, le=1.0)


# ==================== Demand and markets ====================

class LengthDistribution(BaseModel):
    """File length in packets"""
    kind: LengthKind = LengthKind.UNIFORM
    low: int = Field(1, ge=1)
    high: int = Field(10, ge=1)
    value: int = Field(1, ge=1)
    mean_length: float = Field(5.0, ge=1.0)

    @model_validator(mode="after")
    def _check_bounds(self) -> "LengthDistribution":
        if self.kind == LengthKind.UNIFORM and self.high < self.low:
            raise ValueError("uniform length needs low <= high")
        return self

    @property
    def mean(self) -> float:
        if self.kind == LengthKind.UNIFORM:
            return (self.low + self.high) / 2.0
        if self.kind == LengthKind.FIXED:
            return float(self.value)
        return self.mean_length


class Application(BaseModel):
    weight: float = Field(..., ge=0.0)
    length: LengthDistribution = Field(default_factory=LengthDistribution)


class DemandSpec(BaseModel):
    """Expected packet demand D(M, q) plus the user/file structure behind it"""
    family: DemandFamily = DemandFamily.QUADRATIC_S7
    q_max: float = Field(5.0, gt=0.0)
    scale: float = Field(1.0, gt=0.0)
    # table family: market label -> [(price, packets/slot), ...] sorted by price
    table: Optional[Dict[str, List[List[float]]]] = None
    table_path: Optional[str] = None
    applications: List[Application] = Field(
        default_factory=lambda: [Application(weight=1.0)]
    )
    a_max: int = Field(200, ge=1)

    @model_validator(mode="after")
    def _check_mix(self) -> "DemandSpec":
        if not self.applications:
            raise ValueError("at least one application is required")
        total = sum(app.weight for app in self.applications)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"application weights must sum to 1, got {total}")
        if self.family == DemandFamily.TABLE and self.table is None and self.table_path is None:
            raise ValueError("table demand needs either table or table_path")
        return self

    @property
    def mean_file_length(self) -> float:
        return sum(app.weight * app.length.mean for app in self.applications)


class DiscreteDistribution(BaseModel):
    values: List[float]
    probabilities: Optional[List[float]] = None  # uniform when omitted

    @model_validator(mode="after")
    def _check_probs(self) -> "DiscreteDistribution":
        if not self.values:
            raise ValueError("a discrete distribution needs at least one value")
        if self.probabilities is None:
            self.probabilities = [1.0 / len(self.values)] * len(self.values)
        if len(self.probabilities) != len(self.values):
            raise ValueError("values and probabilities differ in length")
        if any(p < 0.0 for p in self.probabilities):
            raise ValueError("probabilities must be non-negative")
        if abs(sum(self.probabilities) - 1.0) > 1e-9:
            raise ValueError("probabilities must sum to 1")
        return self


class QueueSpec(BaseModel):
    """A user cluster with its own queue; gain overrides every channel's model"""
    name: str
    gain: Optional[GainModel] = None


# ==================== Scenario / experiment files ====================

class ScenarioConfig(BaseModel):
    channels: List[ChannelSpec]
    techs: List[SensingTech]
    demand: DemandSpec = Field(default_factory=DemandSpec)
    market: DiscreteDistribution = Field(
        default_factory=lambda: DiscreteDistribution(values=[1.0, 2.0])
    )
    leasing_price: DiscreteDistribution = Field(
        default_factory=lambda: DiscreteDistribution(values=[0.5, 0.75, 1.0, 1.25, 1.5])
    )
    queues: List[QueueSpec] = Field(default_factory=lambda: [QueueSpec(name="q1")])
    p_max: float = Field(8.0, gt=0.0)
    r_max: float = Field(200.0, gt=0.0)
    occupancy_mode: OccupancyMode = OccupancyMode.IID
    gain_semantics: GainSemantics = GainSemantics.AMPLITUDE

    @model_validator(mode="after")
    def _check_scenario(self) -> "ScenarioConfig":
        if not self.channels:
            raise ValueError("scenario needs at least one channel")
        if not self.techs:
            raise ValueError("scenario needs a non-empty sensing technology menu")
        if not self.queues:
            raise ValueError("scenario needs at least one queue")
        if any(m <= 0 for m in self.market.values):
            raise ValueError("market states must be positive")
        if any(c < 0 for c in self.leasing_price.values):
            raise ValueError("leasing prices must be non-negative")
        menu = sorted(self.techs, key=lambda tech: tech.cost)
        for cheaper, dearer in zip(menu, menu[1:]):
            if dearer.p_fa > cheaper.p_fa or dearer.p_md > cheaper.p_md:
                raise ValueError("sensing menu must be monotone: higher cost, no larger error rates")
        return self

    @property
    def sensing_ids(self) -> List[int]:
        return [i for i, ch in enumerate(self.channels) if ch.band == Band.SENSING]

    @property
    def leasing_ids(self) -> List[int]:
        return [i for i, ch in enumerate(self.channels) if ch.band == Band.LEASING]


class PolicyConfig(BaseModel):
    """Everything one controller needs: the scenario plus the tradeoff V"""
    scenario: ScenarioConfig
    v: float = Field(..., gt=0.0)
    mode: PolicyMode = PolicyMode.PMC
    fixed_tech: Optional[int] = Field(None, ge=0)
    strict_bounds: bool = True

    @model_validator(mode="after")
    def _check_policy(self) -> "PolicyConfig":
        if self.mode == PolicyMode.PMC and len(self.scenario.queues) != 1:
            raise ValueError("PMC runs exactly one queue; use mode 'mpmc'")
        if self.fixed_tech is not None and self.fixed_tech >= len(self.scenario.techs):
            raise ValueError("fixed_tech is not an index of the sensing menu")
        return self


class Strategy(BaseModel):
    name: str
    tech_index: Optional[int] = None  # None = adaptive (whole menu)


class SweepConfig(BaseModel):
    p0_values: List[float]
    strategies: List[Strategy]

    @model_validator(mode="after")
    def _check_sweep(self) -> "SweepConfig":
        if not self.p0_values or not self.strategies:
            raise ValueError("sweep needs p0 values and strategies")
        if any(p < 0.0 or p > 1.0 for p in self.p0_values):
            raise ValueError("p0 values must lie in [0, 1]")
        return self


class ExperimentConfig(BaseModel):
    name: str = "custom"
    description: Optional[str] = None
    scenario: ScenarioConfig
    mode: PolicyMode = PolicyMode.PMC
    v_values: List[float] = Field(default_factory=lambda: [100.0])
    horizon: int = Field(10_000, ge=1)
    replications: int = Field(1, ge=1)
    seed: int = 2024
    burn_in_fraction: float = Field(0.1, ge=0.0, lt=1.0)
    per_slot: bool = False
    strict_bounds: bool = True
    output_dir: Optional[str] = None
    sweep: Optional[SweepConfig] = None

    @model_validator(mode="after")
    def _check_experiment(self) -> "ExperimentConfig":
        if not self.v_values or any(v <= 0 for v in self.v_values):
            raise ValueError("V values must be positive")
        if len(set(self.v_values)) != len(self.v_values):
            raise ValueError("V values must be distinct")
        if self.mode == PolicyMode.PMC and len(self.scenario.queues) != 1:
            raise ValueError("PMC runs exactly one queue; use mode 'mpmc'")
        if self.sweep is not None:
            for strategy in self.sweep.strategies:
                if strategy.tech_index is not None and strategy.tech_index >= len(self.scenario.techs):
                    raise ValueError(f"strategy {strategy.name} points outside the sensing menu")
        return self


# ==================== Reports (DTOs) ====================

class AggregateRow(BaseModel):
    preset: str
    strategy: Optional[str] = None
    p0: Optional[float] = None
    v: float
    rep_count: int
    avg_profit: float
    profit_hw: float
    avg_queue: float
    queue_hw: float
    max_queue_observed: float
    q_bound: float
    z_bound: Optional[float] = None
    collision_rates: List[float]
    etas: List[float]
    bound_violations: int
    avg_rate: List[float]
    rate_hw: List[float]
    avg_revenue: List[float]
    revenue_hw: List[float]
    tech_share: Dict[str, float]


class AggregateReport(BaseModel):
    preset: str
    horizon: int
    replications: int
    seed: int
    burn_in: int
    sensing_ids: List[int] = []
    tech_labels: List[str] = []
    rows: List[AggregateRow]
    files: List[str] = []


class PresetInfo(BaseModel):
    name: str
    description: str


class RunRequest(BaseModel):
    preset: Optional[str] = None
    config: Optional[ExperimentConfig] = None
    v_values: Optional[List[float]] = None
    horizon: Optional[int] = Field(None, ge=1)
    replications: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = None
    write_csv: bool = False

    @model_validator(mode="after")
    def _check_source(self) -> "RunRequest":
        if (self.preset is None) == (self.config is None):
            raise ValueError("give exactly one of preset or config")
        return self


class BoundSummary(BaseModel):
    v: float
    q_bound: float
    z_bound: Optional[float] = None
    kappa: Optional[float] = None


class ValidationReport(BaseModel):
    valid: bool
    name: str
    channels: int
    sensing_channels: int
    leasing_channels: int
    queues: int
    bounds: List[BoundSummary]
