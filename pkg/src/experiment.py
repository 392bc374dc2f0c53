# src/experiment.py
"""Replicated runs of a policy and their aggregation into CSV reports.

Every (variant, V) pair reuses the same replication seeds, so curves over V or
over sensing strategies are compared on common random numbers.
"""
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from src.config import settings
from src.config_files import parse_experiment_config
from src.controller import Controller, stability_bounds
from src.environment import Environment, make_streams
from src.errors import OutputPathError
from src.logger_config import logger
from src.models import (
    AggregateReport, AggregateRow, BoundSummary, ExperimentConfig, OccupancyModel, PolicyConfig,
    PolicyMode, ScenarioConfig, SensingTech, ValidationReport,
)

AGGREGATE_SCHEMA_VERSION = 1

AGGREGATE_BASE_COLUMNS = [
    "preset", "V", "rep_count", "avg_profit", "profit_hw", "avg_queue", "queue_hw",
    "max_queue_observed", "q_bound",
]
SLOT_COLUMNS = [
    "t", "M", "q", "O", "A", "r", "Q", "profit", "n_sense", "n_lease", "tech_cost", "collisions_total",
]


@dataclass(frozen=True)
class Variant:
    strategy: Optional[str]
    p0: Optional[float]
    scenario: ScenarioConfig
    fixed_tech: Optional[int]

    @property
    def tag(self) -> str:
        if self.strategy is None:
            return "base"
        return f"{self.strategy}_p0-{self.p0:g}"


@dataclass(frozen=True)
class ReplicationTask:
    variant_index: int
    variant: Variant
    mode: PolicyMode
    v: float
    replication: int
    seed: int
    horizon: int
    burn_in: int
    strict_bounds: bool
    slot_csv: Optional[str] = None


@dataclass(frozen=True)
class ReplicationSummary:
    variant_index: int
    v: float
    replication: int
    avg_profit: float
    avg_queue: float
    max_queue: float
    collision_rates: np.ndarray
    bound_violations: int
    avg_rates: np.ndarray
    avg_revenues: np.ndarray
    tech_shares: np.ndarray


def tech_labels(techs: Sequence[SensingTech]) -> List[str]:
    """Column suffix per menu entry: its cost, plus the index when costs repeat"""
    costs = [f"{tech.cost:g}" for tech in techs]
    return [c if costs.count(c) == 1 else f"{c}_{k}" for k, c in enumerate(costs)]


def expand_variants(config: ExperimentConfig) -> List[Variant]:
    """One variant per (strategy, p0) of the sweep, or the scenario itself"""
    if config.sweep is None:
        return [Variant(None, None, config.scenario, None)]
    variants = []
    for strategy in config.sweep.strategies:
        for p0 in config.sweep.p0_values:
            scenario = config.scenario.model_copy(deep=True)
            for i in scenario.sensing_ids:
                scenario.channels[i].occupancy = OccupancyModel(p0=p0)
            variants.append(Variant(strategy.name, p0, scenario, strategy.tech_index))
    return variants


def _slot_row(metrics) -> Dict[str, Any]:
    row = {
        "t": metrics.t,
        "M": float(metrics.markets[0]),
        "q": float(metrics.prices[0]),
        "O": int(metrics.admits[0]),
        "A": float(metrics.arrivals.sum()),
        "r": float(metrics.rates.sum()),
        "Q": float(metrics.queues.sum()),
        "profit": metrics.profit,
        "n_sense": metrics.n_sense,
        "n_lease": metrics.n_lease,
        "tech_cost": metrics.tech_cost if metrics.n_sense else 0.0,
        "collisions_total": metrics.collisions_total,
    }
    if len(metrics.queues) > 1:
        for j in range(len(metrics.queues)):
            row[f"M_q{j + 1}"] = float(metrics.markets[j])
            row[f"q_q{j + 1}"] = float(metrics.prices[j])
            row[f"A_q{j + 1}"] = float(metrics.arrivals[j])
            row[f"r_q{j + 1}"] = float(metrics.rates[j])
            row[f"Q_q{j + 1}"] = float(metrics.queues[j])
    return row


def run_replication(task: ReplicationTask) -> ReplicationSummary:
    """Simulate one replication and reduce it to post-burn-in averages"""
    scenario = task.variant.scenario
    policy = PolicyConfig(
        scenario=scenario, v=task.v, mode=task.mode,
        fixed_tech=task.variant.fixed_tech, strict_bounds=task.strict_bounds,
    )
    environment = Environment(scenario, make_streams(task.seed, task.replication))
    controller = Controller(policy, environment)

    n_queues = len(scenario.queues)
    profit = np.zeros(task.horizon)
    backlog = np.zeros(task.horizon)
    rates = np.zeros((task.horizon, n_queues))
    revenues = np.zeros((task.horizon, n_queues))
    collisions = np.zeros((task.horizon, len(environment.sensing_ids)))
    tech_used = np.full(task.horizon, -1, dtype=int)
    max_queue = 0.0
    violations = 0
    rows: List[Dict[str, Any]] = []

    for t in range(task.horizon):
        _, metrics = controller.step()
        profit[t] = metrics.profit
        backlog[t] = metrics.queues.sum()
        rates[t] = metrics.rates
        revenues[t] = metrics.revenues
        collisions[t] = metrics.collisions
        if metrics.tech_index is not None:
            tech_used[t] = metrics.tech_index
        max_queue = max(max_queue, float(metrics.queues.max()))
        violations += int(metrics.queue_violation or metrics.collision_queue_violation)
        if task.slot_csv is not None:
            rows.append(_slot_row(metrics))

    post = slice(task.burn_in, None)
    n_post = task.horizon - task.burn_in
    shares = np.array(
        [np.count_nonzero(tech_used[post] == k) / n_post for k in range(len(scenario.techs))]
    )
    summary = ReplicationSummary(
        variant_index=task.variant_index,
        v=task.v,
        replication=task.replication,
        avg_profit=float(profit[post].mean()),
        avg_queue=float(backlog[post].mean()),
        max_queue=max_queue,
        collision_rates=collisions[post].mean(axis=0),
        bound_violations=violations,
        avg_rates=rates[post].mean(axis=0),
        avg_revenues=revenues[post].mean(axis=0),
        tech_shares=shares,
    )
    if task.slot_csv is not None:
        frame = pd.DataFrame(rows)
        frame = frame[SLOT_COLUMNS + [c for c in frame.columns if c not in SLOT_COLUMNS]]
        frame.to_csv(task.slot_csv, index=False)

    logger.info(
        f"Replication finished: variant={task.variant.tag}, V={task.v:g}, "
        f"rep={task.replication}, avg profit={summary.avg_profit:.4f}"
    )
    return summary


def mean_and_half_width(values: Sequence[float], confidence: float = 0.95) -> Tuple[float, float]:
    """Sample mean and Student-t confidence half-width; 0 with a single value"""
    x = np.asarray(values, dtype=float)
    mean = float(x.mean())
    if len(x) < 2:
        return mean, 0.0
    quantile = stats.t.ppf(0.5 + confidence / 2.0, len(x) - 1)
    return mean, float(quantile * x.std(ddof=1) / math.sqrt(len(x)))


def _aggregate(
    config: ExperimentConfig, variant: Variant, v: float,
    summaries: List[ReplicationSummary], labels: List[str],
) -> AggregateRow:
    policy = PolicyConfig(scenario=variant.scenario, v=v, mode=config.mode, fixed_tech=variant.fixed_tech)
    bounds = stability_bounds(policy)
    profit, profit_hw = mean_and_half_width([s.avg_profit for s in summaries])
    queue, queue_hw = mean_and_half_width([s.avg_queue for s in summaries])
    n_queues = len(variant.scenario.queues)
    rate_stats = [mean_and_half_width([s.avg_rates[j] for s in summaries]) for j in range(n_queues)]
    revenue_stats = [mean_and_half_width([s.avg_revenues[j] for s in summaries]) for j in range(n_queues)]
    scenario = variant.scenario
    return AggregateRow(
        preset=config.name,
        strategy=variant.strategy,
        p0=variant.p0,
        v=v,
        rep_count=len(summaries),
        avg_profit=profit,
        profit_hw=profit_hw,
        avg_queue=queue,
        queue_hw=queue_hw,
        max_queue_observed=max(s.max_queue for s in summaries),
        q_bound=bounds.q_bound,
        z_bound=bounds.z_bound,
        collision_rates=np.mean([s.collision_rates for s in summaries], axis=0).tolist(),
        etas=[scenario.channels[i].eta for i in scenario.sensing_ids],
        bound_violations=sum(s.bound_violations for s in summaries),
        avg_rate=[m for m, _ in rate_stats],
        rate_hw=[hw for _, hw in rate_stats],
        avg_revenue=[m for m, _ in revenue_stats],
        revenue_hw=[hw for _, hw in revenue_stats],
        tech_share=dict(zip(labels, np.mean([s.tech_shares for s in summaries], axis=0).tolist())),
    )


def aggregate_frame(report: AggregateReport) -> pd.DataFrame:
    """The aggregate CSV: fixed leading columns, then per-channel, per-queue and per-tech ones"""
    records = []
    for row in report.rows:
        record: Dict[str, Any] = {
            "preset": row.preset,
            "V": row.v,
            "rep_count": row.rep_count,
            "avg_profit": row.avg_profit,
            "profit_hw": row.profit_hw,
            "avg_queue": row.avg_queue,
            "queue_hw": row.queue_hw,
            "max_queue_observed": row.max_queue_observed,
            "q_bound": row.q_bound,
        }
        for cid, rate in zip(report.sensing_ids, row.collision_rates):
            record[f"coll_rate_{cid}"] = rate
        for cid, eta in zip(report.sensing_ids, row.etas):
            record[f"eta_{cid}"] = eta
        record["bound_violations"] = row.bound_violations
        record["z_bound"] = row.z_bound
        record["strategy"] = row.strategy
        record["p0"] = row.p0
        for j, (rate, hw) in enumerate(zip(row.avg_rate, row.rate_hw)):
            record[f"avg_rate_q{j + 1}"] = rate
            record[f"rate_hw_q{j + 1}"] = hw
        for j, (revenue, hw) in enumerate(zip(row.avg_revenue, row.revenue_hw)):
            record[f"avg_revenue_q{j + 1}"] = revenue
            record[f"revenue_hw_q{j + 1}"] = hw
        for label in report.tech_labels:
            record[f"tech_share_{label}"] = row.tech_share[label]
        records.append(record)
    return pd.DataFrame.from_records(records)


def _prepare_output(directory: Path) -> None:
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputPathError(f"cannot create output directory {directory}: {e}")
    if not directory.is_dir() or not os.access(directory, os.W_OK):
        raise OutputPathError(f"output directory {directory} is not writable")


def _execute(tasks: List[ReplicationTask]) -> List[ReplicationSummary]:
    workers = settings.max_workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(run_replication, tasks))
    return [run_replication(task) for task in tasks]


def apply_overrides(config: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    """Validated copy of config with the non-None overrides applied"""
    updates = {key: value for key, value in overrides.items() if value is not None}
    if not updates:
        return config
    return parse_experiment_config({**config.model_dump(), **updates})


def run_experiment(
    config: ExperimentConfig, output_dir: Optional[str] = None, write_csv: bool = True,
) -> AggregateReport:
    """Run every (variant, V, replication) of an experiment and aggregate"""
    directory = Path(output_dir or config.output_dir or settings.output_dir)
    if write_csv:
        _prepare_output(directory)

    variants = expand_variants(config)
    burn_in = int(config.horizon * config.burn_in_fraction)
    logger.info(
        f"Experiment started: preset={config.name}, V={config.v_values}, "
        f"horizon={config.horizon}, reps={config.replications}, variants={len(variants)}"
    )

    tasks = []
    for k, variant in enumerate(variants):
        for v in config.v_values:
            for rep in range(config.replications):
                slot_csv = None
                if write_csv and config.per_slot:
                    slot_csv = str(directory / f"{config.name}_{variant.tag}_V{v:g}_rep{rep}_slots.csv")
                tasks.append(ReplicationTask(
                    variant_index=k, variant=variant, mode=config.mode, v=v, replication=rep,
                    seed=config.seed, horizon=config.horizon, burn_in=burn_in,
                    strict_bounds=config.strict_bounds, slot_csv=slot_csv,
                ))
    summaries = _execute(tasks)

    labels = tech_labels(config.scenario.techs)
    rows = []
    for k, variant in enumerate(variants):
        for v in config.v_values:
            group = [s for s in summaries if s.variant_index == k and s.v == v]
            rows.append(_aggregate(config, variant, v, group, labels))

    files = [task.slot_csv for task in tasks if task.slot_csv is not None]
    report = AggregateReport(
        preset=config.name,
        horizon=config.horizon,
        replications=config.replications,
        seed=config.seed,
        burn_in=burn_in,
        sensing_ids=config.scenario.sensing_ids,
        tech_labels=labels,
        rows=rows,
        files=files,
    )
    if write_csv:
        path = directory / f"{config.name}_aggregate_v{AGGREGATE_SCHEMA_VERSION}.csv"
        aggregate_frame(report).to_csv(path, index=False)
        report.files.insert(0, str(path))
    logger.info(f"Experiment finished: preset={config.name}, rows={len(rows)}, files={len(report.files)}")
    return report


def validate_experiment(config: ExperimentConfig) -> ValidationReport:
    """Structural summary plus the queue bounds per V"""
    scenario = config.scenario
    bounds = []
    for v in config.v_values:
        b = stability_bounds(PolicyConfig(scenario=scenario, v=v, mode=config.mode))
        bounds.append(BoundSummary(v=v, q_bound=b.q_bound, z_bound=b.z_bound, kappa=b.kappa))
    return ValidationReport(
        valid=True,
        name=config.name,
        channels=len(scenario.channels),
        sensing_channels=len(scenario.sensing_ids),
        leasing_channels=len(scenario.leasing_ids),
        queues=len(scenario.queues),
        bounds=bounds,
    )
