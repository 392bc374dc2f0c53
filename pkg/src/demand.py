# src/demand.py
"""Expected-demand families and the per-slot revenue maximization.

The operator announces a price q and an admission flag O by maximizing
(q - Q/V) * D(M, q) over [0, q_max]; O = 1 only when that maximum is positive.
"""
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from src.config import settings
from src.errors import ConfigurationError, DomainError
from src.models import DemandFamily, DemandSpec


@dataclass(frozen=True)
class PricingDecision:
    price: float
    admit: bool
    objective: float


class DemandModel:
    """Expected packet demand D(M, q) and the user/file mix generating it.

    Every family is expressed as packet demand; the expected number of
    incoming users is D divided by the mean file length, so Monte-Carlo
    arrivals reproduce D exactly in expectation.
    """

    def __init__(self, spec: DemandSpec, markets: Optional[Iterable[float]] = None):
        self.spec = spec
        self.family = spec.family
        self.q_max = spec.q_max
        self.a_max = spec.a_max
        self.mean_length = spec.mean_file_length
        self.app_weights = np.array([app.weight for app in spec.applications], dtype=float)
        self.unimodal = spec.family != DemandFamily.TABLE
        self._table: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}
        if spec.family == DemandFamily.TABLE:
            self._table = _load_table(spec)
            for market in markets or ():
                if float(market) not in self._table:
                    raise ConfigurationError(f"demand table has no curve for market state {market}")

    def expected_demand(self, market: float, price: float) -> float:
        """D(M, q) in packets/slot"""
        if price < 0:
            raise DomainError(f"price must be non-negative, got {price}")
        if price >= self.q_max:
            return 0.0
        if self.family == DemandFamily.QUADRATIC_S7:
            return self.spec.scale / market * (price - self.q_max) ** 2
        if self.family == DemandFamily.LINEAR:
            return self.spec.scale / market * (self.q_max - price)
        try:
            prices, demands = self._table[float(market)]
        except KeyError:
            raise DomainError(f"no demand curve for market state {market}")
        return float(np.interp(price, prices, demands))

    def expected_users(self, market: float, price: float) -> float:
        """E[N](M, q): Poisson rate of incoming users"""
        return self.expected_demand(market, price) / self.mean_length


def _load_table(spec: DemandSpec) -> Dict[float, Tuple[np.ndarray, np.ndarray]]:
    curves: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}
    if spec.table is not None:
        for label, points in spec.table.items():
            pts = np.asarray(points, dtype=float)
            curves[float(label)] = (pts[:, 0], pts[:, 1])
    else:
        try:
            frame = pd.read_csv(spec.table_path)
        except (OSError, ValueError) as e:
            raise ConfigurationError(f"cannot read demand table {spec.table_path}: {e}")
        missing = {"market", "price", "demand"} - set(frame.columns)
        if missing:
            raise ConfigurationError(f"demand table lacks columns {sorted(missing)}")
        for label, group in frame.groupby("market"):
            group = group.sort_values("price")
            curves[float(label)] = (group["price"].to_numpy(float), group["demand"].to_numpy(float))

    for label, (prices, demands) in curves.items():
        if prices.ndim != 1 or len(prices) < 2:
            raise ConfigurationError(f"demand curve for market {label} needs at least two points")
        if np.any(np.diff(prices) <= 0):
            raise ConfigurationError(f"demand curve for market {label} must have increasing prices")
        if np.any(np.diff(demands) > 0) or np.any(demands < 0):
            raise ConfigurationError(f"demand curve for market {label} must be non-negative and non-increasing")
    return curves


def expected_demand(demand: DemandModel, market: float, price: float) -> float:
    return demand.expected_demand(market, price)


def _shifted_revenue(demand: DemandModel, market: float, shift: float, price: float) -> float:
    return (price - shift) * demand.expected_demand(market, price)


def optimal_price(demand: DemandModel, market: float, backlog: float, v: float) -> PricingDecision:
    """Solve max_q (q - Q/V) D(M, q) on [0, q_max]"""
    if backlog < 0 or v <= 0:
        raise DomainError("pricing needs Q >= 0 and V > 0")
    shift = backlog / v
    q_max = demand.q_max
    if shift >= q_max:
        # every admissible price loses money against the queue shift
        return PricingDecision(price=q_max, admit=False, objective=0.0)

    def objective(q: float) -> float:
        return _shifted_revenue(demand, market, shift, q)

    if demand.unimodal:
        # revenue is non-positive below the shift, so search (shift, q_max) only
        lo = shift
        result = minimize_scalar(
            lambda q: -objective(q), bounds=(lo, q_max), method="bounded",
            options={"xatol": 1e-12, "maxiter": 1000},
        )
        candidates = [lo, float(result.x), q_max]
    else:
        grid = np.linspace(0.0, q_max, settings.price_grid_steps + 1)
        values = np.array([objective(q) for q in grid])
        k = int(np.argmax(values))
        candidates = [float(grid[k])]
        left, right = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        if right > left:
            result = minimize_scalar(
                lambda q: -objective(q), bounds=(left, right), method="bounded",
                options={"xatol": 1e-12},
            )
            candidates.append(float(result.x))

    # ascending scan with strict improvement keeps the smallest maximizer
    best_price, best_value = q_max, -np.inf
    for q in sorted(set(candidates) | {q_max}):
        value = objective(q)
        if value > best_value:
            best_price, best_value = q, value
    if best_value <= 0.0:
        return PricingDecision(price=best_price, admit=False, objective=best_value)
    return PricingDecision(price=best_price, admit=True, objective=best_value)
