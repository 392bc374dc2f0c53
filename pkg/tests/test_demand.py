# tests/test_demand.py
import numpy as np
import pytest

from src.demand import DemandModel, expected_demand, optimal_price
from src.errors import ConfigurationError, DomainError
from src.models import DemandFamily, DemandSpec
from src.oracle import grid_price


@pytest.fixture
def quadratic():
    return DemandModel(DemandSpec())


class TestExpectedDemand:
    def test_quadratic_values(self, quadratic):
        assert expected_demand(quadratic, 2.0, 3.0) == pytest.approx(2.0)
        assert expected_demand(quadratic, 1.0, 0.0) == pytest.approx(25.0)
        assert expected_demand(quadratic, 1.0, 5.0) == 0.0

    def test_zero_above_the_cap(self, quadratic):
        assert quadratic.expected_demand(1.0, 7.0) == 0.0

    def test_users_divide_by_mean_file_length(self, quadratic):
        # uniform 1..10 packets has mean 5.5
        assert quadratic.expected_users(1.0, 0.0) == pytest.approx(25.0 / 5.5)

    def test_negative_price(self, quadratic):
        with pytest.raises(DomainError):
            quadratic.expected_demand(1.0, -0.5)

    def test_linear_family(self):
        demand = DemandModel(DemandSpec(family=DemandFamily.LINEAR, scale=2.0))
        assert demand.expected_demand(1.0, 1.0) == pytest.approx(8.0)

    def test_table_from_csv(self, tmp_path):
        path = tmp_path / "demand.csv"
        path.write_text("market,price,demand\n1,0,10\n1,5,0\n2,0,5\n2,5,0\n")
        demand = DemandModel(DemandSpec(family=DemandFamily.TABLE, table_path=str(path)), markets=[1.0, 2.0])
        assert demand.expected_demand(1.0, 2.5) == pytest.approx(5.0)
        assert demand.expected_demand(2.0, 2.5) == pytest.approx(2.5)

    def test_table_missing_market_curve(self):
        spec = DemandSpec(family=DemandFamily.TABLE, table={"1": [[0.0, 10.0], [5.0, 0.0]]})
        with pytest.raises(ConfigurationError):
            DemandModel(spec, markets=[1.0, 2.0])

    def test_table_must_not_increase(self):
        spec = DemandSpec(family=DemandFamily.TABLE, table={"1": [[0.0, 1.0], [5.0, 2.0]]})
        with pytest.raises(ConfigurationError):
            DemandModel(spec)


class TestOptimalPrice:
    def test_empty_queue(self, quadratic):
        decision = optimal_price(quadratic, 1.0, 0.0, 100.0)
        assert decision.price == pytest.approx(5.0 / 3.0, abs=1e-6)
        assert decision.objective == pytest.approx(500.0 / 27.0, rel=1e-9)
        assert decision.admit

    def test_queue_shift_of_one(self, quadratic):
        decision = optimal_price(quadratic, 1.0, 100.0, 100.0)
        assert decision.price == pytest.approx(7.0 / 3.0, abs=1e-6)
        assert decision.objective == pytest.approx(256.0 / 27.0, rel=1e-9)
        assert decision.admit

    def test_market_state_scales_the_objective(self, quadratic):
        decision = optimal_price(quadratic, 2.0, 0.0, 100.0)
        assert decision.price == pytest.approx(5.0 / 3.0, abs=1e-6)
        assert decision.objective == pytest.approx(250.0 / 27.0, rel=1e-9)

    def test_shift_beyond_cap_rejects(self, quadratic):
        decision = optimal_price(quadratic, 1.0, 500.0, 100.0)
        assert not decision.admit
        assert decision.objective <= 0.0

    def test_linear_family_midpoint(self):
        demand = DemandModel(DemandSpec(family=DemandFamily.LINEAR))
        decision = optimal_price(demand, 1.0, 10.0, 10.0)
        # (q - 1)(5 - q) peaks at q = 3 with value 4
        assert decision.price == pytest.approx(3.0, abs=1e-6)
        assert decision.objective == pytest.approx(4.0, rel=1e-9)

    def test_table_kink(self):
        spec = DemandSpec(
            family=DemandFamily.TABLE,
            table={"1": [[0.0, 10.0], [2.0, 10.0], [2.5, 1.0], [5.0, 0.0]]},
        )
        decision = optimal_price(DemandModel(spec), 1.0, 0.0, 1.0)
        assert decision.price == pytest.approx(2.0, abs=1e-6)
        assert decision.objective == pytest.approx(20.0, rel=1e-9)

    def test_zero_demand_rejects(self):
        spec = DemandSpec(family=DemandFamily.TABLE, table={"1": [[0.0, 0.0], [5.0, 0.0]]})
        assert not optimal_price(DemandModel(spec), 1.0, 0.0, 1.0).admit

    def test_price_is_non_decreasing_in_backlog(self, quadratic):
        prices = [optimal_price(quadratic, 1.0, q, 100.0).price for q in np.linspace(0.0, 499.0, 100)]
        assert all(b >= a - 1e-9 for a, b in zip(prices, prices[1:]))

    def test_invalid_inputs(self, quadratic):
        with pytest.raises(DomainError):
            optimal_price(quadratic, 1.0, -1.0, 10.0)
        with pytest.raises(DomainError):
            optimal_price(quadratic, 1.0, 1.0, 0.0)

    def test_agrees_with_grid_search(self, quadratic):
        rng = np.random.default_rng(9)
        for _ in range(50):
            market = float(rng.choice([1.0, 2.0]))
            v = float(rng.choice([5.0, 10.0, 50.0, 100.0]))
            backlog = float(rng.uniform(0.0, 5.0 * v))
            best = optimal_price(quadratic, market, backlog, v)
            grid = grid_price(quadratic, market, backlog, v, 20_001)
            assert grid.objective <= best.objective + 1e-9
            assert best.objective - grid.objective <= 1e-6
            assert best.admit == grid.admit or abs(best.objective) < 1e-6

    def test_grid_finds_the_stationary_point(self, quadratic):
        decision = grid_price(quadratic, 1.0, 0.0, 1.0, 100_001)
        assert abs(decision.price - 5.0 / 3.0) <= 5.0 / 100_000
