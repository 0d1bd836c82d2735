import math

import numpy as np
import pytest
from scipy.integrate import quad

from dppstream.channel import (
    CapacityEstimator,
    ergodic_capacity,
    ergodic_capacity_no_interference_closedform,
    gain_matrix,
    link_capacities,
)
from dppstream.topology import build_grid_topology


def quad_capacity(s):
    """Independent quadrature of E[log2(1 + s X)], X ~ Exp(1)."""
    value, _ = quad(lambda x: math.log2(1 + s * x) * math.exp(-x), 0, np.inf, limit=200)
    return value


class TestClosedForm:
    def test_zero(self):
        assert ergodic_capacity_no_interference_closedform(0.0) == 0.0

    def test_continuity_near_zero(self):
        assert ergodic_capacity_no_interference_closedform(1e-12) < 1e-9

    def test_s100(self):
        got = ergodic_capacity_no_interference_closedform(100)
        assert got == pytest.approx(5.884, abs=1e-3)

    def test_s1(self):
        # e * E1(1) / ln 2, frozen from the quadrature oracle
        got = ergodic_capacity_no_interference_closedform(1)
        assert got == pytest.approx(0.860347, abs=1e-5)

    @pytest.mark.parametrize("s", [0.01, 0.5, 1, 10, 100, 1e4])
    def test_matches_quadrature(self, s):
        assert ergodic_capacity_no_interference_closedform(s) == pytest.approx(
            quad_capacity(s), rel=1e-8
        )

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ergodic_capacity_no_interference_closedform(-1)


class TestMonteCarlo:
    def test_zero_signal_exact(self):
        est = CapacityEstimator(num_samples=10, seed=1)
        assert ergodic_capacity(0.0, [5.0, 2.0], est) == 0.0

    @pytest.mark.parametrize("s", [1.0, 10.0, 100.0])
    def test_converges_to_closed_form(self, s):
        est = CapacityEstimator(num_samples=200_000, seed=5)
        mc = ergodic_capacity(s, [], est)
        cf = ergodic_capacity_no_interference_closedform(s)
        assert abs(mc - cf) / cf < 0.01

    def test_interference_strictly_lowers(self):
        est = CapacityEstimator(num_samples=100_000, seed=5, common_variates=True)
        clean = ergodic_capacity(100.0, [0.0], est)
        noisy = ergodic_capacity(100.0, [100.0], est)
        assert noisy < clean

    def test_interferer_of_power_100_frozen(self):
        # 1.383855 frozen from double quadrature of
        # E[log2(1 + 100 X / (1 + 100 Y))] over X, Y ~ Exp(1)
        est = CapacityEstimator(num_samples=1_000_000, seed=5)
        got = ergodic_capacity(100.0, [100.0], est)
        assert got == pytest.approx(1.383855, abs=0.01)
        assert got < ergodic_capacity_no_interference_closedform(100.0)

    def test_deterministic(self):
        est = CapacityEstimator(num_samples=5000, seed=42)
        a = ergodic_capacity(50.0, [10.0, 5.0], est)
        b = ergodic_capacity(50.0, [10.0, 5.0], est)
        assert a == b

    def test_monotone_in_signal_with_common_variates(self):
        est = CapacityEstimator(num_samples=2000, seed=9, common_variates=True)
        values = [ergodic_capacity(s, [3.0], est) for s in (1, 2, 5, 10, 50)]
        assert values == sorted(values)

    def test_monotone_in_interference_with_common_variates(self):
        est = CapacityEstimator(num_samples=2000, seed=9, common_variates=True)
        values = [ergodic_capacity(10.0, [p], est) for p in (0.1, 1.0, 5.0, 20.0)]
        assert values == sorted(values, reverse=True)

    def test_gain_floor_drops_interferers(self):
        est = CapacityEstimator(num_samples=1000, seed=3, common_variates=True)
        floored = CapacityEstimator(
            num_samples=1000, seed=3, common_variates=True, interference_gain_floor=0.5
        )
        assert ergodic_capacity(10.0, [0.1], floored) == ergodic_capacity(
            10.0, [], est
        )

    def test_negative_powers_rejected(self):
        est = CapacityEstimator(num_samples=10, seed=1)
        with pytest.raises(ValueError):
            ergodic_capacity(-1.0, [], est)
        with pytest.raises(ValueError):
            ergodic_capacity(1.0, [-2.0], est)

    def test_bad_sample_count(self):
        with pytest.raises(ValueError):
            CapacityEstimator(num_samples=0)


class TestLinkCapacities:
    def test_gain_matrix_range(self):
        graph = build_grid_topology(400, 5, 2, 60, 3)
        gains = gain_matrix(graph, 0)
        assert gains.shape == (25, 50)
        assert np.all(gains > 0) and np.all(gains <= 1)

    def test_single_helper_matches_no_interference(self):
        graph = build_grid_topology(80, 1, 1, 60, 3)
        gains = gain_matrix(graph, 0)
        est = CapacityEstimator(num_samples=200_000, seed=7)
        caps = link_capacities(graph, gains, [100.0], est)
        (edge, mc), = caps.items()
        cf = ergodic_capacity_no_interference_closedform(100.0 * gains[edge])
        assert mc == pytest.approx(cf, rel=0.01)

    def test_symmetric_equidistant_user(self):
        from dataclasses import replace

        from dppstream.topology import Position, UserNode

        graph = build_grid_topology(160, 2, 0, 90, 3)
        # user at the exact center, equidistant from all four helpers
        user = UserNode(id=0, trajectory=((Position(80.0, 80.0), 0.0),))
        graph = replace(graph, users=(user,))
        gains = gain_matrix(graph, 0)
        est = CapacityEstimator(num_samples=5000, seed=7, common_variates=True)
        caps = link_capacities(graph, gains, [100.0] * 4, est)
        values = list(caps.values())
        assert len(values) == 4
        assert all(v == pytest.approx(values[0], rel=1e-12) for v in values)

    def test_grid_capacity_below_isolated(self):
        graph = build_grid_topology(400, 5, 0, 60, 3)
        from dataclasses import replace

        from dppstream.topology import Position, UserNode

        user = UserNode(id=0, trajectory=((Position(200.0, 200.0), 0.0),))
        graph = replace(graph, users=(user,))
        gains = gain_matrix(graph, 0)
        est = CapacityEstimator(num_samples=100_000, seed=7)
        caps = link_capacities(graph, gains, [100.0] * 25, est)
        center = caps[(12, 0)]
        isolated = ergodic_capacity_no_interference_closedform(100.0)
        assert center < isolated

    def test_positive_on_edges(self):
        graph = build_grid_topology(400, 5, 2, 60, 3)
        gains = gain_matrix(graph, 0)
        est = CapacityEstimator(num_samples=500, seed=7)
        caps = link_capacities(graph, gains, [100.0] * 25, est)
        assert caps and all(c > 0 for c in caps.values())

    def test_deterministic_across_calls(self):
        graph = build_grid_topology(400, 5, 1, 60, 3)
        gains = gain_matrix(graph, 0)
        est = CapacityEstimator(num_samples=500, seed=7)
        a = link_capacities(graph, gains, [100.0] * 25, est)
        b = link_capacities(graph, gains, [100.0] * 25, est)
        assert a == b
