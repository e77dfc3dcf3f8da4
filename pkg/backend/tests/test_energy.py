"""
Tests for the energy ledger.
"""

from __future__ import annotations

import pytest

from backend.app.engine.errors import SimulationLogicError
from backend.app.network.energy import (
    EnergyLedger,
    SocLevel,
    apply_cost,
    discretize_soc,
    soc_stats,
)


class TestApplyCost:
    def test_hop_cost(self):
        ledger = apply_cost(EnergyLedger(1), 0, 2.0)
        assert ledger.soc[0] == 98.0
        assert ledger.is_alive(0)

    def test_sink_cost(self):
        ledger = EnergyLedger.from_levels([10.0])
        apply_cost(ledger, 0, 8.0)
        assert ledger.soc[0] == 2.0

    def test_floor_at_zero_kills(self):
        ledger = EnergyLedger.from_levels([1.0])
        apply_cost(ledger, 0, 8.0)
        assert ledger.soc[0] == 0.0
        assert not ledger.is_alive(0)

    def test_dead_node_rejected(self):
        ledger = EnergyLedger.from_levels([1.0, 50.0])
        apply_cost(ledger, 0, 5.0)
        with pytest.raises(SimulationLogicError, match="dead"):
            apply_cost(ledger, 0, 1.0)

    def test_removed_amounts_are_clipped(self):
        ledger = EnergyLedger.from_levels([3.0, 100.0])
        assert ledger.charge(0, 8.0) == 3.0
        assert ledger.charge(1, 2.0) == 2.0
        assert ledger.total() == 98.0

    def test_negative_cost_rejected(self):
        with pytest.raises(ValueError):
            EnergyLedger(1).charge(0, -1.0)


class TestDiscretize:
    @pytest.mark.parametrize("soc, level", [
        (100.0, SocLevel.VERY_HIGH),
        (0.0, SocLevel.VERY_LOW),
        (50.0, SocLevel.MEDIUM),
        (19.999, SocLevel.VERY_LOW),
        (20.0, SocLevel.LOW),
        (80.0, SocLevel.VERY_HIGH),
    ])
    def test_levels(self, soc, level):
        assert discretize_soc(soc) is level

    def test_monotone(self):
        levels = [discretize_soc(x / 2) for x in range(201)]
        assert levels == sorted(levels)

    @pytest.mark.parametrize("soc", [-0.1, 100.1])
    def test_out_of_range(self, soc):
        with pytest.raises(ValueError):
            discretize_soc(soc)


class TestSocStats:
    def test_uniform(self):
        stats = soc_stats(EnergyLedger(5, initial_soc=98.0))
        assert stats.mean == 98.0
        assert stats.variance == 0.0
        assert stats.alive_count == 5

    def test_two_point_population_variance(self):
        stats = soc_stats(EnergyLedger.from_levels([100.0, 60.0]))
        assert stats.mean == pytest.approx(80.0)
        assert stats.variance == pytest.approx(400.0)

    def test_checkpoint_fixture_mean(self):
        stats = soc_stats(EnergyLedger.from_levels([98.0, 68.0, 49.0, 36.0, 21.0]))
        assert stats.mean == pytest.approx(54.4)
        assert stats.minimum == 21.0
        assert stats.maximum == 98.0

    def test_dead_nodes_count_as_zero(self):
        stats = soc_stats(EnergyLedger.from_levels([0.0, 50.0]))
        assert stats.mean == pytest.approx(25.0)
        assert stats.alive_count == 1


class TestUsage:
    def test_decay_halves(self):
        ledger = EnergyLedger(3)
        for _ in range(5):
            ledger.record_use(0)
        ledger.record_use(1)
        ledger.decay_usage()
        assert list(ledger.usage_count) == [2, 0, 0]

    def test_snapshot_columns(self):
        frame = EnergyLedger(4).snapshot()
        assert list(frame.columns) == ["node_id", "soc", "alive", "usage_count"]
        assert len(frame) == 4

    def test_percentile_none_when_all_dead(self):
        ledger = EnergyLedger.from_levels([0.0, 0.0])
        assert ledger.percentile_alive(70) is None
