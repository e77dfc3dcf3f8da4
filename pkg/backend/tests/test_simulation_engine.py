"""
Tests for the episode loop, transmitter election and mode overhead.
"""

from __future__ import annotations

import numpy as np
import pytest

from backend.app.engine.base_protocol import ChargeEvent
from backend.app.engine.errors import NetworkDeadError, SimulationLogicError
from backend.app.engine.simulation_engine import (
    SimulationEngine,
    cloud_step_overhead,
    elect_transmitter,
    replay_charges,
    run_simulation,
)
from backend.app.network.energy import EnergyLedger
from backend.app.rl.reward import StepOutcome
from backend.app.schema.config_schema import (
    ComputeMode,
    CostSchedule,
    Protocol,
    Region,
    RlParams,
    RoutingParams,
    SimConfig,
)
from backend.app.schema.metrics_schema import RunStatus

QUIET_COSTS = CostSchedule(sense_cost=0.0, local_compute_cost=0.0)


def _config(**overrides) -> SimConfig:
    base = dict(
        region=Region(extents=(50.0, 50.0)),
        node_count=20,
        coverage_radius=15.0,
        episodes=5,
        sources_per_episode=4,
        seed=7,
    )
    base.update(overrides)
    return SimConfig(**base)


def _line_config(**overrides) -> SimConfig:
    base = dict(
        region=Region(extents=(10.0, 10.0)),
        node_count=3,
        node_positions=[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)],
        coverage_radius=1.0,
        episodes=1,
        sources_per_episode=1,
        costs=QUIET_COSTS,
        rl=RlParams(epsilon=0.0),
    )
    base.update(overrides)
    return SimConfig(**base)


class TestElectTransmitter:
    def test_highest_soc_without_requests(self):
        assert elect_transmitter(EnergyLedger.from_levels([90.0, 80.0, 70.0]), set()) == 0

    def test_tie_goes_to_lower_id(self):
        assert elect_transmitter(EnergyLedger.from_levels([50.0, 90.0, 90.0]), set()) == 1

    def test_eligible_requester_wins(self):
        ledger = EnergyLedger.from_levels([90.0, 85.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0])
        assert elect_transmitter(ledger, {1}) == 1

    def test_low_requester_ignored(self):
        ledger = EnergyLedger.from_levels([90.0, 85.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0])
        assert elect_transmitter(ledger, {2}) == 0

    def test_dead_network(self):
        with pytest.raises(NetworkDeadError):
            elect_transmitter(EnergyLedger.from_levels([0.0, 0.0]), set())


class TestModeOverhead:
    def test_cloud_reports_every_alive_node(self):
        config = _config(node_count=100, mode=ComputeMode.CLOUD)
        ledger = EnergyLedger(100)
        overhead = cloud_step_overhead(ledger, config, {0: 3})
        assert overhead.report_deductions == 100
        assert overhead.compute_deductions == 0
        assert overhead.decision_delay_s == pytest.approx(0.015)
        assert ledger.soc[0] == pytest.approx(99.9)

    def test_local_charges_per_decision(self):
        config = _config()
        ledger = EnergyLedger(20)
        overhead = cloud_step_overhead(ledger, config, {0: 2, 5: 1})
        assert overhead.report_deductions == 0
        assert overhead.compute_deductions == 3
        assert ledger.soc[0] == pytest.approx(99.9)
        assert ledger.soc[5] == pytest.approx(99.95)


class TestRunEpisode:
    @pytest.mark.parametrize("protocol", [Protocol.MARL, Protocol.SPMH])
    def test_source_next_to_transmitter(self, protocol):
        engine = SimulationEngine(_line_config(protocol=protocol))
        engine._draw_sources = lambda: [1]
        metrics = engine.run_episode()
        assert list(engine.state.ledger.soc) == [92.0, 98.0, 100.0]
        assert metrics.transmitter_id == 0
        assert metrics.delivered_packets == 1
        assert metrics.energy_spent == pytest.approx(10.0)

    def test_zero_sources_only_sleep_rewards(self):
        config = _config(sources_per_episode=0, costs=QUIET_COSTS, rl=RlParams(epsilon=0.0), episodes=1)
        report = run_simulation(config)
        row = report.episodes[0]
        assert row.mean_soc == 100.0
        assert row.delivered_packets == 0
        # sleep 1 per node, then no failure 3 + high mean 2 once
        assert row.total_reward == pytest.approx(config.node_count + 5.0)

    def test_all_nodes_die(self):
        config = _config(
            protocol=Protocol.SPMH, sources_per_episode=20,
            costs=CostSchedule(sense_cost=100.0), episodes=5,
        )
        report = run_simulation(config)
        assert report.status is RunStatus.NETWORK_DEAD
        assert len(report.episodes) == 1
        assert report.episodes[0].alive == 0

    def test_delivered_paths_respect_fused_graph_and_hop_bound(self):
        engine = SimulationEngine(_config(sources_per_episode=10))
        ctx = engine._begin()
        engine.protocol.route_packets(ctx, engine.state.ledger.alive_ids())
        for path in ctx.delivered:
            assert path.hop_count <= engine.state.h_max
            assert path.destination == ctx.transmitter
            for a, b in zip(path.nodes, path.nodes[1:]):
                assert ctx.fused.has_edge(a, b)

    def test_run_after_death_rejected(self):
        engine = SimulationEngine(_config(protocol=Protocol.SPMH))
        engine.state.ledger.alive[:] = False
        engine.state.ledger.soc[:] = 0.0
        with pytest.raises(NetworkDeadError):
            engine.run_episode()


class TestRunSimulation:
    def test_single_episode(self):
        report = run_simulation(_config(episodes=1))
        assert len(report.episodes) == 1
        assert report.episodes[0].episode == 0

    def test_deterministic(self):
        a = run_simulation(_config())
        b = run_simulation(_config())
        assert a.model_dump_json() == b.model_dump_json()

    def test_seed_changes_outcome(self):
        a = run_simulation(_config(seed=1))
        b = run_simulation(_config(seed=2))
        assert a.final_soc != b.final_soc

    @pytest.mark.parametrize("protocol", list(Protocol))
    @pytest.mark.parametrize("mode", list(ComputeMode))
    def test_alive_and_mean_never_increase(self, protocol, mode):
        report = run_simulation(_config(protocol=protocol, mode=mode, episodes=12))
        assert len(report.episodes) == 12
        for prev, cur in zip(report.episodes, report.episodes[1:]):
            assert cur.alive <= prev.alive
            assert cur.mean_soc <= prev.mean_soc + 1e-9

    @pytest.mark.parametrize("protocol", list(Protocol))
    def test_energy_books_balance(self, protocol):
        config = _config(protocol=protocol, episodes=8)
        report = run_simulation(config)
        spent = sum(row.energy_spent for row in report.episodes)
        assert spent == pytest.approx(100.0 * config.node_count - sum(report.final_soc))

    def test_leach_has_no_transmitter(self):
        report = run_simulation(_config(protocol=Protocol.LEACH))
        assert all(row.transmitter_id is None for row in report.episodes)

    def test_cloud_decision_delay_recorded(self):
        report = run_simulation(_config(mode=ComputeMode.CLOUD, episodes=1))
        assert report.episodes[0].decision_delay_ms == pytest.approx(15.0)

    def test_snapshots_and_echo(self):
        report = run_simulation(_config(episodes=3, snapshot_episodes=[0, 2]))
        assert sorted(report.soc_snapshots) == [0, 2]
        assert report.soc_snapshots[2] == report.final_soc
        assert report.seed == 7
        assert report.max_hops == 6

    def test_no_delivery_leaves_delay_empty(self):
        report = run_simulation(_config(sources_per_episode=0, episodes=2))
        for row in report.episodes:
            assert row.delivered_packets == 0
            assert row.mean_delay_ms is None
            assert row.min_delay_ms is None and row.max_delay_ms is None


AUDIT_COSTS = CostSchedule(idle_cost=0.2, sleep_cost=0.1)


def _spy_on_routing(engine: SimulationEngine) -> dict:
    captured: dict = {}
    route = engine.protocol.route_packets

    def spy(ctx, sources):
        captured["ctx"] = ctx
        route(ctx, sources)

    engine.protocol.route_packets = spy
    return captured


class TestEnergyAudit:
    def test_spmh_categories_match_cost_schedule(self):
        engine = SimulationEngine(_config(protocol=Protocol.SPMH, costs=AUDIT_COSTS, sources_per_episode=6))
        captured = _spy_on_routing(engine)
        row = engine.run_episode()
        ctx = captured["ctx"]
        spent = row.energy_by_category
        assert row.alive == 20
        assert spent["sense"] == pytest.approx(1.0 * (row.delivered_packets + row.dropped_packets))
        assert spent.get("hop", 0.0) == pytest.approx(2.0 * sum(p.hop_count for p in ctx.delivered))
        assert spent.get("sink", 0.0) == pytest.approx(8.0 if row.delivered_packets else 0.0)
        assert spent.get("idle", 0.0) / 0.2 + spent.get("sleep", 0.0) / 0.1 == pytest.approx(20)
        assert "compute" not in spent and "report" not in spent
        assert sum(spent.values()) == pytest.approx(row.energy_spent)

    @pytest.mark.parametrize("mode, category, unit", [
        (ComputeMode.LOCAL, "compute", 0.05),
        (ComputeMode.CLOUD, "report", 0.1),
    ])
    def test_marl_overhead_category(self, mode, category, unit):
        engine = SimulationEngine(_config(mode=mode, costs=AUDIT_COSTS))
        captured = _spy_on_routing(engine)
        row = engine.run_episode()
        ctx = captured["ctx"]
        expected = len(ctx.decisions) if mode is ComputeMode.LOCAL else row.alive
        assert row.energy_by_category[category] == pytest.approx(unit * expected)
        assert sum(row.energy_by_category.values()) == pytest.approx(row.energy_spent)

    def test_clipping_at_death_is_accounted(self):
        config = _line_config(protocol=Protocol.SPMH, costs=CostSchedule(sense_cost=0.0, hop_cost=60.0))
        engine = SimulationEngine(config)
        engine.state.ledger.soc[2] = 30.0
        engine._draw_sources = lambda: [2]
        row = engine.run_episode()
        assert not engine.state.ledger.is_alive(2)
        assert row.energy_by_category["hop"] == pytest.approx(30.0 + 60.0)

    def test_uncounted_charge_detected(self):
        engine = SimulationEngine(_config(protocol=Protocol.SPMH))
        settle = engine.protocol.settle_idle

        def leaky(ctx):
            settle(ctx)
            ctx.ledger.charge(ctx.ledger.alive_ids()[0], 1.0)

        engine.protocol.settle_idle = leaky
        with pytest.raises(SimulationLogicError, match="logged charges"):
            engine.run_episode()

    def test_charge_after_death_detected(self):
        events = [ChargeEvent(0, 5.0, "hop"), ChargeEvent(0, 1.0, "sense")]
        with pytest.raises(SimulationLogicError, match="dead node 0"):
            replay_charges(np.array([5.0, 50.0]), np.array([True, True]), events)

    def test_replay_clips_and_kills(self):
        soc, alive, spent = replay_charges(
            np.array([3.0, 50.0]), np.array([True, True]),
            [ChargeEvent(0, 8.0, "sink"), ChargeEvent(1, 2.0, "hop")],
        )
        assert list(soc) == [0.0, 48.0]
        assert list(alive) == [False, True]
        assert spent == {"sink": 3.0, "hop": 2.0}


class TestMarlRouting:
    def test_exploration_never_drops_with_a_live_hop(self):
        engine = SimulationEngine(_line_config(
            episodes=10, rl=RlParams(epsilon=1.0, epsilon_decay=1.0),
        ))
        engine._draw_sources = lambda: [2]
        rows = [engine.run_episode() for _ in range(10)]
        assert sum(row.dropped_packets for row in rows) == 0
        assert all(row.delivered_packets == 1 for row in rows)

    def test_drops_only_when_no_route_exists(self):
        engine = SimulationEngine(_config(
            episodes=5, sources_per_episode=8, rl=RlParams(epsilon=1.0, epsilon_decay=1.0),
        ))
        rows = [engine.run_episode() for _ in range(5)]
        assert sum(row.dropped_packets for row in rows) == engine.state.no_route_events

    def test_starved_relay_skipped_before_truncation(self):
        config = _line_config(
            node_positions=[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (1.0, 0.9)],
            node_count=4,
            coverage_radius=1.5,
            routing=RoutingParams(fusion_lambda=0.0, k_max=1),
        )
        engine = SimulationEngine(config)
        engine.state.ledger.soc[1] = 6.0
        engine._draw_sources = lambda: [2]
        captured = _spy_on_routing(engine)
        row = engine.run_episode()
        assert row.dropped_packets == 0
        assert [p.nodes for p in captured["ctx"].delivered] == [(2, 3, 0)]

    def test_overuse_is_relative_to_alive_mean(self):
        engine = SimulationEngine(_config())
        ctx = engine._begin()
        usage = engine.state.ledger.usage_count
        usage[:] = 4
        assert not engine.protocol._overused(ctx, 0)
        usage[0] = 9
        assert engine.protocol._overused(ctx, 0)

    def test_idle_decisions_never_penalised(self):
        engine = SimulationEngine(_config())
        engine.state.ledger.usage_count[:] = 50
        captured = _spy_on_routing(engine)
        engine.run_episode()
        idle = [d for d in captured["ctx"].decisions
                if d.outcome in (StepOutcome.SLEEP, StepOutcome.REQUEST_TRANSMITTER)]
        assert idle
        assert not any(d.overused for d in idle)
