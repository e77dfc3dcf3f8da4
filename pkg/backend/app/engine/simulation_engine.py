"""
Simulation Engine

Runs the episode loop for one ``SimConfig``:

    1. refresh routing structures (fused graph, centrality)
    2. elect the transmitter
    3. draw this episode's sources
    4. route packets, hop by hop
    5. settle idle nodes and mode overhead
    6. reward and update agents
    7. decay exploration, audit energy, record metrics

A run owns a single ``numpy`` generator seeded from the config, consumed
in a fixed order (deployment, sources, exploration, LEACH draws), so a
(config, seed) pair reproduces its report exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from collections import defaultdict
from typing import Callable, Iterable, Mapping, Optional

import numpy as np

from backend.app.engine.base_protocol import ChargeEvent, EpisodeContext, RunState
from backend.app.engine.errors import NetworkDeadError, SimulationLogicError
from backend.app.engine.protocols import build_protocol
from backend.app.network.delay import decision_delay, end_to_end_delay
from backend.app.network.energy import EnergyLedger, soc_stats
from backend.app.network.routing_graph import max_hops
from backend.app.network.topology import build_from_config, hop_distances
from backend.app.rl.state import NetworkView
from backend.app.schema.config_schema import ComputeMode, SimConfig
from backend.app.schema.metrics_schema import EpisodeMetrics, RunReport, RunStatus
from backend.app.schema.network_schema import NodeRole

logger = logging.getLogger(__name__)

ELECTION_PERCENTILE = 70.0


# Election
def elect_transmitter(ledger: EnergyLedger, requests: set[int]) -> int:
    """Highest-SoC eligible requester, else the highest-SoC alive node.

    A requester is eligible when alive and at or above the 70th
    percentile of alive SoC.  Ties go to the lower id.
    """
    alive = ledger.alive_ids()
    if not alive:
        raise NetworkDeadError("no alive node left to elect")
    threshold = ledger.percentile_alive(ELECTION_PERCENTILE)
    eligible = [n for n in sorted(requests) if ledger.is_alive(n) and ledger.soc[n] >= threshold]
    pool = eligible or alive
    return min(pool, key=lambda n: (-ledger.soc[n], n))


# Mode overhead
@dataclass(frozen=True)
class ModeOverhead:
    report_deductions: int
    compute_deductions: int
    decision_delay_s: float


def cloud_step_overhead(
    ledger: EnergyLedger,
    config: SimConfig,
    decisions: Optional[Mapping[int, int]] = None,
    charge: Optional[Callable[[int, float, str], float]] = None,
) -> ModeOverhead:
    """Charge the per-episode cost of where decisions are computed.

    Cloud: every alive node pays one state report.  Local: every node
    pays the compute cost once per decision it made.  ``charge`` defaults
    to the ledger itself; the engine passes the episode context's.
    """
    if charge is None:
        def charge(node: int, cost: float, category: str) -> float:
            return ledger.charge(node, cost)
    costs = config.costs
    per_decision = decision_delay(config.delay, config.mode)
    if config.mode is ComputeMode.CLOUD:
        alive = ledger.alive_ids()
        for node in alive:
            charge(node, costs.report_cost, "report")
        return ModeOverhead(len(alive), 0, per_decision)

    count = 0
    for node, made in sorted((decisions or {}).items()):
        if made and ledger.is_alive(node):
            charge(node, costs.local_compute_cost * made, "compute")
            count += made
    return ModeOverhead(0, count, per_decision)


# Audit
def replay_charges(
    start_soc: np.ndarray,
    start_alive: np.ndarray,
    events: Iterable[ChargeEvent],
) -> tuple[np.ndarray, np.ndarray, dict[str, float]]:
    """Apply logged charges to a copy of the starting state.

    Each cost is clipped at the node's remaining SoC and a node that
    reaches zero stays dead; charging it again is an error.  Returns the
    final SoC, alive flags and the energy removed per category.
    """
    soc = np.array(start_soc, dtype=float)
    alive = np.array(start_alive, dtype=bool)
    by_category: dict[str, float] = defaultdict(float)
    for event in events:
        if not alive[event.node]:
            raise SimulationLogicError(f"{event.category} cost charged to dead node {event.node}")
        taken = min(event.cost, soc[event.node])
        soc[event.node] -= taken
        by_category[event.category] += taken
        if soc[event.node] <= 0.0:
            alive[event.node] = False
    return soc, alive, {k: float(v) for k, v in by_category.items()}


def audit_energy(
    episode: int,
    start_soc: np.ndarray,
    start_alive: np.ndarray,
    events: Iterable[ChargeEvent],
    ledger: EnergyLedger,
) -> dict[str, float]:
    """Check the ledger against the episode's logged charges."""
    soc, alive, by_category = replay_charges(start_soc, start_alive, events)
    drift = np.flatnonzero(~np.isclose(soc, ledger.soc, rtol=0.0, atol=1e-9))
    if drift.size:
        node = int(drift[0])
        raise SimulationLogicError(
            f"episode {episode}: node {node} holds {ledger.soc[node]:.9f} SoC "
            f"but its logged charges leave {soc[node]:.9f}"
        )
    if not np.array_equal(alive, ledger.alive):
        node = int(np.flatnonzero(alive != ledger.alive)[0])
        raise SimulationLogicError(f"episode {episode}: alive flag of node {node} disagrees with its charges")
    return by_category


# Engine
class SimulationEngine:
    """Drives one run from deployment to report."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.protocol = build_protocol(config)
        rng = np.random.default_rng(config.seed)
        comm = build_from_config(config, rng)
        routing = config.routing
        self.state = RunState(
            config=config,
            rng=rng,
            comm=comm,
            ledger=EnergyLedger(config.node_count),
            h_max=max_hops(routing.attenuation_pct, routing.integrity_floor, routing.hop_cap),
            epsilon=config.rl.epsilon,
        )
        self.metrics: list[EpisodeMetrics] = []
        self.snapshots: dict[int, list[float]] = {}
        self.status = RunStatus.COMPLETED
        self._diagonal = config.region.diagonal

    # Episode

    def _begin(self) -> EpisodeContext:
        state = self.state
        ledger = state.ledger
        ctx = EpisodeContext(run=state)
        ctx.roles = {n: NodeRole.SENSOR for n in ledger.alive_ids()}

        self.protocol.prepare(ctx)

        if self.protocol.uses_transmitter:
            tx = elect_transmitter(ledger, state.requests)
            state.requests.clear()
            state.transmitter = tx
            ctx.transmitter = tx
            ctx.roles[tx] = NodeRole.TRANSMITTER

        comm = state.comm
        reachable = comm.graph.subgraph([*ledger.alive_ids(), comm.sink])
        ctx.view = NetworkView(
            comm=comm,
            ledger=ledger,
            diagonal=self._diagonal,
            transmitter=ctx.transmitter,
            roles=ctx.roles,
            handled=ctx.handled,
            sink_hops=hop_distances(reachable, comm.sink),
            buffer_capacity=self.config.buffer_capacity,
        )
        return ctx

    def _draw_sources(self) -> list[int]:
        alive = self.state.ledger.alive_ids()
        k = min(self.config.sources_per_episode, len(alive))
        if k == 0:
            return []
        return [int(n) for n in self.state.rng.choice(alive, size=k, replace=False)]

    def run_episode(self) -> EpisodeMetrics:
        """Play one episode and return its metrics."""
        state = self.state
        config = self.config
        ledger = state.ledger
        if not ledger.alive_ids():
            raise NetworkDeadError("cannot start an episode on a dead network")

        total_before = ledger.total()
        start_soc = ledger.soc.copy()
        start_alive = ledger.alive.copy()
        alive_before = int(ledger.alive.sum())
        rates = dict(state.arrival_rates)

        ctx = self._begin()
        self.protocol.route_packets(ctx, self._draw_sources())
        self.protocol.settle_idle(ctx)

        per_decision = 0.0
        if self.protocol.learns:
            overhead = cloud_step_overhead(ledger, config, ctx.decision_counts, ctx.charge)
            per_decision = overhead.decision_delay_s

        stats = soc_stats(ledger)
        node_failure = stats.alive_count < alive_before
        variance_decreased = stats.variance < state.prev_variance
        total_reward = self.protocol.learn(ctx, stats, node_failure, variance_decreased)

        by_category = audit_energy(state.episode, start_soc, start_alive, ctx.charges, ledger)
        spent = total_before - ledger.total()

        delays = [
            end_to_end_delay(path, config.delay, config.mode, rates,
                             include_decision=self.protocol.learns) + ctx.extra_delay_s
            for path in ctx.delivered
        ]
        finite = [d * 1000.0 for d in delays if math.isfinite(d)]
        unstable = len(delays) - len(finite)
        if unstable:
            logger.warning("Episode %d: %d packets crossed an unstable queue.", state.episode, unstable)

        metrics = EpisodeMetrics(
            episode=state.episode,
            mean_soc=stats.mean,
            var_soc=stats.variance,
            min_soc=stats.minimum,
            max_soc=stats.maximum,
            alive=stats.alive_count,
            total_reward=total_reward,
            mean_delay_ms=float(np.mean(finite)) if finite else None,
            min_delay_ms=min(finite) if finite else None,
            max_delay_ms=max(finite) if finite else None,
            dropped_packets=ctx.dropped,
            delivered_packets=len(ctx.delivered),
            unstable_packets=unstable,
            transmitter_id=ctx.transmitter,
            decision_delay_ms=per_decision * 1000.0,
            energy_spent=spent,
            energy_by_category=by_category,
        )

        # carry-over
        state.prev_variance = stats.variance
        state.epsilon = max(config.rl.epsilon_floor, state.epsilon * config.rl.epsilon_decay)
        state.arrival_rates = {
            n: count / config.delay.episode_duration_s for n, count in ctx.senders.items()
        }
        if (state.episode + 1) % config.routing.usage_decay_period == 0:
            ledger.decay_usage()
        if state.episode in config.snapshot_episodes:
            self.snapshots[state.episode] = [float(x) for x in ledger.soc]
        state.episode += 1

        logger.debug(
            "Episode %d: mean=%.2f var=%.2f alive=%d reward=%.1f delivered=%d dropped=%d",
            metrics.episode, metrics.mean_soc, metrics.var_soc, metrics.alive,
            metrics.total_reward, metrics.delivered_packets, metrics.dropped_packets,
        )
        return metrics

    # Run

    def run(self) -> "SimulationEngine":
        """Play every episode, stopping early if the network dies."""
        config = self.config
        logger.info(
            "Running %s: protocol=%s mode=%s nodes=%d episodes=%d seed=%d",
            config.name, config.protocol.value, config.mode.value,
            config.node_count, config.episodes, config.seed,
        )
        while self.state.episode < config.episodes:
            metrics = self.run_episode()
            self.metrics.append(metrics)
            if metrics.alive == 0:
                self.status = RunStatus.NETWORK_DEAD
                logger.warning("Network dead after episode %d.", metrics.episode)
                break
        return self

    @property
    def report(self) -> RunReport:
        ledger = self.state.ledger
        last = self.metrics[-1] if self.metrics else None
        logger.info(
            "Finished %s: status=%s final mean SoC=%.2f alive=%d",
            self.config.name, self.status.value,
            last.mean_soc if last else 100.0, last.alive if last else len(ledger),
        )
        return RunReport(
            config=self.config,
            status=self.status,
            max_hops=self.state.h_max,
            episodes=list(self.metrics),
            final_soc=[float(x) for x in ledger.soc],
            final_alive=[bool(x) for x in ledger.alive],
            soc_snapshots=dict(self.snapshots),
            pruned_edges=self.state.pruned_edges,
            no_route_events=self.state.no_route_events,
            warnings=list(self.state.comm.warnings),
        )


def run_simulation(config: SimConfig) -> RunReport:
    """Run ``config`` to completion and return its report."""
    return SimulationEngine(config).run().report
