"""
Routing Protocols

Concrete strategies driven by the simulation engine.

    MarlProtocol       Q-learning agents routing over the pruned fused graph
    SpmhProtocol       minimum-hop multi-hop routing, energy-oblivious
    SingleHopProtocol  one direct transmission per packet
    LeachProtocol      rotating cluster heads, two-level routing
"""

from __future__ import annotations

import logging

import numpy as np

from backend.app.engine.base_protocol import Decision, EpisodeContext, RoutingProtocol
from backend.app.engine.errors import SimulationLogicError
from backend.app.network.baselines import leach_round, single_hop_route, spmh_route
from backend.app.network.energy import SocStats
from backend.app.network.routing_graph import (
    build_fused_graph,
    enumerate_paths,
    node_centrality,
    rank_paths,
)
from backend.app.rl.agent import (
    DROP,
    REQUEST_TRANSMITTER,
    SLEEP,
    ActionKind,
    GLOBAL_OWNER,
    QStore,
    RoutingAction,
    feasible_actions,
    q_update,
    request_eligible,
    select_action,
)
from backend.app.rl.reward import StepEvents, StepOutcome, health_reward, reward_breakdown
from backend.app.rl.state import observe_state
from backend.app.schema.config_schema import ComputeMode, Protocol, SimConfig, SingleHopTarget
from backend.app.schema.network_schema import NodeRole

logger = logging.getLogger(__name__)


def _sense(ctx: EpisodeContext, source: int) -> None:
    ctx.charge(source, ctx.config.costs.sense_cost, "sense")
    ctx.active.add(source)


def _forward(ctx: EpisodeContext, sender: int, receiver: int, cost: float) -> None:
    ctx.charge(sender, cost, "hop")
    ctx.senders[sender] += 1
    ctx.handled[receiver] += 1
    ctx.active.add(sender)
    if receiver != ctx.transmitter and receiver in ctx.roles:
        ctx.roles[receiver] = NodeRole.FORWARDER


# MARL
class MarlProtocol(RoutingProtocol):
    """Multi-agent Q-learning over MERA-MST fused weights."""

    learns = True

    def store_for(self, ctx: EpisodeContext, node: int) -> QStore:
        owner = GLOBAL_OWNER if ctx.config.mode is ComputeMode.CLOUD else node
        stores = ctx.run.q_stores
        if owner not in stores:
            stores[owner] = QStore(owner)
        return stores[owner]

    def prepare(self, ctx: EpisodeContext) -> None:
        routing = ctx.config.routing
        fused = build_fused_graph(
            ctx.run.comm, ctx.ledger, routing.fusion_lambda,
            routing.off_tree_penalty, routing.cost_cutoff_factor,
        )
        ctx.fused = fused
        ctx.run.pruned_edges += fused.pruned_edges

        seed = ctx.config.seed + ctx.run.episode if routing.centrality_samples else None
        ctx.centrality = node_centrality(fused, routing.centrality_samples, seed)
        values = list(ctx.centrality.values())
        ctx.centrality_threshold = (
            float(np.percentile(values, ctx.config.rewards.centrality_percentile)) if values else 0.0
        )

    # Energy guard

    def _can_send(self, ctx: EpisodeContext, node: int, cost: float) -> bool:
        ledger = ctx.ledger
        if not ledger.is_alive(node):
            return False
        if not ctx.config.routing.energy_guard:
            return True
        return ledger.soc[node] - cost >= ctx.config.routing.critical_soc

    def _overused(self, ctx: EpisodeContext, node: int) -> bool:
        """Used at least the threshold and disproportionately against the alive mean."""
        rewards = ctx.config.rewards
        ledger = ctx.ledger
        used = int(ledger.usage_count[node])
        if used < rewards.overuse_threshold:
            return False
        alive = ledger.alive_ids()
        mean = float(ledger.usage_count[alive].mean()) if alive else 0.0
        return used >= rewards.overuse_ratio * mean

    def _starved_relays(self, ctx: EpisodeContext, cost: float) -> set[int]:
        return {n for n in ctx.fused.graph.nodes if not self._can_send(ctx, n, cost)}

    # Routing

    def route_packets(self, ctx: EpisodeContext, sources: list[int]) -> None:
        costs = ctx.config.costs
        tx = ctx.transmitter
        for source in sources:
            if not ctx.ledger.is_alive(source):
                continue
            if source == tx:
                _sense(ctx, source)
                ctx.deliver((source,))
                continue
            if not self._can_send(ctx, source, costs.sense_cost + costs.hop_cost):
                logger.debug("Node %d skips sensing on low energy.", source)
                continue
            _sense(ctx, source)
            self._route_one(ctx, source)

        state = observe_state(tx, ctx.view).key() if ctx.ledger.is_alive(tx) else None
        if ctx.transmitter_to_sink():
            ctx.log_decision(Decision(
                node=tx,
                state=state,
                action=RoutingAction.transmit_to(ctx.run.comm.sink),
                outcome=StepOutcome.SINK_DELIVERY,
            ))

    def _route_one(self, ctx: EpisodeContext, source: int) -> None:
        config = ctx.config
        hop_cost = config.costs.hop_cost
        tx = ctx.transmitter
        fused = ctx.fused
        candidates = enumerate_paths(
            fused, source, tx, ctx.run.h_max, config.routing.k_max,
            blocked=self._starved_relays(ctx, hop_cost),
        )
        if not candidates:
            ctx.run.no_route_events += 1
            logger.debug("No route from %d to transmitter %d.", source, tx)

        route = [source]
        holder = source
        while holder != tx:
            depth = len(route)
            prefix = tuple(route)
            live = [
                c for c in candidates
                if c.nodes[:depth] == prefix
                and all(self._can_send(ctx, n, hop_cost) for n in c.nodes[depth:-1])
            ]
            state = observe_state(holder, ctx.view).key()
            overused = self._overused(ctx, holder)

            if not live or not self._can_send(ctx, holder, hop_cost):
                action = DROP
            else:
                order: dict[int, int] = {}
                for rank, path in enumerate(rank_paths(live, ctx.ledger)):
                    order.setdefault(path.nodes[depth], rank)
                options = [RoutingAction.transmit_to(j) for j in order]
                action = select_action(
                    self.store_for(ctx, holder), state, options, ctx.run.epsilon, ctx.run.rng,
                    tolerance=config.rl.q_tie_tolerance,
                    preference=lambda a: (order.get(a.target, len(order)),),
                )

            if action.kind is ActionKind.DROP:
                ctx.log_decision(Decision(holder, state, action, StepOutcome.DROP, overused, route))
                ctx.dropped += 1
                return

            nxt = action.target
            if not fused.has_edge(holder, nxt):
                raise SimulationLogicError(f"node {holder} chose {nxt}, which is not a fused-graph neighbour")
            outcome = StepOutcome.SENSE_AND_SEND if holder == source else StepOutcome.FORWARD
            ctx.log_decision(Decision(holder, state, action, outcome, overused, route))
            _forward(ctx, holder, nxt, hop_cost)
            route.append(nxt)
            holder = nxt

        ctx.deliver(tuple(route))

    def settle_idle(self, ctx: EpisodeContext) -> None:
        costs = ctx.config.costs
        for node in ctx.ledger.alive_ids():
            if node in ctx.active:
                ctx.charge(node, costs.idle_cost, "idle")
                continue
            options = [SLEEP]
            if request_eligible(node, ctx.ledger):
                options.append(REQUEST_TRANSMITTER)
            state = observe_state(node, ctx.view).key()
            action = select_action(self.store_for(ctx, node), state, options,
                                   ctx.run.epsilon, ctx.run.rng)
            if action.kind is ActionKind.REQUEST_TRANSMITTER:
                ctx.run.requests.add(node)
                ctx.charge(node, costs.idle_cost, "idle")
                outcome = StepOutcome.REQUEST_TRANSMITTER
            else:
                ctx.charge(node, costs.sleep_cost, "sleep")
                outcome = StepOutcome.SLEEP
            ctx.log_decision(Decision(node, state, action, outcome))

    # Learning

    def _avoided_hotspot(self, ctx: EpisodeContext, decision: Decision) -> bool:
        if decision.action.kind is not ActionKind.TRANSMIT_TO or decision.route is None:
            return False
        if decision.outcome is StepOutcome.SINK_DELIVERY:
            return False
        relays = [n for n in decision.route[1:] if n != ctx.transmitter]
        if not relays:
            return True
        return max(ctx.centrality.get(n, 0.0) for n in relays) < ctx.centrality_threshold

    def learn(self, ctx: EpisodeContext, stats: SocStats, node_failure: bool,
              variance_decreased: bool) -> float:
        config = ctx.config
        ledger = ctx.ledger
        total = health_reward(node_failure, variance_decreased, stats.mean, config.rewards)
        next_cache: dict[int, tuple] = {}
        for decision in ctx.decisions:
            parts = reward_breakdown(
                StepEvents(
                    outcomes=(decision.outcome,),
                    avoided_hotspot=self._avoided_hotspot(ctx, decision),
                    overused=decision.overused,
                    node_failure=node_failure,
                    variance_decreased=variance_decreased,
                    mean_soc=stats.mean,
                ),
                config.rewards,
            )
            reward = parts.total
            total += parts.local

            node = decision.node
            if node not in next_cache:
                if ledger.is_alive(node):
                    next_cache[node] = (
                        observe_state(node, ctx.view).key(),
                        feasible_actions(node, ctx.fused, ledger),
                    )
                else:
                    next_cache[node] = (None, [])
            next_state, next_actions = next_cache[node]
            q_update(self.store_for(ctx, node), decision.state, decision.action, reward,
                     next_state, next_actions, config.rl)

        bound = config.rewards.max_abs_reward / (1.0 - config.rl.gamma) + 1e-9
        for store in ctx.run.q_stores.values():
            if store.max_abs() > bound:
                raise SimulationLogicError(
                    f"Q-values of {store.owner} exceed the bound {bound:.3f}"
                )
        return total


# SPMH
class SpmhProtocol(RoutingProtocol):
    """Fewest hops to the transmitter, ignoring energy."""

    def route_packets(self, ctx: EpisodeContext, sources: list[int]) -> None:
        hop_cost = ctx.config.costs.hop_cost
        tx = ctx.transmitter
        for source in sources:
            if not ctx.ledger.is_alive(source):
                continue
            _sense(ctx, source)
            path = spmh_route(ctx.run.comm, source, tx, ctx.ledger.alive_ids())
            if path is None or path.hop_count > ctx.run.h_max:
                ctx.run.no_route_events += 1
                ctx.dropped += 1
                continue
            for sender, receiver in zip(path.nodes, path.nodes[1:]):
                _forward(ctx, sender, receiver, hop_cost)
            ctx.deliver(path.nodes)
        ctx.transmitter_to_sink()


# SingleHop
class SingleHopProtocol(RoutingProtocol):
    """Every source transmits once, straight to its target."""

    def route_packets(self, ctx: EpisodeContext, sources: list[int]) -> None:
        config = ctx.config
        costs = config.costs
        to_sink = config.single_hop_target is SingleHopTarget.SINK
        target = ctx.run.comm.sink if to_sink else ctx.transmitter
        for source in sources:
            if not ctx.ledger.is_alive(source):
                continue
            _sense(ctx, source)
            link = single_hop_route(ctx.run.comm, source, target, config.strict_range)
            if link is None:
                ctx.dropped += 1
                continue
            if link.path.hop_count == 1:
                if to_sink:
                    cost = costs.sink_cost * max(link.cost_multiplier, 1.0)
                elif link.in_range:
                    cost = costs.hop_cost
                else:
                    cost = costs.sink_cost * link.cost_multiplier
                _forward(ctx, source, target, cost)
            ctx.deliver(link.path.nodes)
        if not to_sink:
            ctx.transmitter_to_sink()


# LEACH
class LeachProtocol(RoutingProtocol):
    """Cluster heads rotate each round and relay their members to the sink."""

    uses_transmitter = False

    def route_packets(self, ctx: EpisodeContext, sources: list[int]) -> None:
        config = ctx.config
        costs = config.costs
        comm = ctx.run.comm
        sensors = [comm.nodes[i] for i in comm.sensor_ids]
        rnd = leach_round(sensors, ctx.ledger, ctx.run.episode, config.leach.ch_probability,
                          ctx.run.rng, ctx.run.leach_cycle)
        for head in rnd.cluster_heads:
            ctx.roles[head] = NodeRole.FORWARDER
        ctx.extra_delay_s = config.leach.setup_delay_s + (
            config.leach.recluster_delay_s if rnd.reclustered else 0.0
        )

        pending: dict[int, list[tuple[int, ...]]] = {}
        for source in sources:
            if not ctx.ledger.is_alive(source):
                continue
            _sense(ctx, source)
            head = rnd.assignment.get(source)
            if head is None:
                ctx.dropped += 1
                continue
            if head == source:
                pending.setdefault(head, []).append((source,))
                continue
            _forward(ctx, source, head, costs.hop_cost)
            pending.setdefault(head, []).append((source, head))

        for head in sorted(pending):
            packets = pending[head]
            if not ctx.ledger.is_alive(head):
                ctx.dropped += len(packets)
                continue
            ctx.charge(head, costs.sink_cost, "sink")
            ctx.senders[head] += len(packets)
            ctx.active.add(head)
            for prefix in packets:
                ctx.deliver(prefix + (comm.sink,))


_PROTOCOLS: dict[Protocol, type[RoutingProtocol]] = {
    Protocol.MARL: MarlProtocol,
    Protocol.SPMH: SpmhProtocol,
    Protocol.SINGLE_HOP: SingleHopProtocol,
    Protocol.LEACH: LeachProtocol,
}


def build_protocol(config: SimConfig) -> RoutingProtocol:
    return _PROTOCOLS[config.protocol]()
