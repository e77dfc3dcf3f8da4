"""
Base Protocol
=============

Abstract base class for every routing protocol the engine can drive,
plus the run- and episode-level state they operate on.

Every protocol must be able to:
1. Prepare per-episode structures          (``prepare``)
2. Move this episode's packets             (``route_packets``)
3. Settle nodes that carried no traffic    (``settle_idle``)
4. Learn from the episode, if it learns    (``learn``)
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Optional, Union

import numpy as np

from backend.app.network.baselines import LeachCycle
from backend.app.network.energy import EnergyLedger, SocStats
from backend.app.network.routing_graph import CandidatePath, FusedGraph
from backend.app.network.topology import CommGraph
from backend.app.rl.agent import QStore, RoutingAction
from backend.app.rl.reward import StepOutcome
from backend.app.rl.state import NetworkView
from backend.app.schema.config_schema import SimConfig
from backend.app.schema.network_schema import NodeRole

logger = logging.getLogger(__name__)


@dataclass
class RunState:
    """Everything that persists from one episode to the next."""

    config: SimConfig
    rng: np.random.Generator
    comm: CommGraph
    ledger: EnergyLedger
    h_max: int
    q_stores: dict[Union[int, str], QStore] = field(default_factory=dict)
    episode: int = 0
    epsilon: float = 0.0
    transmitter: Optional[int] = None
    requests: set[int] = field(default_factory=set)
    prev_variance: float = 0.0
    arrival_rates: dict[int, float] = field(default_factory=dict)
    leach_cycle: LeachCycle = field(default_factory=LeachCycle)
    pruned_edges: int = 0
    no_route_events: int = 0

    @property
    def sensor_count(self) -> int:
        return len(self.ledger)


@dataclass
class Decision:
    """One logged agent decision, rewarded at episode end."""

    node: int
    state: Hashable
    action: RoutingAction
    outcome: StepOutcome
    overused: bool = False
    route: Optional[list[int]] = None


@dataclass(frozen=True)
class ChargeEvent:
    """One cost charged through the episode context, before clipping."""

    node: int
    cost: float
    category: str


@dataclass
class EpisodeContext:
    """Scratch state of a single episode."""

    run: RunState
    transmitter: Optional[int] = None
    fused: Optional[FusedGraph] = None
    centrality: dict[int, float] = field(default_factory=dict)
    centrality_threshold: float = 0.0
    roles: dict[int, NodeRole] = field(default_factory=dict)
    handled: Counter = field(default_factory=Counter)
    senders: Counter = field(default_factory=Counter)
    decision_counts: Counter = field(default_factory=Counter)
    decisions: list[Decision] = field(default_factory=list)
    active: set[int] = field(default_factory=set)
    delivered: list[CandidatePath] = field(default_factory=list)
    dropped: int = 0
    extra_delay_s: float = 0.0
    view: Optional[NetworkView] = None
    charges: list[ChargeEvent] = field(default_factory=list)

    @property
    def config(self) -> SimConfig:
        return self.run.config

    @property
    def ledger(self) -> EnergyLedger:
        return self.run.ledger

    def charge(self, node: int, cost: float, category: str) -> float:
        """Charge an alive node and log the event; dead nodes cost nothing."""
        if not self.ledger.is_alive(node):
            return 0.0
        self.charges.append(ChargeEvent(node, float(cost), category))
        return self.ledger.charge(node, cost)

    def log_decision(self, decision: Decision) -> None:
        self.decisions.append(decision)
        self.decision_counts[decision.node] += 1
        self.active.add(decision.node)

    def deliver(self, nodes: tuple[int, ...]) -> None:
        self.delivered.append(CandidatePath(nodes=nodes))
        for n in nodes[:-1]:
            if n < self.run.sensor_count:
                self.ledger.record_use(n)

    def transmitter_to_sink(self) -> bool:
        """Transmitter pushes the aggregate upstream once, if it holds data."""
        tx = self.transmitter
        if tx is None or not self.ledger.is_alive(tx):
            return False
        if not any(p.destination == tx for p in self.delivered):
            return False
        self.charge(tx, self.config.costs.sink_cost, "sink")
        self.active.add(tx)
        return True


class RoutingProtocol(ABC):
    """Common contract every routing protocol must honour."""

    #: whether the engine elects a transmitter each episode
    uses_transmitter: bool = True
    #: whether decisions carry mode overhead and Q-updates
    learns: bool = False

    def prepare(self, ctx: EpisodeContext) -> None:
        """Build per-episode structures before the election."""

    @abstractmethod
    def route_packets(self, ctx: EpisodeContext, sources: list[int]) -> None:
        """Sense at every source and move the packets."""

    def settle_idle(self, ctx: EpisodeContext) -> None:
        """Awake nodes pay idle cost, the rest sleep."""
        costs = ctx.config.costs
        for node in ctx.ledger.alive_ids():
            if node in ctx.active:
                ctx.charge(node, costs.idle_cost, "idle")
            else:
                ctx.charge(node, costs.sleep_cost, "sleep")

    def learn(self, ctx: EpisodeContext, stats: SocStats, node_failure: bool,
              variance_decreased: bool) -> float:
        """Reward and update agents; returns the episode's total reward."""
        return 0.0
