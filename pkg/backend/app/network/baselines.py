"""
Baseline Protocols

Route computations for the reference protocols:

* SPMH       - minimum-hop path over the alive nodes, energy-oblivious.
* SingleHop  - one direct transmission to the transmitter (or the sink).
* LEACH      - probabilistic cluster-head rotation, members one hop to
               their nearest head, heads straight to the sink.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import networkx as nx
import numpy as np

from backend.app.network.energy import EnergyLedger
from backend.app.network.routing_graph import CandidatePath
from backend.app.network.topology import CommGraph
from backend.app.schema.network_schema import NodeRecord

logger = logging.getLogger(__name__)


# SPMH
def spmh_route(
    graph: CommGraph,
    src: int,
    dst: int,
    alive: Optional[Iterable[int]] = None,
) -> Optional[CandidatePath]:
    """Lexicographically smallest minimum-hop path, or ``None``."""
    if src == dst:
        return CandidatePath(nodes=(src,))
    sub = graph.sensor_subgraph(alive)
    if src not in sub or dst not in sub:
        return None
    depth = nx.single_source_shortest_path_length(sub, dst)
    if src not in depth:
        return None
    nodes = [src]
    current = src
    while current != dst:
        # smallest-id neighbour one step closer keeps the path lexicographically minimal
        current = min(n for n in sub.neighbors(current) if depth.get(n) == depth[current] - 1)
        nodes.append(current)
    return CandidatePath(nodes=tuple(nodes))


# SingleHop
@dataclass(frozen=True)
class DirectLink:
    path: CandidatePath
    cost_multiplier: float
    in_range: bool


def single_hop_route(
    graph: CommGraph,
    src: int,
    target: int,
    strict_range: bool = False,
) -> Optional[DirectLink]:
    """Direct link from ``src`` to ``target``.

    Beyond the coverage radius the attempt costs ``d / r`` times the
    long-range charge, or is refused when ``strict_range`` is set.
    """
    if src == target:
        return DirectLink(CandidatePath(nodes=(src,)), 1.0, True)
    d = graph.distance(src, target)
    if d <= graph.radius:
        return DirectLink(CandidatePath(nodes=(src, target)), 1.0, True)
    if strict_range:
        return None
    return DirectLink(CandidatePath(nodes=(src, target)), d / graph.radius, False)


# LEACH
@dataclass
class LeachCycle:
    """Nodes that already led a cluster in the current cycle."""

    served: set[int] = field(default_factory=set)


@dataclass(frozen=True)
class LeachRound:
    round: int
    cluster_heads: tuple[int, ...]
    assignment: dict[int, int]
    reclustered: bool

    def members_of(self, head: int) -> list[int]:
        return sorted(m for m, h in self.assignment.items() if h == head and m != head)


def cycle_length(p: float) -> int:
    return max(int(round(1.0 / p)), 1)


def leach_threshold(p: float, round_idx: int, served: bool) -> float:
    if served:
        return 0.0
    return p / (1.0 - p * (round_idx % cycle_length(p)))


def leach_round(
    nodes: Sequence[NodeRecord],
    ledger: EnergyLedger,
    round_idx: int,
    p: float,
    rng: np.random.Generator,
    cycle: Optional[LeachCycle] = None,
) -> LeachRound:
    """Elect cluster heads for one round and attach members to the nearest one."""
    if not 0 < p < 1:
        raise ValueError(f"cluster-head probability must lie in (0, 1), got {p}")
    cycle = cycle if cycle is not None else LeachCycle()
    reclustered = round_idx % cycle_length(p) == 0
    if reclustered:
        cycle.served.clear()

    alive = [rec for rec in sorted(nodes, key=lambda r: r.id) if ledger.is_alive(rec.id)]
    if not alive:
        return LeachRound(round_idx, (), {}, reclustered)

    draws = rng.random(len(alive))
    heads = [
        rec.id for rec, u in zip(alive, draws)
        if u < leach_threshold(p, round_idx, rec.id in cycle.served)
    ]
    if not heads:
        pool = [rec for rec in alive if rec.id not in cycle.served] or alive
        forced = min(pool, key=lambda r: (-ledger.soc[r.id], r.id)).id
        logger.debug("LEACH round %d elected no head; forcing node %d.", round_idx, forced)
        heads = [forced]
    cycle.served.update(heads)

    positions = {rec.id: rec.position for rec in nodes}
    head_pos = np.array([positions[h] for h in heads], dtype=float)
    assignment: dict[int, int] = {}
    for rec in alive:
        if rec.id in heads:
            assignment[rec.id] = rec.id
            continue
        dists = np.linalg.norm(head_pos - np.asarray(rec.position, dtype=float), axis=1)
        assignment[rec.id] = heads[int(np.argmin(dists))]
    return LeachRound(round_idx, tuple(heads), assignment, reclustered)

