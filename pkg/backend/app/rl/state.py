"""
State Observation

Discretised local view of a node used as the Q-table key:

    soc_level     SoC band of the node itself          (5)
    dist_sink     distance to the sink / diagonal      (5)
    dist_tx       distance to the transmitter          (5)
    queue         packets handled / buffer capacity    (3)
    hops_est      BFS hops to the sink                 (4)
    hotspot       recent route usage                   (3)
    neigh_energy  SoC band of the alive-neighbour mean (5)
    role          Sensor / Forwarder / Transmitter / Sink
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from backend.app.network.energy import EnergyLedger, SocLevel, discretize_soc
from backend.app.network.topology import CommGraph
from backend.app.schema.network_schema import ROLE_INDEX, NodeRole

DISTANCE_BINS = 5
QUEUE_BINS = 3
HOP_BINS = 4
HOTSPOT_BINS = 3


@dataclass(frozen=True)
class StateVector:
    soc_level: SocLevel
    dist_sink: int
    dist_tx: int
    queue: int
    hops_est: int
    hotspot: int
    neigh_energy: SocLevel
    role: NodeRole

    def key(self) -> tuple[int, ...]:
        """Plain-int tuple, stable across processes and files."""
        return (
            int(self.soc_level), self.dist_sink, self.dist_tx, self.queue,
            self.hops_est, self.hotspot, int(self.neigh_energy), ROLE_INDEX[self.role],
        )


def state_space_size() -> int:
    return (
        len(SocLevel) * DISTANCE_BINS * DISTANCE_BINS * QUEUE_BINS
        * HOP_BINS * HOTSPOT_BINS * len(SocLevel) * len(NodeRole)
    )


# Binning
def distance_bin(normalized: float) -> int:
    return min(max(int(normalized * DISTANCE_BINS), 0), DISTANCE_BINS - 1)


def queue_bin(fill: float) -> int:
    return min(max(int(fill * QUEUE_BINS), 0), QUEUE_BINS - 1)


def hops_bin(hops: Optional[int]) -> int:
    if hops is None or hops >= 4:
        return 3
    return max(hops, 1) - 1


def hotspot_bin(usage: int) -> int:
    if usage <= 0:
        return 0
    return 1 if usage <= 3 else 2


# Observation
@dataclass(frozen=True)
class NetworkView:
    """Read-only inputs needed to observe any node."""

    comm: CommGraph
    ledger: EnergyLedger
    diagonal: float
    transmitter: Optional[int] = None
    roles: Mapping[int, NodeRole] = field(default_factory=dict)
    handled: Mapping[int, int] = field(default_factory=dict)
    sink_hops: Mapping[int, int] = field(default_factory=dict)
    buffer_capacity: int = 10


def observe_state(node: int, env: NetworkView) -> StateVector:
    """Discretised state of an alive node."""
    ledger = env.ledger
    if not ledger.is_alive(node):
        raise ValueError(f"cannot observe dead node {node}")

    pos = env.comm.position(node)
    if env.comm.sink is not None:
        d_sink = float(np.linalg.norm(pos - env.comm.position(env.comm.sink))) / env.diagonal
    else:
        d_sink = 1.0
    if env.transmitter is not None:
        d_tx = float(np.linalg.norm(pos - env.comm.position(env.transmitter))) / env.diagonal
    else:
        d_tx = 1.0

    neighbours = [
        n for n in env.comm.neighbors(node)
        if n < len(ledger) and ledger.is_alive(n)
    ]
    if neighbours:
        neigh = discretize_soc(float(ledger.soc[neighbours].mean()))
    else:
        neigh = SocLevel.VERY_LOW

    return StateVector(
        soc_level=discretize_soc(float(ledger.soc[node])),
        dist_sink=distance_bin(d_sink),
        dist_tx=distance_bin(d_tx),
        queue=queue_bin(env.handled.get(node, 0) / env.buffer_capacity),
        hops_est=hops_bin(env.sink_hops.get(node)),
        hotspot=hotspot_bin(int(ledger.usage_count[node])),
        neigh_energy=neigh,
        role=env.roles.get(node, NodeRole.SENSOR),
    )
