"""
Topology

Node deployment and the communication graph.

Nodes are placed uniformly at random inside the region from a seeded
``numpy`` generator (or at explicit coordinates).  Two nodes are
linked when their Euclidean distance is at most the coverage radius;
each edge carries its length as the ``distance`` attribute.

The base station is an extra node (role ``Sink``) placed at the sink
position.  It is part of the graph for connectivity checks but never
relays traffic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import networkx as nx
import numpy as np

from backend.app.engine.errors import ConfigurationError
from backend.app.schema.config_schema import Region, SimConfig
from backend.app.schema.network_schema import NodeRecord, NodeRole

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator]


@dataclass
class CommGraph:
    """Undirected communication graph plus node records."""

    graph: nx.Graph
    nodes: dict[int, NodeRecord]
    radius: float
    sink: Optional[int] = None
    warnings: list[str] = field(default_factory=list)

    @property
    def sensor_ids(self) -> list[int]:
        """Ids of nodes that can carry traffic (everything but the base station)."""
        return sorted(i for i, rec in self.nodes.items() if rec.role is not NodeRole.SINK)

    def position(self, node: int) -> np.ndarray:
        return np.asarray(self.nodes[node].position, dtype=float)

    def distance(self, a: int, b: int) -> float:
        if self.graph.has_edge(a, b):
            return self.graph[a][b]["distance"]
        return float(np.linalg.norm(self.position(a) - self.position(b)))

    def neighbors(self, node: int) -> list[int]:
        return sorted(self.graph.neighbors(node))

    def sensor_subgraph(self, alive: Optional[Iterable[int]] = None) -> nx.Graph:
        """View restricted to relaying nodes, optionally only the alive ones."""
        keep = set(self.sensor_ids)
        if alive is not None:
            keep &= set(alive)
        return self.graph.subgraph(keep)


# Deployment
def deploy_nodes(region: Region, n: int, seed: SeedLike) -> list[NodeRecord]:
    """Place ``n`` sensors uniformly at random inside ``region``."""
    if n < 2:
        raise ConfigurationError(f"a network needs at least two nodes, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    extents = np.asarray(region.extents, dtype=float)
    coords = rng.random((n, region.dimensions)) * extents
    return [
        NodeRecord(id=i, position=tuple(float(c) for c in row))
        for i, row in enumerate(coords)
    ]


def place_nodes(region: Region, positions: Sequence[Sequence[float]]) -> list[NodeRecord]:
    """Nodes at explicit coordinates, ids in list order."""
    records = []
    for i, pos in enumerate(positions):
        pos = tuple(float(p) for p in pos)
        if not region.contains(pos):
            raise ValueError(f"position {pos} of node {i} lies outside the region")
        records.append(NodeRecord(id=i, position=pos))
    return records


def sink_record(node_id: int, position: Sequence[float]) -> NodeRecord:
    return NodeRecord(id=node_id, position=tuple(float(p) for p in position), role=NodeRole.SINK)


# Graph construction
def build_comm_graph(
    nodes: Sequence[NodeRecord],
    radius: float,
    sink: Optional[int] = None,
) -> CommGraph:
    """Link every pair of nodes within ``radius`` (inclusive)."""
    if radius <= 0:
        raise ValueError(f"coverage radius must be positive, got {radius}")

    records = {rec.id: rec for rec in nodes}
    ids = sorted(records)
    graph = nx.Graph()
    graph.add_nodes_from(ids)

    if ids:
        coords = np.array([records[i].position for i in ids], dtype=float)
        diff = coords[:, None, :] - coords[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=-1))
        rows, cols = np.nonzero(np.triu(dist <= radius, k=1))
        graph.add_edges_from(
            (ids[a], ids[b], {"distance": float(dist[a, b])}) for a, b in zip(rows, cols)
        )

    comm = CommGraph(graph=graph, nodes=records, radius=radius, sink=sink)

    if sink is not None:
        if sink not in records:
            raise KeyError(f"sink id {sink} is not among the nodes")
        reachable = nx.node_connected_component(graph, sink)
        stranded = [i for i in comm.sensor_ids if i not in reachable]
        if stranded:
            msg = (
                f"{len(stranded)} of {len(comm.sensor_ids)} nodes have no multi-hop "
                f"path to the sink at radius {radius}"
            )
            logger.warning(msg)
            comm.warnings.append(msg)

    logger.info(
        "Communication graph: %d nodes, %d edges (r=%.3f).",
        graph.number_of_nodes(), graph.number_of_edges(), radius,
    )
    return comm


def build_from_config(config: SimConfig, rng: np.random.Generator) -> CommGraph:
    """Deploy sensors, append the base station and link everything."""
    if config.node_positions is not None:
        sensors = place_nodes(config.region, config.node_positions)
    else:
        sensors = deploy_nodes(config.region, config.node_count, rng)
    sink_id = config.node_count
    return build_comm_graph(
        [*sensors, sink_record(sink_id, config.resolved_sink)],
        config.coverage_radius,
        sink=sink_id,
    )


def hop_distances(graph: nx.Graph, target: int) -> dict[int, int]:
    """BFS hop count from every reachable node to ``target``."""
    if target not in graph:
        return {}
    return dict(nx.single_source_shortest_path_length(graph, target))