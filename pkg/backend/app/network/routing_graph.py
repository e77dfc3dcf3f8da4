"""
Routing Graph

Energy-aware and spanning-tree edge weights, their linear fusion, pruning,
hop-bounded candidate path enumeration and minimum-variance path
selection.

Weights
-------
* MERA  : ``100 / soc_j`` for an edge into node ``j`` (SoC normalised to
  (0, 1] then inverted); ``inf`` when ``j`` is dead.  Directional.
* MST   : edge length for minimum-spanning-tree edges, length times
  ``off_tree_penalty`` for every other edge.  Symmetric.
* fused : ``lam * mera + (1 - lam) * mst``; ``inf`` wherever MERA is ``inf``.

The fused graph is a ``networkx.DiGraph`` over the relaying nodes (the
base station is excluded) with ``w_mera``, ``w_mst`` and ``w_final``
edge attributes.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Collection, Iterable, Mapping, Optional, Sequence

import networkx as nx
import numpy as np
import pandas as pd

from backend.app.engine.errors import ConfigurationError, NoRouteError
from backend.app.network.energy import FULL_CHARGE, EnergyLedger
from backend.app.network.topology import CommGraph

logger = logging.getLogger(__name__)

INF = math.inf

Edge = tuple[int, int]


# Types
@dataclass(frozen=True)
class CandidatePath:
    """Simple path from a source to a destination."""

    nodes: tuple[int, ...]
    weight: float = 0.0
    soc_variance: Optional[float] = None

    @property
    def hop_count(self) -> int:
        return len(self.nodes) - 1

    @property
    def source(self) -> int:
        return self.nodes[0]

    @property
    def destination(self) -> int:
        return self.nodes[-1]

    @property
    def relays(self) -> tuple[int, ...]:
        return self.nodes[1:-1]


@dataclass
class FusedGraph:
    """Directed fused-weight graph; treat as immutable once built."""

    graph: nx.DiGraph
    fusion_lambda: float
    base: Optional[CommGraph] = None
    pruned_edges: int = 0
    cost_cutoff: Optional[float] = None
    _to_go: dict[int, tuple[dict[int, float], dict[int, int]]] = field(
        default_factory=dict, repr=False,
    )

    def successors(self, node: int) -> list[int]:
        if node not in self.graph:
            return []
        return sorted(self.graph.successors(node))

    def has_edge(self, a: int, b: int) -> bool:
        return self.graph.has_edge(a, b)

    def weight(self, a: int, b: int) -> float:
        return self.graph[a][b]["w_final"]

    def finite_weights(self) -> np.ndarray:
        values = [w for _, _, w in self.graph.edges(data="w_final") if math.isfinite(w)]
        return np.asarray(values, dtype=float)

    def to_frame(self) -> pd.DataFrame:
        """Edge list with all three weights."""
        rows = [
            {
                "source": a,
                "target": b,
                "w_mera": data["w_mera"],
                "w_mst": data["w_mst"],
                "w_final": data["w_final"],
            }
            for a, b, data in sorted(self.graph.edges(data=True))
        ]
        return pd.DataFrame(rows, columns=["source", "target", "w_mera", "w_mst", "w_final"])

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)

    def cost_to_go(self, dst: int) -> tuple[dict[int, float], dict[int, int]]:
        """Exact remaining weight and hop count from every node to ``dst``."""
        cached = self._to_go.get(dst)
        if cached is not None:
            return cached
        reverse = self.graph.reverse(copy=False)

        def _finite(u, v, data):
            w = data["w_final"]
            return w if math.isfinite(w) else None

        weights = nx.single_source_dijkstra_path_length(reverse, dst, weight=_finite)
        finite_view = nx.subgraph_view(
            reverse, filter_edge=lambda u, v: math.isfinite(reverse[u][v]["w_final"]),
        )
        hops = nx.single_source_shortest_path_length(finite_view, dst)
        self._to_go[dst] = (dict(weights), dict(hops))
        return self._to_go[dst]


# Weightings
def _routable(graph: CommGraph) -> nx.Graph:
    return graph.sensor_subgraph()


def mera_weights(graph: CommGraph, ledger: EnergyLedger) -> dict[Edge, float]:
    """Inverse residual-energy weight for both directions of every edge."""
    weights: dict[Edge, float] = {}
    for a, b in _routable(graph).edges():
        for i, j in ((a, b), (b, a)):
            soc = float(ledger.soc[j])
            weights[(i, j)] = FULL_CHARGE / soc if ledger.alive[j] and soc > 0 else INF
    return weights


def spanning_tree(graph: CommGraph) -> nx.Graph:
    """Minimum spanning forest over edge length."""
    return nx.minimum_spanning_tree(_routable(graph), weight="distance", algorithm="kruskal")


def mst_weights(graph: CommGraph, off_tree_penalty: float = 3.0) -> dict[Edge, float]:
    """Edge length on the tree, penalised length elsewhere; both directions."""
    if off_tree_penalty < 1:
        raise ConfigurationError(f"off_tree_penalty must be >= 1, got {off_tree_penalty}")
    routable = _routable(graph)
    tree = spanning_tree(graph)
    weights: dict[Edge, float] = {}
    for a, b, d in routable.edges(data="distance"):
        w = d if tree.has_edge(a, b) else d * off_tree_penalty
        weights[(a, b)] = w
        weights[(b, a)] = w
    return weights


def fuse(
    w_mera: Mapping[Edge, float],
    w_mst: Mapping[Edge, float],
    fusion_lambda: float,
    base: Optional[CommGraph] = None,
) -> FusedGraph:
    """Linear fusion of the two weightings over their common edge set."""
    if not 0.0 <= fusion_lambda <= 1.0:
        raise ConfigurationError(f"fusion lambda must lie in [0, 1], got {fusion_lambda}")
    if set(w_mera) != set(w_mst):
        missing = set(w_mera) ^ set(w_mst)
        raise ValueError(f"weight maps cover different edges, e.g. {sorted(missing)[:3]}")

    graph = nx.DiGraph()
    if base is not None:
        graph.add_nodes_from(base.sensor_ids)
    for edge in sorted(w_mera):
        mera, mst = w_mera[edge], w_mst[edge]
        if math.isinf(mera):
            final = INF
        else:
            final = fusion_lambda * mera + (1.0 - fusion_lambda) * mst
        graph.add_edge(*edge, w_mera=mera, w_mst=mst, w_final=final)
    return FusedGraph(graph=graph, fusion_lambda=fusion_lambda, base=base)


def prune(
    fg: FusedGraph,
    cost_cutoff: float,
    ledger: Optional[EnergyLedger] = None,
) -> FusedGraph:
    """Copy of ``fg`` without infinite, over-cutoff or dead-node edges."""
    if not cost_cutoff > 0:
        raise ConfigurationError(f"cost_cutoff must be positive, got {cost_cutoff}")

    def _dead(node: int) -> bool:
        return ledger is not None and node < len(ledger) and not ledger.alive[node]

    graph = fg.graph.copy()
    doomed = [
        (a, b)
        for a, b, w in graph.edges(data="w_final")
        if not math.isfinite(w) or w > cost_cutoff or _dead(a) or _dead(b)
    ]
    graph.remove_edges_from(doomed)
    if doomed:
        logger.debug("Pruned %d of %d fused edges (cutoff %.3f).",
                     len(doomed), fg.graph.number_of_edges(), cost_cutoff)
    return FusedGraph(
        graph=graph,
        fusion_lambda=fg.fusion_lambda,
        base=fg.base,
        pruned_edges=fg.pruned_edges + len(doomed),
        cost_cutoff=cost_cutoff,
    )


def default_cost_cutoff(fg: FusedGraph, factor: float = 5.0) -> float:
    """``factor`` times the median finite fused weight."""
    finite = fg.finite_weights()
    if finite.size == 0:
        return INF
    return float(factor * np.median(finite))


def build_fused_graph(
    graph: CommGraph,
    ledger: EnergyLedger,
    fusion_lambda: float,
    off_tree_penalty: float = 3.0,
    cutoff_factor: float = 5.0,
) -> FusedGraph:
    """Weight, fuse and prune in one go."""
    fused = fuse(mera_weights(graph, ledger), mst_weights(graph, off_tree_penalty),
                 fusion_lambda, base=graph)
    cutoff = default_cost_cutoff(fused, cutoff_factor)
    if math.isinf(cutoff):
        cutoff = 1.0
    return prune(fused, cutoff, ledger)


def node_centrality(fg: FusedGraph, samples: Optional[int] = None, seed: Optional[int] = None) -> dict[int, float]:
    """Weighted betweenness centrality on the fused graph."""
    if fg.graph.number_of_nodes() == 0:
        return {}
    k = samples if samples is not None and samples < fg.graph.number_of_nodes() else None
    return nx.betweenness_centrality(fg.graph, k=k, weight="w_final", seed=seed)


# Hop bound
def max_hops(attenuation_pct: float, integrity_floor: float, hop_cap: int = 10) -> int:
    """Largest hop count whose cumulative attenuation keeps the integrity floor."""
    if not 0 < attenuation_pct < 100:
        raise ConfigurationError(f"attenuation must lie in (0, 100), got {attenuation_pct}")
    if not 0 < integrity_floor < 1:
        raise ConfigurationError(f"integrity floor must lie in (0, 1), got {integrity_floor}")
    keep = 1.0 - attenuation_pct / 100.0
    best = 0
    for h in range(1, hop_cap + 1):
        if keep ** h >= integrity_floor - 1e-12:
            best = h
        else:
            break
    if best < 1:
        raise ConfigurationError(
            f"a single hop at {attenuation_pct}% attenuation already breaks "
            f"the {integrity_floor:.2f} integrity floor"
        )
    return best


# Paths
def enumerate_paths(
    fg: FusedGraph,
    src: int,
    dst: int,
    h_max: int,
    k_max: int = 32,
    blocked: Optional[Collection[int]] = None,
) -> list[CandidatePath]:
    """Up to ``k_max`` cheapest simple paths of at most ``h_max`` hops.

    Best-first search over partial paths keyed by (weight so far + exact
    remaining weight, node tuple); complete paths pop out in
    (total weight, lexicographic) order.  Nodes in ``blocked`` never
    appear as relays; they are skipped during the search, so the
    ``k_max`` paths returned are the cheapest among the unblocked ones.
    """
    if src == dst:
        raise ValueError(f"source and destination are both {src}")
    graph = fg.graph
    if src not in graph or dst not in graph or h_max < 1 or k_max < 1:
        return []

    barred = frozenset(blocked or ()) - {dst}
    weight_to_go, hops_to_go = fg.cost_to_go(dst)
    if hops_to_go.get(src, h_max + 1) > h_max:
        return []

    heap: list[tuple[float, tuple[int, ...], float]] = [(weight_to_go[src], (src,), 0.0)]
    found: list[CandidatePath] = []
    while heap and len(found) < k_max:
        _, nodes, so_far = heapq.heappop(heap)
        tail = nodes[-1]
        if tail == dst:
            found.append(CandidatePath(nodes=nodes, weight=so_far))
            continue
        taken = len(nodes)  # hop count once the next node is appended
        for nxt in graph.successors(tail):
            if nxt in nodes or nxt in barred:
                continue
            remaining = hops_to_go.get(nxt)
            if remaining is None or taken + remaining > h_max:
                continue
            w = graph[tail][nxt]["w_final"]
            if not math.isfinite(w):
                continue
            g = so_far + w
            heapq.heappush(heap, (g + weight_to_go[nxt], nodes + (nxt,), g))
    return found


def path_soc_variance(path: CandidatePath | Sequence[int], ledger: EnergyLedger) -> float:
    """Sample variance (n-1) of SoC over every node on the path."""
    nodes = path.nodes if isinstance(path, CandidatePath) else tuple(path)
    if len(nodes) < 2:
        raise ValueError(f"path needs at least two nodes, got {nodes}")
    return float(np.var(ledger.soc[list(nodes)], ddof=1))


def _selection_key(path: CandidatePath) -> tuple:
    return (path.soc_variance, path.hop_count, path.nodes)


def rank_paths(paths: Iterable[CandidatePath], ledger: EnergyLedger) -> list[CandidatePath]:
    """Paths annotated with their variance, best first."""
    scored = [replace(p, soc_variance=path_soc_variance(p, ledger)) for p in paths]
    return sorted(scored, key=_selection_key)


def select_min_variance_path(paths: Sequence[CandidatePath], ledger: EnergyLedger) -> CandidatePath:
    """Minimum-variance path; ties by fewer hops, then node list."""
    if not paths:
        raise NoRouteError("no candidate path to choose from")
    return rank_paths(paths, ledger)[0]
