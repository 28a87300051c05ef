"""
Step 3: centralized PRB allocation among APs by graph coloring.

APs closer than 2 * d_tilde potentially interfere and are joined by an edge. AP l
is expanded into ceil(N_l) nodes forming a clique, and nodes of adjacent APs are
fully interconnected, so a proper coloring with one color per PRB hands every AP
as many orthogonal PRBs as it has colored nodes.
"""
import math
from typing import Dict, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np
import structlog
from pydantic import Field
from scipy.spatial import cKDTree

from smallcell.core.errors import ParameterError
from smallcell.core.models import ArrayModel, ChannelAllocation, NetworkRealization

logger = structlog.get_logger(__name__)

# Loads within this slack above an integer do not request an extra PRB.
CEIL_SLACK = 1e-9


def requested_prbs(load: float) -> int:
    """ceil(N_l), ignoring floating-point dust above an integer."""
    if load <= CEIL_SLACK:
        return 0
    return int(math.ceil(load - CEIL_SLACK))


class InterferenceGraph(ArrayModel):
    """AP interference graph and its load-expanded node graph."""

    ap_count: int = Field(ge=0)
    edges: Set[Tuple[int, int]] = Field(description="Unordered AP pairs (i < j)")
    node_of: List[int] = Field(description="Owning AP of every expanded node")
    graph: nx.Graph = Field(description="Expanded graph on nodes 0..node_count-1")

    @property
    def node_count(self) -> int:
        """Total number of expanded nodes, sum of ceil(N_l)."""
        return len(self.node_of)

    def nodes_of(self, ap: int) -> List[int]:
        """Expanded nodes owned by ``ap``."""
        return [v for v, owner in enumerate(self.node_of) if owner == ap]


class Coloring(ArrayModel):
    """Color per expanded node; ``None`` marks nodes left uncolored."""

    colors: Dict[int, Optional[int]]
    max_colors: int = Field(ge=1)

    @property
    def uncolored(self) -> List[int]:
        """Nodes that could not be colored within the budget."""
        return [v for v, c in self.colors.items() if c is None]

    @property
    def colors_used(self) -> int:
        """Number of distinct colors assigned."""
        return len({c for c in self.colors.values() if c is not None})


def ap_edges(aps: np.ndarray, d_tilde: float) -> Set[Tuple[int, int]]:
    """AP pairs within 2 * d_tilde of each other."""
    if len(aps) < 2:
        return set()
    return {(int(i), int(j)) for i, j in cKDTree(aps).query_pairs(r=2.0 * d_tilde)}


def build_interference_graph(
    realization: NetworkRealization, d_tilde: float, loads: Sequence[float]
) -> InterferenceGraph:
    """
    Build the load-expanded interference graph.

    Args:
        realization: AP positions
        d_tilde: AP coverage radius; APs at most 2 * d_tilde apart interfere
        loads: N_l per AP

    Returns:
        InterferenceGraph with ceil(N_l) clique nodes per AP
    """
    if d_tilde <= 0:
        raise ParameterError(f"d_tilde must be positive, got {d_tilde}")
    loads = np.asarray(loads, dtype=float)
    if loads.shape != (realization.n_aps,):
        raise ParameterError("one load per AP is required")
    if (loads < 0).any():
        raise ParameterError("loads must be non-negative")

    edges = ap_edges(realization.aps, d_tilde)
    return expand_graph(realization.n_aps, edges, loads)


def expand_graph(
    ap_count: int, edges: Set[Tuple[int, int]], loads: Sequence[float]
) -> InterferenceGraph:
    """Expand an AP graph into per-PRB clique nodes."""
    node_of: List[int] = []
    nodes_by_ap: List[List[int]] = []
    for ap in range(ap_count):
        first = len(node_of)
        count = requested_prbs(float(loads[ap]))
        node_of.extend([ap] * count)
        nodes_by_ap.append(list(range(first, first + count)))

    graph = nx.Graph()
    graph.add_nodes_from(range(len(node_of)))
    for nodes in nodes_by_ap:
        graph.add_edges_from(
            (u, v) for i, u in enumerate(nodes) for v in nodes[i + 1 :]
        )
    for i, j in edges:
        graph.add_edges_from((u, v) for u in nodes_by_ap[i] for v in nodes_by_ap[j])

    logger.debug(
        "Interference graph built",
        aps=ap_count,
        ap_edges=len(edges),
        nodes=graph.number_of_nodes(),
        node_edges=graph.number_of_edges(),
    )
    return InterferenceGraph(
        ap_count=ap_count,
        edges={(min(i, j), max(i, j)) for i, j in edges},
        node_of=node_of,
        graph=graph,
    )


def dsatur(adjacency: Dict[int, Set[int]], max_colors: int) -> Dict[int, Optional[int]]:
    """
    Brelaz (DSATUR) coloring with a color budget.

    At every step the unprocessed vertex with the most distinctly colored
    neighbours is taken; ties go to the highest degree among unprocessed
    vertices, then to the lowest vertex index. It receives the smallest color
    not used by its neighbours, or stays uncolored when all ``max_colors``
    colors are blocked.

    Args:
        adjacency: Vertex -> set of neighbours
        max_colors: Color budget

    Returns:
        Vertex -> color, or None for vertices left uncolored
    """
    if max_colors < 1:
        raise ParameterError(f"max_colors must be at least 1, got {max_colors}")

    result: Dict[int, Optional[int]] = {}
    neighbor_colors: Dict[int, Set[int]] = {v: set() for v in adjacency}
    open_degree = {v: len(nbrs) for v, nbrs in adjacency.items()}
    pending = set(adjacency)

    while pending:
        v = max(pending, key=lambda u: (len(neighbor_colors[u]), open_degree[u], -u))
        pending.remove(v)

        blocked = neighbor_colors[v]
        color = next((c for c in range(max_colors) if c not in blocked), None)
        result[v] = color

        for u in adjacency[v]:
            if u in pending:
                open_degree[u] -= 1
                if color is not None:
                    neighbor_colors[u].add(color)
    return result


def dsatur_color(graph: InterferenceGraph, max_colors: int) -> Coloring:
    """
    Color the expanded interference graph with at most ``max_colors`` colors.

    Nodes that cannot be colored are skipped, so an AP keeps whatever colors its
    other nodes obtained.
    """
    adjacency = {v: set(graph.graph.neighbors(v)) for v in graph.graph.nodes}
    coloring = Coloring(colors=dsatur(adjacency, max_colors), max_colors=max_colors)
    if coloring.uncolored:
        logger.debug(
            "Color budget exhausted",
            uncolored=len(coloring.uncolored),
            nodes=graph.node_count,
            max_colors=max_colors,
        )
    return coloring


def allocation_from_coloring(coloring: Coloring, graph: InterferenceGraph) -> ChannelAllocation:
    """Map colors to PRBs (color i is PRB i) and collect them per AP."""
    prbs: List[Set[int]] = [set() for _ in range(graph.ap_count)]
    requested = [0] * graph.ap_count
    for node, ap in enumerate(graph.node_of):
        requested[ap] += 1
        color = coloring.colors.get(node)
        if color is not None:
            prbs[ap].add(color)
    return ChannelAllocation(
        prbs=[sorted(p) for p in prbs], requested=requested, n_prbs=coloring.max_colors
    )


def ap_outage_from_allocation(
    loads: Sequence[float], allocation: ChannelAllocation
) -> np.ndarray:
    """Flag APs granted fewer PRBs than ceil(N_l)."""
    return np.array(
        [len(p) < requested_prbs(float(n)) for n, p in zip(loads, allocation.prbs)], dtype=bool
    )


def is_proper(graph: InterferenceGraph, coloring: Coloring) -> bool:
    """No edge joins two nodes of the same color."""
    colors = coloring.colors
    return all(
        colors.get(u) is None or colors.get(u) != colors.get(v) for u, v in graph.graph.edges
    )


def export_dimacs(graph: InterferenceGraph) -> str:
    """Expanded graph as DIMACS edge-list text (1-based vertices)."""
    lines = [
        f"c expanded interference graph of {graph.ap_count} APs",
        f"p edge {graph.graph.number_of_nodes()} {graph.graph.number_of_edges()}",
    ]
    edges = sorted((min(u, v), max(u, v)) for u, v in graph.graph.edges)
    lines.extend(f"e {u + 1} {v + 1}" for u, v in edges)
    return "\n".join(lines) + "\n"
