"""
Graph: network topologies and consensus (mixing) matrices
"""

import logging
from dataclasses import dataclass, field
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from adc_dgd.utils.error_handling import ErrorReporter, MatrixValidationError, TopologyError

logger = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-12
EIGEN_TOL = 1e-9

Edge = Tuple[int, int]


def _normalize_edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Graph:
    """Undirected connected topology over nodes 0..n-1"""
    n: int
    edges: FrozenSet[Edge]
    name: str = "custom"

    def __post_init__(self):
        if self.n < 1:
            raise TopologyError(f"Graph needs at least one node, got n={self.n}")
        for u, v in self.edges:
            if u == v:
                raise TopologyError(f"Self-loop at node {u} is not allowed")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise TopologyError(f"Edge ({u}, {v}) has a node index outside [0, {self.n})")
            if u > v:
                raise TopologyError(f"Edge ({u}, {v}) is not normalized; build graphs with from_edges")
        if not nx.is_connected(self.to_networkx()):
            raise TopologyError(f"Graph '{self.name}' with n={self.n} is not connected",
                                suggestion="add edges so that every pair of nodes is joined by a path")

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    def degree(self, node: int) -> int:
        return sum(1 for u, v in self.edges if node in (u, v))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def neighbors(self, node: int) -> List[int]:
        return sorted(v if u == node else u for u, v in self.edges if node in (u, v))

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for u, v in self.edges:
            adj[u, v] = adj[v, u] = True
        return adj


def from_edges(n: int, edges: Iterable[Sequence[int]], name: str = "custom") -> Graph:
    """Build a graph from an explicit edge list, rejecting duplicates"""
    seen = set()
    for pair in edges:
        if len(pair) != 2:
            raise TopologyError(f"Edge {tuple(pair)} must join exactly two nodes")
        u, v = int(pair[0]), int(pair[1])
        if u == v:
            raise TopologyError(f"Self-loop at node {u} is not allowed")
        edge = _normalize_edge(u, v)
        if edge in seen:
            raise TopologyError(f"Duplicate edge ({u}, {v})")
        seen.add(edge)
    return Graph(n=n, edges=frozenset(seen), name=name)


def _from_networkx(g: nx.Graph, name: str) -> Graph:
    return from_edges(g.number_of_nodes(), g.edges(), name=name)


def build_ring(n: int) -> Graph:
    """Cycle graph with edges (i, (i+1) mod n)"""
    if n < 3:
        raise TopologyError(f"A ring needs n >= 3 nodes, got n={n}")
    return _from_networkx(nx.cycle_graph(n), name=f"ring{n}")


def build_star(n: int) -> Graph:
    """Star graph; node 0 is the hub"""
    if n < 2:
        raise TopologyError(f"A star needs n >= 2 nodes, got n={n}")
    return _from_networkx(nx.star_graph(n - 1), name=f"star{n}")


def build_path(n: int) -> Graph:
    if n < 2:
        raise TopologyError(f"A path needs n >= 2 nodes, got n={n}")
    return _from_networkx(nx.path_graph(n), name=f"path{n}")


@dataclass(frozen=True)
class ConsensusMatrix:
    """Validated symmetric doubly stochastic mixing matrix"""
    graph: Graph
    entries: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)
    beta: float

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def lambda_2(self) -> float:
        return float(self.eigenvalues[1]) if self.n > 1 else 0.0

    @property
    def lambda_n(self) -> float:
        return float(self.eigenvalues[-1])

    def mix(self, x: np.ndarray, steps: int = 1) -> np.ndarray:
        """Apply W `steps` times to a stacked (n, P) array"""
        out = x
        for _ in range(steps):
            out = self.entries @ out
        return out


def _check_matrix(entries: np.ndarray, g: Graph) -> ErrorReporter:
    reporter = ErrorReporter()
    n = g.n
    if entries.shape != (n, n):
        reporter.add_error(MatrixValidationError(
            f"Matrix has shape {entries.shape}, expected ({n}, {n})", property_name="shape"))
        return reporter
    if not np.all(np.isfinite(entries)):
        bad = [tuple(int(i) for i in ix) for ix in np.argwhere(~np.isfinite(entries))]
        reporter.add_error(MatrixValidationError(
            "Matrix has non-finite entries", property_name="finite", indices=bad))
        return reporter

    asym = np.argwhere(np.abs(entries - entries.T) > STOCHASTIC_TOL)
    asym = [tuple(int(i) for i in ix) for ix in asym if ix[0] < ix[1]]
    if asym:
        reporter.add_error(MatrixValidationError(
            "Matrix is not symmetric", property_name="symmetric", indices=asym))

    row_bad = np.flatnonzero(np.abs(entries.sum(axis=1) - 1.0) > STOCHASTIC_TOL)
    col_bad = np.flatnonzero(np.abs(entries.sum(axis=0) - 1.0) > STOCHASTIC_TOL)
    if row_bad.size or col_bad.size:
        idx = [("row", int(i)) for i in row_bad] + [("col", int(j)) for j in col_bad]
        reporter.add_error(MatrixValidationError(
            "Rows and columns must each sum to 1", property_name="doubly stochastic", indices=idx))

    negative = [tuple(int(i) for i in ix) for ix in np.argwhere(entries < 0)]
    if negative:
        reporter.add_error(MatrixValidationError(
            "Matrix has negative entries", property_name="non-negative", indices=negative))

    allowed = g.adjacency() | np.eye(n, dtype=bool)
    off_graph = [tuple(int(i) for i in ix) for ix in np.argwhere((entries != 0) & ~allowed)]
    if off_graph:
        reporter.add_error(MatrixValidationError(
            "Positive weight between nodes that share no edge", property_name="sparsity",
            indices=off_graph))
    return reporter


def _spectrum(entries: np.ndarray) -> np.ndarray:
    sym = 0.5 * (entries + entries.T)
    return np.sort(np.linalg.eigvalsh(sym))[::-1]


def _check_spectrum(eigs: np.ndarray, reporter: ErrorReporter):
    if abs(eigs[0] - 1.0) > EIGEN_TOL:
        reporter.add_error(MatrixValidationError(
            f"Largest eigenvalue is {eigs[0]:.12g}, expected 1", property_name="eigenvalues",
            indices=[(0,)]))
    ones = np.flatnonzero(np.abs(eigs - 1.0) <= EIGEN_TOL)
    if ones.size > 1:
        reporter.add_error(MatrixValidationError(
            f"Eigenvalue 1 has multiplicity {ones.size}; the graph must be connected",
            property_name="eigenvalues", indices=[(int(i),) for i in ones]))
    low = np.flatnonzero(eigs <= -1.0 + EIGEN_TOL)
    if low.size:
        reporter.add_error(MatrixValidationError(
            f"Eigenvalue {eigs[low[0]]:.12g} is not in (-1, 1]", property_name="eigenvalues",
            indices=[(int(i),) for i in low]))


def _finalize(entries: np.ndarray, g: Graph, reporter: Optional[ErrorReporter] = None) -> ConsensusMatrix:
    reporter = reporter or _check_matrix(entries, g)
    eigs = np.array([1.0])
    if not reporter.has_errors():
        eigs = _spectrum(entries)
        _check_spectrum(eigs, reporter)
    if reporter.has_errors():
        logger.debug("Consensus matrix rejected:\n%s", reporter.format_errors())
        reporter.raise_if_errors()
    beta = float(max(abs(eigs[1]), abs(eigs[-1]))) if g.n > 1 else 0.0
    frozen = np.array(entries, dtype=np.float64)
    frozen.setflags(write=False)
    eigs.setflags(write=False)
    return ConsensusMatrix(graph=g, entries=frozen, eigenvalues=eigs, beta=beta)


def metropolis_matrix(g: Graph) -> ConsensusMatrix:
    """Metropolis weights: W[i][j] = 1/(1 + max(deg i, deg j)) on edges, remainder on the diagonal"""
    if not nx.is_connected(g.to_networkx()):
        raise TopologyError(f"Graph '{g.name}' is not connected")
    deg = g.degrees()
    w = np.zeros((g.n, g.n), dtype=np.float64)
    for u, v in g.edges:
        w[u, v] = w[v, u] = 1.0 / (1.0 + max(deg[u], deg[v]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    cm = _finalize(w, g)
    logger.debug("Metropolis matrix for %s: beta=%.6f", g.name, cm.beta)
    return cm


def explicit_matrix(entries, g: Graph) -> ConsensusMatrix:
    """Validate user-supplied entries against every consensus-matrix invariant"""
    arr = np.asarray(entries, dtype=np.float64)
    reporter = _check_matrix(arr, g)
    return _finalize(arr, g, reporter)


def spectral_beta(w: ConsensusMatrix) -> float:
    return w.beta


def averaging_matrix(n: int = 2) -> ConsensusMatrix:
    """Complete-graph uniform averaging, W = 11^T / n"""
    g = from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)], name=f"complete{n}")
    return explicit_matrix(np.full((n, n), 1.0 / n), g)
