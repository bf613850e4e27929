"""Undirected communication graphs: neighborhoods, Laplacian, spectrum, generators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import sym_eigs

CONNECTIVITY_TOL = 1e-9
DEFAULT_RETRIES = 100
KINDS = ("path", "cycle", "complete", "grid", "erdos_renyi", "geometric")


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SensorNetwork:
    N: int
    edges: frozenset
    adjacency: np.ndarray = field(init=False, repr=False)
    laplacian: np.ndarray = field(init=False, repr=False)
    spectrum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.N < 1:
            raise GraphError("a network needs at least one node")
        norm = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if not (0 <= u < self.N and 0 <= v < self.N):
                raise GraphError(f"edge ({u}, {v}) out of range for N={self.N}")
            norm.add((min(u, v), max(u, v)))
        adj = np.zeros((self.N, self.N))
        for u, v in norm:
            adj[u, v] = adj[v, u] = 1.0
        lap = np.diag(adj.sum(axis=1)) - adj
        object.__setattr__(self, "edges", frozenset(norm))
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "laplacian", lap)
        object.__setattr__(self, "spectrum", sym_eigs(lap)[0])
        object.__setattr__(self, "_nbrs", tuple(
            tuple(int(l) for l in np.flatnonzero(adj[n])) for n in range(self.N)))

    def neighbors(self, n: int) -> tuple[int, ...]:
        """Adjacent nodes of ``n``, excluding ``n`` itself, in ascending order."""
        self._check(n)
        return self._nbrs[n]

    def degree(self, n: int) -> int:
        return len(self.neighbors(n))

    def _check(self, n: int) -> None:
        if not (0 <= n < self.N):
            raise GraphError(f"invalid node {n} (N={self.N})")

    @property
    def algebraic_connectivity(self) -> float:
        return float(self.spectrum[1]) if self.N > 1 else 0.0

    @property
    def lambda_max(self) -> float:
        return float(self.spectrum[-1])


def neighborhood(net: SensorNetwork, n: int) -> frozenset[int]:
    """Inclusive neighborhood: ``n`` together with every node adjacent to it."""
    return frozenset((n, *net.neighbors(n)))


def laplacian(net: SensorNetwork) -> np.ndarray:
    return net.laplacian.copy()


def check_connected(net: SensorNetwork) -> tuple[bool, float]:
    # A single node is trivially connected; lambda_2 is undefined and reported as 0.
    if net.N == 1:
        return True, 0.0
    lam2 = net.algebraic_connectivity
    return lam2 > CONNECTIVITY_TOL, lam2


def from_edges(N: int, edges) -> SensorNetwork:
    return SensorNetwork(N, frozenset(tuple(e) for e in edges))


def _path(N):
    return [(i, i + 1) for i in range(N - 1)]


def _cycle(N):
    if N < 3:
        return _path(N)
    return _path(N) + [(N - 1, 0)]


def _complete(N):
    return [(i, j) for i in range(N) for j in range(i + 1, N)]


def _grid(N):
    rows = max(1, math.isqrt(N))
    cols = math.ceil(N / rows)
    edges = []
    for k in range(N):
        c = k % cols
        if c + 1 < cols and k + 1 < N:
            edges.append((k, k + 1))
        if k + cols < N:
            edges.append((k, k + cols))
    return edges


def _erdos_renyi(N, p, gen):
    iu = np.triu_indices(N, 1)
    keep = gen.random(len(iu[0])) < p
    return list(zip(iu[0][keep].tolist(), iu[1][keep].tolist()))


def _geometric(N, radius, gen, mean_degree=None):
    pts = gen.random((N, 2))
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    iu = np.triu_indices(N, 1)
    dist = d[iu]
    if mean_degree is not None:
        # radius = distance of the k-th closest pair, giving exactly k edges
        k = min(len(dist), max(0, int(round(N * mean_degree / 2))))
        radius = np.sort(dist)[k - 1] if k > 0 else -1.0
    keep = dist <= radius
    return list(zip(iu[0][keep].tolist(), iu[1][keep].tolist()))


def generate(kind: str, N: int, rng=None, *, p: float | None = None,
             radius: float | None = None, mean_degree: float | None = None,
             retries: int = DEFAULT_RETRIES) -> SensorNetwork:
    """Build a graph of the given family.

    Random families (``erdos_renyi`` with ``p``, ``geometric`` in the unit
    square) are redrawn until connected, at most ``retries`` times. A geometric
    graph takes either a fixed ``radius`` or a ``mean_degree``, in which case
    the radius is set per draw so the graph has ``round(N * mean_degree / 2)``
    edges.
    """
    if N < 1:
        raise GraphError("N must be at least 1")
    if kind == "path":
        return from_edges(N, _path(N))
    if kind == "cycle":
        return from_edges(N, _cycle(N))
    if kind == "complete":
        return from_edges(N, _complete(N))
    if kind == "grid":
        return from_edges(N, _grid(N))
    if kind not in ("erdos_renyi", "geometric"):
        raise GraphError(f"unknown graph kind {kind!r}; expected one of {KINDS}")
    if rng is None:
        raise GraphError(f"{kind} graphs need an rng")
    gen = rng.generator if hasattr(rng, "generator") else rng
    if kind == "erdos_renyi":
        if p is None or not (0.0 <= p <= 1.0):
            raise GraphError("erdos_renyi needs 0 <= p <= 1")
        draw = lambda: _erdos_renyi(N, p, gen)  # noqa: E731
    else:
        if mean_degree is None and (radius is None or radius < 0):
            raise GraphError("geometric needs radius >= 0 or mean_degree")
        draw = lambda: _geometric(N, radius, gen, mean_degree)  # noqa: E731
    for _ in range(retries):
        net = from_edges(N, draw())
        if check_connected(net)[0]:
            return net
    raise GraphError(f"could not generate connected graph ({kind}, N={N}) after {retries} attempts")


def write_edge_list(net: SensorNetwork, path) -> None:
    lines = [str(net.N)] + [f"{u} {v}" for u, v in sorted(net.edges)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path) -> SensorNetwork:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 1:
        raise GraphError("edge list must start with a line holding N")
    N = int(rows[0][0])
    edges = []
    for row in rows[1:]:
        if len(row) != 2:
            raise GraphError(f"bad edge line: {' '.join(row)!r}")
        edges.append((int(row[0]), int(row[1])))
    return from_edges(N, edges)
