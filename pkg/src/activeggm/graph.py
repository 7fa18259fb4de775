"""Undirected simple graphs and the separation queries built on them.

Vertices are the integers ``0 .. p-1``.  Graphs are immutable; every
operation returns a new object.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Invalid graph input (bad vertex, self-loop, overlapping sets...)."""


def _pair(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph on ``p`` vertices.

    ``labels`` maps local vertex ``k`` to an original vertex label; it is the
    identity unless the graph was produced by :func:`induced_subgraph`.
    """

    p: int
    edges: frozenset = frozenset()
    labels: tuple = field(default=None)
    _adj: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self.p < 0:
            raise GraphError(f"vertex count must be non-negative, got {self.p}")
        norm = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise GraphError(f"self-loop at vertex {i}")
            if not (0 <= i < self.p and 0 <= j < self.p):
                raise GraphError(f"edge ({i}, {j}) out of range for p={self.p}")
            norm.add(_pair(i, j))
        object.__setattr__(self, "edges", frozenset(norm))
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(range(self.p)))
        elif len(self.labels) != self.p:
            raise GraphError("labels must have one entry per vertex")
        adj = [[] for _ in range(self.p)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))

    # -- construction -----------------------------------------------------
    @classmethod
    def empty(cls, p: int) -> "Graph":
        return cls(p)

    @classmethod
    def complete(cls, p: int) -> "Graph":
        return cls(p, frozenset(itertools.combinations(range(p), 2)))

    @classmethod
    def from_edges(cls, p: int, edges: Iterable) -> "Graph":
        return cls(p, frozenset(tuple(e) for e in edges))

    @classmethod
    def from_adjacency(cls, adj) -> "Graph":
        a = np.asarray(adj)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError("adjacency matrix must be square")
        iu, ju = np.nonzero(np.triu(a != 0, k=1) | np.triu(a.T != 0, k=1))
        return cls(a.shape[0], frozenset(zip(iu.tolist(), ju.tolist())))

    # -- queries ----------------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.p == other.p and self.edges == other.edges

    def __hash__(self):
        return hash((self.p, self.edges))

    def __len__(self):
        return self.p

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        return _pair(i, j) in self.edges

    def neighbors(self, v: int) -> tuple:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._adj], dtype=int)

    def sorted_edges(self) -> list:
        return sorted(self.edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.p, self.p), dtype=bool)
        if self.edges:
            ij = np.array(sorted(self.edges))
            a[ij[:, 0], ij[:, 1]] = True
            a[ij[:, 1], ij[:, 0]] = True
        return a

    def nonedges(self) -> list:
        return [e for e in itertools.combinations(range(self.p), 2) if e not in self.edges]

    def union(self, other: "Graph") -> "Graph":
        _check_same_p(self, other)
        return Graph(self.p, self.edges | other.edges)

    def difference(self, other: "Graph") -> "Graph":
        _check_same_p(self, other)
        return Graph(self.p, self.edges - other.edges)

    def with_edges(self, add=(), remove=()) -> "Graph":
        add = {_pair(*e) for e in add}
        remove = {_pair(*e) for e in remove}
        return Graph(self.p, (self.edges | add) - remove, self.labels)

    def relabel(self, labels: Sequence[int], p: int) -> "Graph":
        """Embed this graph into a graph on ``p`` vertices via ``labels``."""
        return Graph(p, frozenset(_pair(labels[i], labels[j]) for i, j in self.edges))

    def components(self) -> list:
        """Connected components as sorted tuples, ordered by smallest vertex."""
        seen = [False] * self.p
        comps = []
        for s in range(self.p):
            if seen[s]:
                continue
            seen[s] = True
            comp = [s]
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w in self._adj[u]:
                    if not seen[w]:
                        seen[w] = True
                        comp.append(w)
                        queue.append(w)
            comps.append(tuple(sorted(comp)))
        return comps

    def __repr__(self):
        return f"Graph(p={self.p}, n_edges={self.n_edges})"


def _check_same_p(a: Graph, b: Graph):
    if a.p != b.p:
        raise GraphError(f"graphs have different vertex counts ({a.p} vs {b.p})")


def _check_vertices(g: Graph, vs) -> frozenset:
    vs = frozenset(int(v) for v in vs)
    bad = [v for v in vs if not 0 <= v < g.p]
    if bad:
        raise GraphError(f"vertices {sorted(bad)} out of range for p={g.p}")
    return vs


def induced_subgraph(g: Graph, u: Iterable[int]) -> Graph:
    """Subgraph on ``u``, relabeled to ``0..|u|-1`` in increasing order.

    The returned graph's ``labels`` give the original label of each vertex.
    """
    verts = sorted(_check_vertices(g, u))
    index = {v: k for k, v in enumerate(verts)}
    edges = frozenset(
        (index[i], index[j]) for i, j in g.edges if i in index and j in index
    )
    return Graph(len(verts), edges, tuple(g.labels[v] for v in verts))


def restrict(g: Graph, u: Iterable[int]) -> Graph:
    """Edges of ``g`` with both endpoints in ``u``, keeping the original labels."""
    u = _check_vertices(g, u)
    return Graph(g.p, frozenset(e for e in g.edges if e[0] in u and e[1] in u))


def _reachable(g: Graph, start: Iterable[int], blocked: frozenset) -> set:
    seen = set(v for v in start if v not in blocked)
    queue = deque(seen)
    while queue:
        u = queue.popleft()
        for w in g.neighbors(u):
            if w not in seen and w not in blocked:
                seen.add(w)
                queue.append(w)
    return seen


def separates(g: Graph, a: Iterable[int], b: Iterable[int], s: Iterable[int]) -> bool:
    """True iff every path from ``a`` to ``b`` in ``g`` passes through ``s``."""
    a, b, s = (_check_vertices(g, x) for x in (a, b, s))
    if a & b or a & s or b & s:
        raise GraphError("a, b and s must be pairwise disjoint")
    return not (_reachable(g, a, s) & b)


def min_separator_size(g: Graph, i: int, j: int) -> int:
    """Size of the smallest vertex set separating non-adjacent ``i`` and ``j``.

    Unit-capacity max-flow on the vertex-split digraph (Menger).
    """
    _check_vertices(g, (i, j))
    if i == j:
        raise GraphError("i and j must differ")
    if g.has_edge(i, j):
        raise GraphError(f"({i}, {j}) is an edge; no separator exists")
    # node 2v = v_in, 2v+1 = v_out
    n = 2 * g.p
    big = g.p + 1
    cap: dict = {}
    graph: list = [[] for _ in range(n)]

    def add(u, v, c):
        if (u, v) not in cap:
            graph[u].append(v)
            graph[v].append(u)
            cap[(u, v)] = 0
            cap.setdefault((v, u), 0)
        cap[(u, v)] += c

    for v in range(g.p):
        add(2 * v, 2 * v + 1, big if v in (i, j) else 1)
    for u, v in g.edges:
        add(2 * u + 1, 2 * v, big)
        add(2 * v + 1, 2 * u, big)

    source, sink = 2 * i + 1, 2 * j
    flow = 0
    while True:
        parent = {source: None}
        queue = deque([source])
        while queue and sink not in parent:
            u = queue.popleft()
            for w in graph[u]:
                if w not in parent and cap[(u, w)] > 0:
                    parent[w] = u
                    queue.append(w)
        if sink not in parent:
            return flow
        w = sink
        while parent[w] is not None:
            u = parent[w]
            cap[(u, w)] -= 1
            cap[(w, u)] += 1
            w = u
        flow += 1


def eta(g: Graph) -> int:
    """Largest minimal-separator size over all non-adjacent pairs (0 if none)."""
    best = 0
    comp_of = {}
    for k, comp in enumerate(g.components()):
        for v in comp:
            comp_of[v] = k
    for i, j in g.nonedges():
        if comp_of[i] != comp_of[j]:
            continue
        best = max(best, min_separator_size(g, i, j))
    return best


def max_degree(g: Graph) -> int:
    return int(g.degrees().max()) if g.p else 0


@dataclass(frozen=True)
class Decomposition:
    """Vertex split ``V = v1 | v2`` with ``t = v1 & v2`` separating the rest."""

    v1: frozenset
    v2: frozenset
    t: frozenset

    def __post_init__(self):
        for name in ("v1", "v2", "t"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.v1 & self.v2 != self.t:
            raise GraphError("t must equal v1 & v2")
        if len(self.t) > 1:
            raise GraphError("only separators with |t| <= 1 are supported")

    def is_valid(self, g: Graph) -> bool:
        if self.v1 | self.v2 != frozenset(range(g.p)):
            return False
        a, b = self.v1 - self.t, self.v2 - self.t
        if not a or not b:
            return True
        return separates(g, a, b, self.t)


def articulation_points(g: Graph) -> list:
    """Cut vertices of ``g`` (vertices whose removal adds a component)."""
    base = len(g.components())
    cuts = []
    for v in range(g.p):
        if not g.neighbors(v):
            continue
        rest = [u for u in range(g.p) if u != v]
        n_comp = len(induced_subgraph(g, rest).components())
        # removing an isolated-free vertex drops one vertex; extra components mean a cut
        if n_comp > base:
            cuts.append(v)
    return cuts


def _bipartitions(blocks: list):
    """Ordered splits of ``blocks`` into two non-empty groups."""
    m = len(blocks)
    for mask in range(1, 2**m - 1):
        left = frozenset().union(*(blocks[k] for k in range(m) if mask >> k & 1))
        right = frozenset().union(*(blocks[k] for k in range(m) if not mask >> k & 1))
        yield left, right


def two_cluster_decompositions(g: Graph, max_t: int = 1) -> list:
    """Every decomposition ``(v1, v2, t)`` of ``g`` with ``|t| <= max_t``.

    Separator-free splits come from grouping connected components; splits with
    ``|t| = 1`` come from a cut vertex and a grouping of the components left
    after removing it.  Both orders of each split are listed.  The number of
    groupings is exponential in the number of components, so this is meant
    for small graphs.
    """
    if max_t not in (0, 1):
        raise GraphError("max_t must be 0 or 1")
    out = []
    comps = [frozenset(c) for c in g.components()]
    for v1, v2 in _bipartitions(comps):
        out.append(Decomposition(v1, v2, frozenset()))
    if max_t == 1:
        for c in articulation_points(g):
            rest = [u for u in range(g.p) if u != c]
            sub = induced_subgraph(g, rest)
            blocks = [frozenset(sub.labels[k] for k in comp) for comp in sub.components()]
            for v1, v2 in _bipartitions(blocks):
                out.append(Decomposition(v1 | {c}, v2 | {c}, frozenset({c})))
    return out


def metrics(est: Graph, truth: Graph) -> tuple:
    """(TPR, FDR, edit distance) of ``est`` against ``truth``.

    TPR is 1 when the true graph has no edges; FDR is 0 when ``est`` is empty.
    """
    _check_same_p(est, truth)
    tp = len(est.edges & truth.edges)
    fp = len(est.edges - truth.edges)
    fn = len(truth.edges - est.edges)
    tpr = tp / len(truth.edges) if truth.edges else 1.0
    fdr = fp / len(est.edges) if est.edges else 0.0
    return tpr, fdr, fn + fp


# -- text format -----------------------------------------------------------

def format_graph(g: Graph) -> str:
    lines = [f"p {g.p}"] + [f"{i} {j}" for i, j in g.sorted_edges()]
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> Graph:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or rows[0][0] != "p" or len(rows[0]) != 2:
        raise GraphError("graph text must start with 'p <count>'")
    p = int(rows[0][1])
    edges = []
    for r in rows[1:]:
        if len(r) != 2:
            raise GraphError(f"malformed edge line: {' '.join(r)!r}")
        edges.append((int(r[0]), int(r[1])))
    return Graph.from_edges(p, edges)


def write_graph(g: Graph, path) -> None:
    Path(path).write_text(format_graph(g))


def read_graph(path) -> Graph:
    return parse_graph(Path(path).read_text())
