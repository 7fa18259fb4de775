"""Chordal completion by greedy min-fill elimination and clique extraction."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .graph import Graph, GraphError


@dataclass(frozen=True)
class EliminationResult:
    ordering: tuple
    fill: Graph
    cliques: list


def _maximal(candidates) -> list:
    """Drop candidates contained in another; keep first-seen order."""
    uniq = list(dict.fromkeys(frozenset(c) for c in candidates))
    by_size = sorted(uniq, key=len, reverse=True)
    kept = []
    for c in by_size:
        if not any(c < k for k in kept):
            kept.append(c)
    keep = set(kept)
    return [c for c in uniq if c in keep]


def _eliminate(g: Graph):
    """Yield ``(v, neighbours)`` in min-fill order, lowest index on ties.

    ``neighbours`` are v's remaining neighbours at elimination time; they
    become a clique before the next step.
    """
    # adjacency as integer bitmasks keeps the fill counts cheap
    adj = [0] * g.p
    for i, j in g.edges:
        adj[i] |= 1 << j
        adj[j] |= 1 << i
    remaining = set(range(g.p))

    def fill_count(v):
        nb = adj[v]
        missing = sum((nb & ~adj[a]).bit_count() - 1 for a in _members(nb))
        return missing // 2

    counts = {v: fill_count(v) for v in remaining}
    while remaining:
        v = min(remaining, key=lambda u: (counts[u], u))
        nbmask = adj[v]
        nb = _members(nbmask)
        for a in nb:
            adj[a] = (adj[a] | nbmask) & ~(1 << a) & ~(1 << v)
        adj[v] = 0
        del counts[v]
        remaining.discard(v)
        yield v, nb
        # only neighbourhoods touching v's old neighbours can have changed
        dirty = nbmask
        for a in nb:
            dirty |= adj[a]
        for u in _members(dirty):
            counts[u] = fill_count(u)


def _members(mask: int) -> list:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def greedy_fill(g: Graph) -> EliminationResult:
    """Min-fill elimination with ties broken by lowest vertex index.

    Each eliminated vertex contributes the clique formed by itself and its
    remaining neighbours; non-maximal ones are discarded.
    """
    fill_edges = set(g.edges)
    ordering, candidates = [], []
    for v, nb in _eliminate(g):
        fill_edges.update(itertools.combinations(nb, 2))
        candidates.append(frozenset([v, *nb]))
        ordering.append(v)
    fill = Graph(g.p, frozenset(fill_edges))
    return EliminationResult(tuple(ordering), fill, _maximal(candidates))


def fill_width(g: Graph, stop_at: int = None) -> int:
    """Largest clique of the min-fill completion.

    With ``stop_at`` the elimination halts once a clique of that size is
    seen, and that size is returned.
    """
    width = 1 if g.p else 0
    for _, nb in _eliminate(g):
        width = max(width, len(nb) + 1)
        if stop_at is not None and width >= stop_at:
            return width
    return width


def degeneracy(g: Graph) -> int:
    """Largest minimum degree over subgraphs; a lower bound on treewidth."""
    deg = {v: g.degree(v) for v in range(g.p)}
    alive = set(range(g.p))
    best = 0
    while alive:
        v = min(alive, key=lambda u: (deg[u], u))
        best = max(best, deg[v])
        alive.discard(v)
        for u in g.neighbors(v):
            if u in alive:
                deg[u] -= 1
    return best


def mcs_ordering(g: Graph) -> list:
    """Maximum cardinality search; the reverse visit order is the elimination order."""
    weight = [0] * g.p
    numbered = [False] * g.p
    visit = []
    for _ in range(g.p):
        v = max((u for u in range(g.p) if not numbered[u]), key=lambda u: (weight[u], -u))
        numbered[v] = True
        visit.append(v)
        for w in g.neighbors(v):
            if not numbered[w]:
                weight[w] += 1
    return visit[::-1]


def is_perfect_elimination(g: Graph, ordering) -> bool:
    pos = {v: k for k, v in enumerate(ordering)}
    if sorted(pos) != list(range(g.p)):
        return False
    for v in ordering:
        later = [u for u in g.neighbors(v) if pos[u] > pos[v]]
        for a, b in itertools.combinations(later, 2):
            if not g.has_edge(a, b):
                return False
    return True


def is_chordal(g: Graph) -> bool:
    return is_perfect_elimination(g, mcs_ordering(g))


def max_cliques(g: Graph, ordering=None) -> list:
    """Maximal cliques of a chordal graph from a perfect elimination ordering."""
    if ordering is None:
        ordering = mcs_ordering(g)
    if not is_perfect_elimination(g, ordering):
        raise GraphError("graph is not chordal under the given ordering")
    pos = {v: k for k, v in enumerate(ordering)}
    cands = [frozenset([v, *(u for u in g.neighbors(v) if pos[u] > pos[v])]) for v in ordering]
    return _maximal(cands)
