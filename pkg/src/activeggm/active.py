"""Budgeted active measurement rounds driven by bracketing graph estimates."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .chordal import greedy_fill
from .cit import InsufficientDataError, cit_path
from .graph import Graph, induced_subgraph
from .modelsel import DEFAULT_GAMMA, argmin_sparse, default_tau_grid, oracle_index, score_path

logger = logging.getLogger(__name__)


def _pair(i, j):
    return (i, j) if i < j else (j, i)


# -- state and bookkeeping ---------------------------------------------------------

@dataclass(frozen=True)
class ActiveState:
    """Active vertices ``A``, confirmed edges and confirmed non-edges."""

    active: frozenset
    confirmed_edges: frozenset = frozenset()
    confirmed_nonedges: frozenset = frozenset()

    @classmethod
    def initial(cls, p: int) -> "ActiveState":
        return cls(frozenset(range(p)))

    def check(self, p: int) -> None:
        """Raise ValueError unless the state is internally consistent."""
        if self.confirmed_edges & self.confirmed_nonedges:
            raise ValueError("a pair is confirmed both as edge and non-edge")
        known = self.confirmed_edges | self.confirmed_nonedges
        for i, j in itertools.combinations(range(p), 2):
            if (i not in self.active or j not in self.active) and (i, j) not in known:
                raise ValueError(f"pair {(i, j)} touches a retired vertex but is unconfirmed")

    def force(self, g: Graph) -> Graph:
        """``g`` with confirmed edges added and confirmed non-edges removed."""
        return g.with_edges(add=self.confirmed_edges, remove=self.confirmed_nonedges)


class MeasurementLedger:
    """Rounds of measurements; each round observes a vertex subset on fresh rows."""

    def __init__(self, p: int):
        self.p = p
        self.rounds = []
        self.history = []
        self._blocks = []

    def record(self, vertices, rows: np.ndarray) -> None:
        vs = tuple(sorted(vertices))
        rows = np.asarray(rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] != len(vs):
            raise ValueError("rows must be a (m, |vertices|) array")
        if self.rounds and not set(vs) <= set(self.rounds[-1][0]):
            raise ValueError("measured vertex sets must be non-increasing")
        self.rounds.append((vs, rows.shape[0]))
        self._blocks.append(rows)

    def note(self, state: ActiveState) -> None:
        """Remember the state sizes after a round (for reporting)."""
        self.history.append((len(state.active), len(state.confirmed_edges),
                             len(state.confirmed_nonedges)))

    @property
    def n_rows(self) -> int:
        return sum(m for _, m in self.rounds)

    @property
    def scalar_count(self) -> int:
        return sum(m * len(vs) for vs, m in self.rounds)

    @property
    def matrix(self) -> np.ndarray:
        """``n_bar x p`` matrix, ``NaN`` where a vertex was not measured."""
        out = np.full((self.n_rows, self.p), np.nan)
        r = 0
        for (vs, m), block in zip(self.rounds, self._blocks):
            out[r:r + m, list(vs)] = block
            r += m
        return out

    def rows_over(self, vertices) -> np.ndarray:
        """Rows observing every vertex in ``vertices``, restricted to them."""
        vs = sorted(vertices)
        x = self.matrix[:, vs]
        return x[~np.isnan(x).any(axis=1)]

    def csv_rows(self) -> list:
        out = [("round", "active", "rows", "scalars", "confirmed_edges", "confirmed_nonedges")]
        for k, (vs, m) in enumerate(self.rounds):
            ce, cn = self.history[k][1:] if k < len(self.history) else ("", "")
            out.append((k + 1, len(vs), m, m * len(vs), ce, cn))
        return out


# -- measurement sources --------------------------------------------------------------

class RowStream:
    """Lazily drawn i.i.d. rows over all vertices, shared between readers.

    Every reader sees the same row sequence and observes only the columns it
    asks for, so competing procedures can be compared on common draws.
    """

    def __init__(self, model, rng):
        self.sigma = model.sigma
        self._chol = np.linalg.cholesky(model.sigma)
        self._rng = rng
        self._rows = np.empty((0, model.p))

    def _ensure(self, n):
        if n > len(self._rows):
            z = self._rng.standard_normal((n - len(self._rows), self._chol.shape[0]))
            self._rows = np.vstack([self._rows, z @ self._chol.T])

    def rows(self, start: int, count: int) -> np.ndarray:
        self._ensure(start + count)
        return self._rows[start:start + count]

    def reader(self) -> Callable:
        """A sampler ``draw(m, vertices)`` with its own cursor into the stream."""
        cursor = [0]

        def draw(m, vertices):
            out = self.rows(cursor[0], m)[:, sorted(vertices)]
            cursor[0] += m
            return out

        return draw


def model_sampler(model, rng) -> Callable:
    """Sampler drawing independent rows of ``model`` over the requested vertices."""
    from .model import sample

    return lambda m, vertices: sample(model, m, sorted(vertices), rng)


# -- estimators ------------------------------------------------------------------------

@dataclass
class EstimatorConfig:
    """Settings for the bracketing and final estimates.

    ``selection`` picks the final threshold by EBIC or, given ``truth``,
    by the oracle.  ``tau_selection`` controls the bracketing replicates:
    ``"replicate"`` selects a threshold on every subsample, ``"shared"``
    selects once on all rows of the round and reuses it.  Bracketing
    thresholds are chosen by ``bracket_selection`` (EBIC unless set to
    ``"oracle"``), scored with ``bracket_gamma`` when given.  ``bracket_fn``
    replaces stability selection with a user-supplied
    ``(data, state, rng) -> Bracket``.
    """

    kappa_active: int = 1
    kappa_final: int = 2
    l: int = 30
    alpha_plus: float = 0.1
    alpha_minus: float = 1.0
    tau_grid: np.ndarray = field(default_factory=default_tau_grid)
    gamma: float = DEFAULT_GAMMA
    selection: str = "ebic"
    tau_selection: str = "replicate"
    truth: Optional[Graph] = None
    bracket_fn: Optional[Callable] = None
    bracket_selection: str = "ebic"
    bracket_gamma: Optional[float] = None

    @property
    def bracket_oracle(self) -> bool:
        return self.bracket_selection == "oracle"

    def __post_init__(self):
        if self.selection not in ("ebic", "oracle"):
            raise ValueError("selection must be 'ebic' or 'oracle'")
        if self.tau_selection not in ("replicate", "shared"):
            raise ValueError("tau_selection must be 'replicate' or 'shared'")
        if self.bracket_selection not in ("ebic", "oracle"):
            raise ValueError("bracket_selection must be 'ebic' or 'oracle'")
        if "oracle" in (self.selection, self.bracket_selection) and self.truth is None:
            raise ValueError("oracle selection needs the true graph")
        if not 0 < self.alpha_plus <= self.alpha_minus <= 1:
            raise ValueError("need 0 < alpha_plus <= alpha_minus <= 1")
        if self.l < 1:
            raise ValueError("l must be at least 1")


def estimate(data: np.ndarray, cols, p: int, kappa: int, est: EstimatorConfig,
             state: Optional[ActiveState] = None, oracle: bool = False,
             taus=None, gamma: Optional[float] = None) -> tuple:
    """CIT over ``cols`` with threshold chosen along a grid.

    ``data`` holds the columns ``cols`` (sorted).  Candidate graphs are made
    consistent with ``state`` before scoring.  Oracle choice compares the
    whole graph with ``est.truth``.  Returns ``(graph, tau)``.
    """
    cols = sorted(cols)
    data = np.asarray(data, dtype=float)
    taus = np.sort(np.asarray(est.tau_grid if taus is None else taus, dtype=float))
    raw = cit_path(data, kappa, taus)
    graphs = [g.relabel(cols, p) for g in raw]
    if state is not None:
        graphs = [state.force(g) for g in graphs]
    if len(graphs) == 1:
        k = 0
    elif oracle:
        k = oracle_index(graphs, est.truth)
    else:
        local = [induced_subgraph(g, cols) for g in graphs]
        k = argmin_sparse(score_path(data, local, est.gamma if gamma is None else gamma,
                                          exhaustive=False), graphs)
    return graphs[k], float(taus[k])


@dataclass(frozen=True)
class Bracket:
    h_plus: Graph
    h_minus: Graph
    q_matrix: np.ndarray


def bracket_from_frequencies(q: np.ndarray, alpha_plus: float, alpha_minus: float) -> Bracket:
    # frequencies are ratios of counts; the slack absorbs rounding in q
    tol = 1e-12
    plus = Graph.from_adjacency(np.triu(q >= alpha_plus - tol, 1))
    minus = Graph.from_adjacency(np.triu(q >= alpha_minus - tol, 1))
    return Bracket(plus, minus, q)


def stability_bracket(data, state: ActiveState, base: EstimatorConfig, l: Optional[int] = None,
                      alpha_plus: Optional[float] = None, alpha_minus: Optional[float] = None,
                      rng=None) -> Bracket:
    """Edge frequencies over ``l`` half-subsamples of the rows.

    ``data`` is ``n x p`` and must be complete over ``state.active``.  Each
    replicate is forced to agree with the confirmed pairs.  Replicates whose
    estimate fails are dropped from the average.
    """
    l = base.l if l is None else l
    alpha_plus = base.alpha_plus if alpha_plus is None else alpha_plus
    alpha_minus = base.alpha_minus if alpha_minus is None else alpha_minus
    if not 0 < alpha_plus <= alpha_minus <= 1:
        raise ValueError("need 0 < alpha_plus <= alpha_minus <= 1")
    data = np.asarray(data, dtype=float)
    n, p = data.shape
    cols = sorted(state.active)
    x = data[:, cols]
    if np.isnan(x).any():
        raise ValueError("data must be complete over the active vertices")
    half = n // 2
    if half < 2:
        raise InsufficientDataError(cols, half, 2)
    base_seed = int(np.random.default_rng(rng).integers(2**63))
    taus = None
    oracle = base.bracket_oracle
    gamma = base.gamma if base.bracket_gamma is None else base.bracket_gamma
    if base.tau_selection == "shared":
        taus = [estimate(x, cols, p, base.kappa_active, base, state, oracle, gamma=gamma)[1]]
    freq = np.zeros((p, p))
    used = 0
    for rep in range(l):
        sub = np.random.default_rng([base_seed, rep]).choice(n, half, replace=False)
        try:
            g, _ = estimate(x[np.sort(sub)], cols, p, base.kappa_active, base, state,
                            oracle=oracle, taus=taus, gamma=gamma)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.warning("stability replicate %d skipped: %s", rep, exc)
            continue
        used += 1
        if g.edges:
            iu, ju = zip(*g.edges)
            freq[iu, ju] += 1
    if used == 0:
        raise InsufficientDataError(cols, half, None)
    freq /= used
    freq = freq + freq.T
    return bracket_from_frequencies(freq, alpha_plus, alpha_minus)


def update_state(state: ActiveState, bracket: Bracket) -> ActiveState:
    """Confirm the pairs on which the bracket is certain and shrink ``A``.

    The upper graph restricted to ``A`` is triangulated.  Pairs inside a
    maximal clique where the two graphs agree are confirmed.  A vertex is
    retired when every clique containing it agrees; its remaining pairs
    are absent from the upper graph and become non-edges.
    """
    act = sorted(state.active)
    if not act:
        return state
    hp = induced_subgraph(bracket.h_plus, act)
    hm = induced_subgraph(bracket.h_minus, act)
    cliques = greedy_fill(hp).cliques
    agree = []
    for c in cliques:
        ok = all(hp.has_edge(a, b) == hm.has_edge(a, b) for a, b in itertools.combinations(c, 2))
        agree.append(ok)
    edges, nonedges = set(state.confirmed_edges), set(state.confirmed_nonedges)
    known = edges | nonedges
    for c, ok in zip(cliques, agree):
        if not ok:
            continue
        for a, b in itertools.combinations(sorted(c), 2):
            pr = _pair(act[a], act[b])
            if pr in known:
                continue
            (edges if hp.has_edge(a, b) else nonedges).add(pr)
    keep = set()
    for c, ok in zip(cliques, agree):
        if not ok:
            keep |= c
    retired = [act[v] for v in range(len(act)) if v not in keep]
    for r in retired:
        for u in act:
            pr = _pair(r, u)
            if u == r or pr in edges or pr in nonedges:
                continue
            # an upper-graph edge at r lies in some agreeing clique, so it is known
            nonedges.add(pr)
    return ActiveState(frozenset(act[v] for v in keep), frozenset(edges), frozenset(nonedges))


def find_active_vertices(data, state: ActiveState, cfg: EstimatorConfig, rng=None) -> ActiveState:
    """One bracketing step: estimate ``(H+, H-)`` and update the state.

    On estimator failure the state is returned unchanged.
    """
    if not state.active:
        return state
    try:
        if cfg.bracket_fn is not None:
            bracket = cfg.bracket_fn(data, state, rng)
        else:
            bracket = stability_bracket(data, state, cfg, rng=rng)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        logger.warning("bracket estimate failed, keeping all vertices active: %s", exc)
        return state
    return update_state(state, bracket)


# -- the active loop ------------------------------------------------------------------------

def algorithm1(sampler, init: ActiveState, q: int, k: int, delta: float,
               est: EstimatorConfig, rng=None, p: Optional[int] = None):
    """Active learning over ``k`` rounds with a budget of ``q`` scalars.

    Round ``w`` spends a fraction ``delta`` of the remaining budget on rows
    over the current active set (all of it in the last round), then updates
    the state.  The returned graph combines the confirmed pairs with a final
    CIT over the last active set.

    Parameters
    ----------
    sampler : callable
        ``draw(m, vertices)`` returning an ``(m, |vertices|)`` array.
    init : ActiveState
    q : int
        Scalar-measurement budget.
    k : int
        Number of rounds.
    delta : float
        Fraction of the remaining budget spent per non-final round.
    est : EstimatorConfig
    rng : numpy Generator or seed, optional
        Drives the subsampling inside stability selection.
    p : int, optional
        Vertex count; defaults to ``max(init.active) + 1``.

    Returns
    -------
    graph : Graph
    ledger : MeasurementLedger
    """
    rng = np.random.default_rng(rng)
    if p is None:
        p = max(init.active) + 1 if init.active else 0
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if k < 1:
        raise ValueError("k must be at least 1")
    if q < len(init.active):
        raise ValueError("budget does not cover one row over the active set")
    state = init
    ledger = MeasurementLedger(p)
    remaining = int(q)
    for w in range(1, k + 1):
        if not state.active:
            break
        act = sorted(state.active)
        frac = 1.0 if w == k else delta
        m = int(math.floor(frac * remaining / len(act)))
        if m > 0:
            ledger.record(act, sampler(m, act))
            remaining -= m * len(act)
        if w < k:
            data = ledger.matrix
            rows = data[~np.isnan(data[:, act]).any(axis=1)]
            if len(rows) >= 2:
                state = find_active_vertices(rows, state, est, rng)
            else:
                logger.info("round %d: fewer than two rows, state unchanged", w)
        ledger.note(state)
    return final_estimate(ledger, state, est), ledger


def final_estimate(ledger: MeasurementLedger, state: ActiveState, est: EstimatorConfig) -> Graph:
    """Confirmed pairs plus a final CIT over the last active set."""
    p = ledger.p
    base = state.force(Graph.empty(p))
    act = sorted(state.active)
    if len(act) < 2:
        return base
    x = ledger.rows_over(act)
    if len(x) < 2:
        logger.warning("no rows over the final active set; returning confirmed edges")
        return base
    try:
        return estimate(x, act, p, est.kappa_final, est, state,
                        oracle=est.selection == "oracle")[0]
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        logger.warning("final estimate failed, returning confirmed edges: %s", exc)
        return base
