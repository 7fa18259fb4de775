"""Threshold selection for CIT: EBIC scoring and the oracle selector."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .chordal import degeneracy, fill_width, is_perfect_elimination, mcs_ordering
from .cit import CovView, InsufficientDataError, cit_path
from .graph import Graph, induced_subgraph, metrics

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2 * math.pi)
DEFAULT_GAMMA = 0.5


def default_tau_grid(n_points: int = 20, lo: float = 0.01, hi: float = 0.9) -> np.ndarray:
    return np.geomspace(lo, hi, n_points)


class MLEConvergenceError(ArithmeticError):
    def __init__(self, residual, sweeps):
        self.residual = residual
        self.sweeps = sweeps
        super().__init__(f"graph-constrained MLE did not converge after {sweeps} sweeps "
                         f"(residual {residual:.3g})")


def fit_precision(s: np.ndarray, g: Graph, tol: float = 1e-6, max_sweeps: int = 500) -> np.ndarray:
    """Maximum-likelihood precision matrix with zeros off ``g``'s edges.

    Fitted one connected component at a time: closed form when the component
    is chordal, otherwise cyclic per-vertex regression updates of the
    covariance estimate.
    """
    p = s.shape[0]
    theta = np.zeros((p, p))
    for comp in g.components():
        idx = list(comp)
        if len(idx) == 1:
            theta[idx[0], idx[0]] = 1.0 / s[idx[0], idx[0]]
            continue
        sub = induced_subgraph(g, idx)
        theta[np.ix_(idx, idx)] = _fit_component(s[np.ix_(idx, idx)], sub, tol, max_sweeps)
    return theta


def _fit_chordal(s, g, ordering):
    """Closed form for decomposable graphs: the product over a perfect
    elimination ordering of each vertex's conditional given its later
    neighbours."""
    p = s.shape[0]
    pos = {v: k for k, v in enumerate(ordering)}
    theta = np.zeros((p, p))
    for v in ordering:
        later = [u for u in g.neighbors(v) if pos[u] > pos[v]]
        fam = [v, *later]
        theta[np.ix_(fam, fam)] += np.linalg.inv(s[np.ix_(fam, fam)])
        if later:
            theta[np.ix_(later, later)] -= np.linalg.inv(s[np.ix_(later, later)])
    return (theta + theta.T) / 2


def _fit_component(s, g, tol, max_sweeps):
    p = s.shape[0]
    if g.n_edges == p * (p - 1) // 2:
        return np.linalg.inv(s)
    ordering = mcs_ordering(g)
    if is_perfect_elimination(g, ordering):
        return _fit_chordal(s, g, ordering)
    w = s.copy()
    nbrs = [list(g.neighbors(j)) for j in range(p)]
    for sweep in range(1, max_sweeps + 1):
        w_old = w.copy()
        for j in range(p):
            nb = nbrs[j]
            row = np.zeros(p)
            if nb:
                beta = np.linalg.solve(w[np.ix_(nb, nb)], s[nb, j])
                row = w[:, nb] @ beta
            row[j] = s[j, j]
            w[j, :] = row
            w[:, j] = row
        change = np.linalg.norm(w - w_old) / max(np.linalg.norm(w_old), 1e-300)
        if not np.isfinite(change):
            raise MLEConvergenceError(change, sweep)
        if change < tol:
            break
    else:
        raise MLEConvergenceError(change, max_sweeps)
    theta = np.linalg.inv(w)
    mask = g.adjacency().astype(bool) | np.eye(p, dtype=bool)
    return np.where(mask, (theta + theta.T) / 2, 0.0)


def _check_fittable(g: Graph, n_rows: int):
    """The MLE exists almost surely once every clique of a chordal cover has
    fewer vertices than observations; refuse denser fits."""
    if g.n_edges == 0 or n_rows > g.p:
        return
    width = degeneracy(g) + 1
    if width < n_rows:
        width = fill_width(g, stop_at=n_rows)
    if width >= n_rows:
        raise InsufficientDataError(range(g.p), n_rows, width + 1)


def _loglik_complete(s, theta, n):
    p = s.shape[0]
    sign, logdet = np.linalg.slogdet(theta)
    if sign <= 0:
        raise MLEConvergenceError(float("nan"), 0)
    return 0.5 * n * (logdet - float(np.sum(s * theta)) - p * LOG_2PI)


def observed_loglik(data: np.ndarray, sigma: np.ndarray) -> float:
    """Sum over rows of the Gaussian log-density of the observed coordinates."""
    obs = ~np.isnan(data)
    patterns, inverse = np.unique(obs, axis=0, return_inverse=True)
    inverse = np.ravel(inverse)
    total = 0.0
    for k, pat in enumerate(patterns):
        cols = np.flatnonzero(pat)
        if not len(cols):
            continue
        rows = data[np.ix_(inverse == k, cols)]
        sub = sigma[np.ix_(cols, cols)]
        chol = np.linalg.cholesky(sub)
        z = np.linalg.solve(chol, rows.T)
        logdet = 2 * np.log(np.diag(chol)).sum()
        total -= 0.5 * (rows.shape[0] * (len(cols) * LOG_2PI + logdet) + float(np.sum(z * z)))
    return total


def ebic_score(data, g: Graph, gamma: float = DEFAULT_GAMMA) -> float:
    """Extended BIC of ``g`` for zero-mean data (``NaN`` = missing).

    ``-2 loglik + |E| log(n_eff) + 4 gamma |E| log p``.  The model is fitted to
    the pairwise-available covariance; with missing entries the likelihood is
    that of each row's observed coordinates.  ``n_eff`` is the mean number
    of observations per variable.
    """
    data = np.asarray(data, dtype=float)
    n, p = data.shape
    if p != g.p:
        raise ValueError("graph and data disagree on the number of variables")
    cv = CovView(data)
    per_var = np.diag(cv.counts)
    if per_var.min() < 2:
        raise InsufficientDataError([int(np.argmin(per_var))], int(per_var.min()), 2)
    pair_min = int(min(cv.counts[i, j] for i, j in g.edges)) if g.edges else n
    _check_fittable(g, min(pair_min, int(per_var.min())))
    theta = fit_precision(cv.cov, g)
    if cv.complete:
        loglik = _loglik_complete(cv.cov, theta, n)
    else:
        sigma = np.linalg.inv(theta)
        loglik = observed_loglik(data, (sigma + sigma.T) / 2)
    n_eff = float(per_var.mean())
    k = g.n_edges
    return -2.0 * loglik + k * math.log(n_eff) + 4.0 * gamma * k * math.log(p)


def saturated_bound(data, gamma: float = DEFAULT_GAMMA):
    """Lower bound on ``-2 loglik`` valid for every graph, or None.

    Only available for complete data with more rows than variables.
    """
    data = np.asarray(data, dtype=float)
    n, p = data.shape
    if np.isnan(data).any() or n <= p:
        return None
    s = data.T @ data / n
    sign, logdet = np.linalg.slogdet(s)
    if sign <= 0:
        return None
    return n * (logdet + p + p * LOG_2PI)


@dataclass
class SelectionPath:
    taus: np.ndarray
    graphs: list
    scores: np.ndarray
    chosen: int
    labels: list = field(default_factory=list)

    @property
    def graph(self) -> Graph:
        return self.graphs[self.chosen]


def argmin_sparse(values, graphs) -> int:
    """Index minimizing ``values``; ties go to the graph with fewer edges."""
    best = None
    for k, v in enumerate(values):
        if not np.isfinite(v):
            continue
        key = (v, graphs[k].n_edges)
        if best is None or key < best[0]:
            best = (key, k)
    if best is None:
        raise ValueError("no finite score on the selection path")
    return best[1]


def score_path(data, graphs, gamma=DEFAULT_GAMMA, exhaustive: bool = True) -> np.ndarray:
    """EBIC for each graph (``inf`` where the fit fails).

    Graphs are visited from sparsest to densest.  Once one is too dense for
    the rows available, denser ones are not attempted.  With
    ``exhaustive=False`` graphs that provably cannot beat the best score
    found so far are skipped (``nan``); the minimizer is unchanged.
    """
    data = np.asarray(data, dtype=float)
    p = data.shape[1]
    scores = np.full(len(graphs), np.nan)
    cache = {}
    bound = None if exhaustive else saturated_bound(data, gamma)
    n_eff = float((~np.isnan(data)).sum(axis=0).mean())
    per_edge = math.log(n_eff) + 4.0 * gamma * math.log(p) if n_eff > 0 else 0.0
    best = math.inf
    too_dense = None
    order = sorted(range(len(graphs)), key=lambda k: graphs[k].n_edges)
    for k in order:
        g = graphs[k]
        key = g.edges
        if key in cache:
            scores[k] = cache[key]
            continue
        if too_dense is not None and too_dense <= key:
            scores[k] = cache[key] = math.inf
            continue
        if bound is not None and bound + per_edge * g.n_edges >= best:
            continue
        try:
            val = ebic_score(data, g, gamma)
        except InsufficientDataError:
            too_dense = key
            val = math.inf
        except (MLEConvergenceError, np.linalg.LinAlgError) as exc:
            logger.debug("EBIC fit failed for %d edges: %s", g.n_edges, exc)
            val = math.inf
        cache[key] = val
        scores[k] = val
        best = min(best, val)
    return scores


def select(data, kappa: int = 2, tau_grid=None, gamma: float = DEFAULT_GAMMA,
           subset=None, exhaustive: bool = True) -> SelectionPath:
    """CIT over a threshold grid, scored by EBIC.

    ``subset`` restricts estimation to those columns; graphs are reported on
    the full vertex set and scored on the subset's columns.
    """
    taus = np.sort(np.asarray(default_tau_grid() if tau_grid is None else tau_grid, dtype=float))
    if not len(taus):
        raise ValueError("tau grid is empty")
    data = np.asarray(data, dtype=float)
    cols = list(range(data.shape[1])) if subset is None else sorted(subset)
    graphs = cit_path(data, kappa, taus, subset=cols)
    local = [induced_subgraph(g, cols) for g in graphs] if subset is not None else graphs
    scores = score_path(data[:, cols], local, gamma, exhaustive)
    return SelectionPath(taus, graphs, scores, argmin_sparse(scores, graphs), cols)


def oracle_index(graphs, truth: Graph) -> int:
    if not graphs:
        raise ValueError("no graphs to select from")
    eds = [metrics(g, truth)[2] for g in graphs]
    return argmin_sparse(eds, graphs)


def oracle_select(path, truth: Graph) -> Graph:
    """Graph on the path closest to ``truth`` in edit distance (ties: sparser)."""
    graphs = path.graphs if isinstance(path, SelectionPath) else list(path)
    return graphs[oracle_index(graphs, truth)]
