"""Conditional-independence-test (CIT) graph estimation.

An edge ``(i, j)`` of the complete graph is deleted when some conditioning
set ``S`` with ``|S| <= kappa`` drives the conditional correlation
``|rho_ij|S|`` to ``tau`` or below.

Without neighbour pruning every pair is tested against every ``S``
independently of the other pairs, so the estimate for any threshold is
``{(i, j) : min_S |rho_ij|S| > tau}``.  :func:`min_partial_corr` computes
that minimum once; thresholding it is equivalent to scanning subsets in
increasing size and lexicographic order and stopping at the first one that
deletes the edge.

Data are ``n x p`` float arrays; ``NaN`` marks a missing measurement.  Each
conditional test uses the rows that jointly observe ``{i, j} | S``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph

logger = logging.getLogger(__name__)


class InsufficientDataError(ValueError):
    """Too few rows jointly observe the vertices of a conditional test."""

    def __init__(self, vertices, available, needed):
        self.vertices = tuple(vertices)
        self.available = available
        self.needed = needed
        super().__init__(
            f"only {available} complete rows over {self.vertices}, need {needed}"
        )


class SingularConditioningError(ArithmeticError):
    pass


# -- covariance views ------------------------------------------------------------

class CovView:
    """Empirical second moments of (possibly ragged) measurements.

    ``cov[a, b]`` is computed over the rows observing both columns ``a`` and
    ``b`` and ``counts[a, b]`` is that row count.  Columns are local positions
    in ``vertices``; the query methods take original vertex labels.
    """

    def __init__(self, data, subset=None, center: bool = False):
        data = np.asarray(data, dtype=float)
        if data.ndim != 2:
            raise ValueError("data must be a 2-d array")
        self.vertices = list(range(data.shape[1])) if subset is None else sorted(int(v) for v in subset)
        x = data[:, self.vertices]
        obs = ~np.isnan(x)
        self.center = center
        if center:
            with np.errstate(invalid="ignore"):
                mean = np.nanmean(np.where(obs, x, np.nan), axis=0)
            x = x - np.nan_to_num(mean)
        self.x = np.where(obs, x, 0.0)
        self.observed = obs
        self.complete = bool(obs.all())
        o = obs.astype(float)
        self.counts = (o.T @ o).astype(int)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.cov = np.where(self.counts > 0, (self.x.T @ self.x) / self.counts, 0.0)
        self.p_total = data.shape[1]
        self._index = {v: k for k, v in enumerate(self.vertices)}

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def _cols(self, vs):
        try:
            return [self._index[int(v)] for v in vs]
        except KeyError as exc:
            raise ValueError(f"vertex {exc.args[0]} not in this view") from None

    def complete_rows(self, subset) -> int:
        cols = self._cols(subset)
        return int(self.observed[:, cols].all(axis=1).sum())

    def block(self, vs, needed: int) -> np.ndarray:
        """Second-moment matrix over rows jointly observing ``vs``."""
        cols = self._cols(vs)
        if self.complete:
            if self.n < needed:
                raise InsufficientDataError(vs, self.n, needed)
            return self.cov[np.ix_(cols, cols)]
        rows = self.observed[:, cols].all(axis=1)
        k = int(rows.sum())
        if k < needed:
            raise InsufficientDataError(vs, k, needed)
        xs = self.x[np.ix_(rows, cols)]
        return xs.T @ xs / k


def empirical_cov(data, subset=None, center: bool = False) -> CovView:
    return CovView(data, subset, center)


def _schur_corr(block: np.ndarray) -> float:
    """Correlation of the first two coordinates given the rest."""
    a = block[:2, :2]
    if block.shape[0] > 2:
        b = block[:2, 2:]
        d = block[2:, 2:]
        try:
            a = a - b @ np.linalg.solve(d, b.T)
        except np.linalg.LinAlgError:
            raise SingularConditioningError("singular conditioning block") from None
        if np.linalg.cond(d) > 1e12:
            raise SingularConditioningError("ill-conditioned conditioning block")
    den = a[0, 0] * a[1, 1]
    if not den > 0:
        raise SingularConditioningError("degenerate conditional variance")
    return float(np.clip(a[0, 1] / math.sqrt(den), -1.0, 1.0))


def emp_cond_corr(cv: CovView, i: int, j: int, s=()) -> float:
    """Empirical ``rho_ij|s`` from the rows observing ``{i, j} | s``."""
    s = list(s)
    if i == j or i in s or j in s:
        raise ValueError("i, j must be distinct and outside s")
    vs = [i, j] + s
    return _schur_corr(cv.block(vs, len(s) + 2))


# -- vectorized minimum over conditioning sets ---------------------------------------

def _corr_from_cov(c: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.clip(np.diag(c), 0, None))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = c / np.outer(d, d)
    return np.clip(r, -1.0, 1.0)


def _scores_complete(c: np.ndarray, kappa: int) -> np.ndarray:
    """min over |S| <= kappa of |rho_ij|S| from a single covariance matrix."""
    p = c.shape[0]
    r = _corr_from_cov(c)
    best = np.abs(r)
    np.fill_diagonal(best, np.inf)
    best[np.isnan(best)] = np.inf
    if kappa >= 1 and p > 2:
        idx = np.arange(p)
        with np.errstate(invalid="ignore", divide="ignore"):
            for k in range(p):
                rk = r[:, k]
                den = np.sqrt(np.outer(1 - rk**2, 1 - rk**2))
                pk = np.clip((r - np.outer(rk, rk)) / den, -1.0, 1.0)
                vals = np.abs(pk)
                vals[k, :] = np.inf
                vals[:, k] = np.inf
                vals[np.isnan(vals)] = np.inf
                np.minimum(best, vals, out=best)
                if kappa >= 2 and k < p - 1:
                    _second_order(best, pk, k, idx[k + 1:])
    if kappa >= 3:
        for size in range(3, kappa + 1):
            for s in itertools.combinations(range(p), size):
                best = np.minimum(best, _abs_partial_given(c, list(s)))
    np.fill_diagonal(best, np.inf)
    return best


def _second_order(best, pk, k, ls, chunk_elems=4_000_000):
    """Fold ``|rho_ij|k,l|`` for every ``l`` in ``ls`` into ``best``.

    ``pk`` holds the partial correlations given ``k``; the second vertex is
    removed with the same one-step recursion.
    """
    p = pk.shape[0]
    step = max(1, chunk_elems // (p * p))
    for start in range(0, len(ls), step):
        part = ls[start:start + step]
        a = pk[:, part]                                   # rho_il|k, shape (p, L)
        num = pk[:, :, None] - a[:, None, :] * a[None, :, :]
        den = np.sqrt((1 - a**2)[:, None, :] * (1 - a**2)[None, :, :])
        v = np.abs(num / den)
        v[np.isnan(v)] = np.inf
        v[k, :, :] = np.inf
        v[:, k, :] = np.inf
        cols = np.arange(len(part))
        v[part, :, cols] = np.inf
        v[:, part, cols] = np.inf
        np.minimum(best, v.min(axis=2), out=best)


def _abs_partial_given(c: np.ndarray, s: list) -> np.ndarray:
    p = c.shape[0]
    out = np.full((p, p), np.inf)
    try:
        d = c[np.ix_(s, s)]
        if np.linalg.cond(d) > 1e12:
            return out
        b = c[:, s]
        cc = c - b @ np.linalg.solve(d, b.T)
    except np.linalg.LinAlgError:
        return out
    v = np.abs(_corr_from_cov(cc))
    v[np.isnan(v)] = np.inf
    v[s, :] = np.inf
    v[:, s] = np.inf
    return v


def _scores_ragged(x: np.ndarray, o: np.ndarray, kappa: int) -> np.ndarray:
    """Complete-case-per-query version of :func:`_scores_complete`.

    For a fixed ``S`` every moment needed by the test of ``(i, j)`` over the
    rows observing ``{i, j} | S`` is a masked cross-product, so all pairs are
    handled by a few matrix products; the Schur complement is written out in
    closed form for ``|S| <= 2``.
    """
    n, p = x.shape
    of = o.astype(float)
    x2 = x * x
    best = np.full((p, p), np.inf)
    kappa = min(kappa, p - 2)

    def fold(s, counts, a, b, c):
        valid = counts >= len(s) + 2
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.abs(c / np.sqrt(a * b))
        r[~valid | ~(a > 0) | ~(b > 0) | np.isnan(r)] = np.inf
        if s:
            r[s, :] = np.inf
            r[:, s] = np.inf
        np.minimum(best, r, out=best)

    with np.errstate(invalid="ignore", divide="ignore"):
        # |S| = 0
        counts = of.T @ of
        cii = x2.T @ of                       # [i, j] = sum x_i^2 o_j
        fold([], counts, cii, cii.T, x.T @ x)
        if kappa >= 1:
            for k in range(p):
                rows = o[:, k]
                xr, ofr, x2r = x[rows], of[rows], x2[rows]
                counts = ofr.T @ ofr
                cii = x2r.T @ ofr
                cij = xr.T @ xr
                cik = (xr * xr[:, [k]]).T @ ofr       # [i, j] = sum x_i x_k o_j
                ckk = (ofr * x2r[:, [k]]).T @ ofr
                ok = ckk > 0
                f = np.where(ok, ckk, 1.0)
                a = cii - cik**2 / f
                b = cii.T - cik.T**2 / f
                c = cij - cik * cik.T / f
                a[~ok] = np.nan
                fold([k], counts, a, b, c)
        if kappa >= 2:
            for k, l in itertools.combinations(range(p), 2):
                rows = o[:, k] & o[:, l]
                nr = int(rows.sum())
                if nr < 4:
                    continue
                xr, ofr, x2r = x[rows], of[rows], x2[rows]
                xk, xl = xr[:, [k]], xr[:, [l]]
                cii = x2r.T @ ofr
                left = np.concatenate([ofr, xr * xk, xr * xl], axis=1)
                prods = left.T @ ofr
                counts, d1, d2 = prods[:p], prods[p:2 * p], prods[2 * p:]
                cij = xr.T @ xr
                right = np.concatenate([ofr * x2r[:, [k]], ofr * (xk * xl), ofr * x2r[:, [l]]], axis=1)
                ff = ofr.T @ right
                f11, f12, f22 = ff[:, :p], ff[:, p:2 * p], ff[:, 2 * p:]
                det = f11 * f22 - f12**2
                ok = det > 1e-12 * np.abs(f11 * f22)
                det = np.where(ok, det, 1.0)
                e1, e2 = d1.T, d2.T
                a = cii - (d1**2 * f22 - 2 * d1 * d2 * f12 + d2**2 * f11) / det
                b = cii.T - (e1**2 * f22 - 2 * e1 * e2 * f12 + e2**2 * f11) / det
                c = cij - (d1 * e1 * f22 - (d1 * e2 + d2 * e1) * f12 + d2 * e2 * f11) / det
                a[~ok] = np.nan
                fold([k, l], counts, a, b, c)
    for size in range(3, kappa + 1):
        for s in itertools.combinations(range(p), size):
            _fold_ragged_generic(best, x, of, list(s))
    np.fill_diagonal(best, np.inf)
    return best


def _fold_ragged_generic(best, x, of, s):
    n, p = x.shape
    size = len(s)
    m = of[:, s].prod(axis=1)
    if m.sum() < size + 2:
        return
    counts = (of * m[:, None]).T @ of
    g = np.empty((p, p, size + 2, size + 2))
    xm = x * m[:, None]
    g[:, :, 0, 1] = g[:, :, 1, 0] = xm.T @ x
    cii = (x * xm).T @ of
    g[:, :, 0, 0] = cii
    g[:, :, 1, 1] = cii.T
    for a, k in enumerate(s):
        cik = (xm * x[:, [k]]).T @ of
        g[:, :, 0, 2 + a] = g[:, :, 2 + a, 0] = cik
        g[:, :, 1, 2 + a] = g[:, :, 2 + a, 1] = cik.T
        for b in range(a, size):
            l = s[b]
            ckl = (of * (m * x[:, k] * x[:, l])[:, None]).T @ of
            g[:, :, 2 + a, 2 + b] = g[:, :, 2 + b, 2 + a] = ckl
    valid = counts >= size + 2
    np.fill_diagonal(valid, False)
    valid[s, :] = False
    valid[:, s] = False
    if not valid.any():
        return
    gv = g[valid]
    dd = gv[:, 2:, 2:]
    ok = np.linalg.cond(dd) < 1e12
    dd = np.where(ok[:, None, None], dd, np.eye(size))
    bb = gv[:, :2, 2:]
    aa = gv[:, :2, :2] - bb @ np.linalg.solve(dd, np.swapaxes(bb, 1, 2))
    den = aa[:, 0, 0] * aa[:, 1, 1]
    ok &= den > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.abs(aa[:, 0, 1] / np.sqrt(den))
    r = np.where(ok, r, np.inf)
    best[valid] = np.minimum(best[valid], r)


def min_partial_corr(data, kappa: int, subset=None, center: bool = False) -> np.ndarray:
    """``M[i, j] = min_{|S| <= kappa} |rho_ij|S|`` over the columns ``subset``.

    Entries are ``inf`` where no conditional test could be evaluated.
    Indices of the returned matrix are positions in ``sorted(subset)``.
    """
    cv = data if isinstance(data, CovView) else CovView(data, subset, center)
    p = len(cv.vertices)
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    if cv.complete:
        if cv.n < 2:
            return np.full((p, p), np.inf)
        # sets with |S| > n - 2 are untestable
        return _scores_complete(cv.cov, min(kappa, p - 2, cv.n - 2))
    return _scores_ragged(cv.x, cv.observed, min(kappa, max(p - 2, 0)))


def graph_from_scores(scores: np.ndarray, tau: float, labels=None, p=None) -> Graph:
    """Keep pair ``(i, j)`` iff ``scores[i, j] > tau``."""
    k = scores.shape[0]
    iu, ju = np.nonzero(np.triu(scores > tau, 1))
    if labels is None:
        return Graph(k, frozenset(zip(iu.tolist(), ju.tolist())))
    labels = list(labels)
    return Graph(p, frozenset((labels[a], labels[b]) for a, b in zip(iu.tolist(), ju.tolist())))


def _warn_untested(scores, labels):
    iu, ju = np.nonzero(np.triu(np.isinf(scores), 1))
    if len(iu):
        logger.warning("%d pairs had no usable conditional test and were retained "
                       "(e.g. %s)", len(iu), (labels[iu[0]], labels[ju[0]]))


# -- estimators ----------------------------------------------------------------------

@dataclass(frozen=True)
class CitConfig:
    """Search cap ``kappa``, threshold ``tau`` and PC-style neighbour pruning."""

    kappa: int = 1
    tau: float = 0.1
    pruned: bool = False
    center: bool = False

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie in (0, 1)")


def cit(data, config: CitConfig, subset=None) -> Graph:
    """CIT estimate over the columns ``subset`` (all columns by default).

    The result lives on the full vertex set of ``data``; vertices outside
    ``subset`` are left isolated.
    """
    data = data if isinstance(data, CovView) else CovView(data, subset, config.center)
    p_full = data.p_total
    if config.pruned:
        return _cit_pruned(data, config, p_full)
    scores = min_partial_corr(data, config.kappa)
    _warn_untested(scores, data.vertices)
    return graph_from_scores(scores, config.tau, data.vertices, p_full)


def cit_path(data, kappa: int, taus, subset=None, center: bool = False) -> list:
    """CIT estimates for every threshold in ``taus`` from a single search."""
    cv = data if isinstance(data, CovView) else CovView(data, subset, center)
    p_full = cv.p_total
    scores = min_partial_corr(cv, kappa)
    return [graph_from_scores(scores, t, cv.vertices, p_full) for t in taus]


def _cit_pruned(cv: CovView, config: CitConfig, p_full: int) -> Graph:
    """PC-style search: ``S`` drawn from current neighbours of ``i`` or ``j``.

    Deletions found at one set size are applied together before the next size.
    """
    verts = cv.vertices
    adj = {v: set(verts) - {v} for v in verts}
    for size in range(config.kappa + 1):
        removals = []
        for i, j in itertools.combinations(verts, 2):
            if j not in adj[i]:
                continue
            pool = sorted((adj[i] | adj[j]) - {i, j})
            if len(pool) < size:
                continue
            tested = False
            for s in itertools.combinations(pool, size):
                try:
                    r = emp_cond_corr(cv, i, j, s)
                except (InsufficientDataError, SingularConditioningError):
                    continue
                tested = True
                if abs(r) <= config.tau:
                    removals.append((i, j))
                    break
            if not tested and size == 0:
                logger.warning("pair (%d, %d) could not be tested marginally", i, j)
        for i, j in removals:
            adj[i].discard(j)
            adj[j].discard(i)
    edges = frozenset((i, j) for i in verts for j in adj[i] if i < j)
    return Graph(p_full, edges)


def cit_population(sigma, kappa: int, tau: float) -> Graph:
    """CIT with exact conditional correlations computed from ``sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    return graph_from_scores(_scores_complete(sigma, kappa), tau)


def population_scores(sigma, kappa: int) -> np.ndarray:
    return _scores_complete(np.asarray(sigma, dtype=float), kappa)


# -- measurement files -------------------------------------------------------------

def write_matrix(x, path) -> None:
    """CSV without header; missing cells are left empty."""
    x = np.asarray(x, dtype=float)
    lines = [",".join("" if math.isnan(v) else repr(float(v)) for v in row) for row in x]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def read_matrix(path) -> np.ndarray:
    """Inverse of :func:`write_matrix`; empty cells become ``NaN``."""
    with open(path) as fh:
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: rows have differing numbers of fields")
    try:
        return np.array([[float(c) if c.strip() else np.nan for c in r] for r in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
