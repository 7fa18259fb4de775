"""Ground-truth Gaussian graphical models.

Synthetic generators (chain, hub, cluster, scale-free), exact conditional
correlations from a covariance matrix, difficulty parameters of a model and
the i.i.d. sampler.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .graph import Decomposition, Graph, GraphError, eta as graph_eta, read_graph, write_graph

logger = logging.getLogger(__name__)

PD_FLOOR = 1e-6
ENUMERATION_WARN = 10**7


class ModelError(ValueError):
    """Invalid generator arguments or a matrix that is not positive definite."""


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """Zero-mean Gaussian model Markov on ``graph`` with precision ``theta``.

    ``weak`` lists the vertices the generator placed in the weak region and
    ``repaired`` is set when the precision matrix needed a diagonal shift to
    become positive definite.
    """

    graph: Graph
    theta: np.ndarray
    kind: str = "custom"
    weak: frozenset = frozenset()
    repaired: bool = False
    sigma: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.shape != (self.graph.p, self.graph.p):
            raise ModelError("theta shape does not match the graph")
        if not np.allclose(theta, theta.T, atol=1e-12):
            raise ModelError("theta must be symmetric")
        lam = np.linalg.eigvalsh(theta).min() if theta.size else 1.0
        if lam <= 0:
            raise ModelError(f"theta is not positive definite (min eigenvalue {lam:.3g})")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        if self.sigma is None:
            sigma = np.linalg.inv(theta)
            sigma = (sigma + sigma.T) / 2
        else:
            sigma = np.array(self.sigma, dtype=float)
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "weak", frozenset(self.weak))

    @property
    def p(self) -> int:
        return self.graph.p

    @classmethod
    def from_theta(cls, theta, tol: float = 0.0, **kw) -> "GaussianModel":
        """Build a model whose graph is the off-diagonal support of ``theta``."""
        theta = np.asarray(theta, dtype=float)
        support = np.abs(theta) > tol
        np.fill_diagonal(support, False)
        return cls(Graph.from_adjacency(support), theta, **kw)


# -- generators --------------------------------------------------------------

def _repair(theta: np.ndarray) -> tuple:
    """Shift to positive definiteness, then rescale to unit diagonal."""
    lam = np.linalg.eigvalsh(theta).min()
    if lam > PD_FLOOR:
        return theta, False
    theta = theta + (abs(lam) + 1e-3) * np.eye(len(theta))
    d = 1.0 / np.sqrt(np.diag(theta))
    theta = theta * d[:, None] * d[None, :]
    logger.warning("precision matrix repaired (min eigenvalue was %.3g)", lam)
    return theta, True


def theta_from_degrees(g: Graph, eps: float = 1e-4) -> np.ndarray:
    """Unit diagonal, ``1/max(deg(i), deg(j)) - eps`` on every edge."""
    deg = g.degrees()
    theta = np.eye(g.p)
    for i, j in g.edges:
        theta[i, j] = theta[j, i] = 1.0 / max(deg[i], deg[j]) - eps
    return theta


def _degree_model(g: Graph, eps: float, kind: str, weak) -> GaussianModel:
    theta, repaired = _repair(theta_from_degrees(g, eps))
    return GaussianModel(g, theta, kind=kind, weak=frozenset(weak), repaired=repaired)


def gen_chain(p: int, p1: int, rho1: float = 0.1, rho2: float = 0.3) -> GaussianModel:
    """Path ``0 - 1 - ... - (p-1)``; the first ``p1`` links carry ``rho1``.

    Precision entries are stored with a positive sign.  A zero value drops the
    corresponding edges from the graph.
    """
    if not 0 <= p1 < p:
        raise ModelError(f"need 0 <= p1 < p, got p1={p1}, p={p}")
    theta = np.eye(p)
    for i in range(p - 1):
        theta[i, i + 1] = theta[i + 1, i] = rho1 if i < p1 else rho2
    lam = np.linalg.eigvalsh(theta).min()
    if lam <= 0:
        raise ModelError(f"chain precision not positive definite: min eigenvalue {lam:.4g}")
    edges = [(i, i + 1) for i in range(p - 1) if theta[i, i + 1] != 0]
    weak = range(p1 + 1) if p1 > 0 else ()
    return GaussianModel(Graph.from_edges(p, edges), theta, kind="chain", weak=frozenset(weak))


def gen_two_chain(p: int = 40, p1: int = 20, rho1: float = 0.1, rho2: float = 0.3) -> GaussianModel:
    """Two disjoint paths: ``0..p1-1`` with entries ``rho1``, the rest with ``rho2``."""
    if not 2 <= p1 <= p - 2:
        raise ModelError("each chain needs at least two vertices")
    theta = np.eye(p)
    edges = [(i, i + 1) for i in range(p - 1) if i != p1 - 1]
    for i, j in edges:
        theta[i, j] = theta[j, i] = rho1 if i < p1 else rho2
    if np.linalg.eigvalsh(theta).min() <= 0:
        raise ModelError("two-chain precision not positive definite")
    return GaussianModel(Graph.from_edges(p, edges), theta, kind="two_chain",
                         weak=frozenset(range(p1)))


def _star_blocks(sizes) -> list:
    edges, start = [], 0
    for size in sizes:
        hub = start
        edges += [(hub, hub + k) for k in range(1, size)]
        start += size
    return edges


def gen_hub(p: int, p1: int, eps: float = 1e-4, rng=None) -> GaussianModel:
    """Stars on consecutive blocks: 10-vertex blocks over the first ``p1``
    vertices, 5-vertex blocks over the rest.  Each block's hub is its
    lowest-indexed vertex.  ``rng`` is accepted for interface symmetry; the
    construction is deterministic.
    """
    if p1 % 10 or (p - p1) % 5 or not 0 <= p1 <= p:
        raise ModelError(f"hub needs p1 % 10 == 0 and (p - p1) % 5 == 0 (p={p}, p1={p1})")
    sizes = [10] * (p1 // 10) + [5] * ((p - p1) // 5)
    g = Graph.from_edges(p, _star_blocks(sizes))
    return _degree_model(g, eps, "hub", range(p1))


def _rng(rng):
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def gen_cluster(
    p: int,
    cluster_size: int = 20,
    prob_weak: float = 0.2,
    prob_strong: float = 0.1,
    frac_weak: float = 0.2,
    rng=None,
    eps: float = 1e-4,
) -> GaussianModel:
    """Disjoint Erdős–Rényi clusters; the leading ``frac_weak * p`` vertices
    use ``prob_weak`` and the rest ``prob_strong``.  No inter-cluster edges.
    """
    if cluster_size <= 0 or p % cluster_size:
        raise ModelError(f"p={p} is not divisible by cluster_size={cluster_size}")
    rng = _rng(rng)
    n_weak = int(round(frac_weak * p / cluster_size))
    edges = []
    for c in range(p // cluster_size):
        prob = prob_weak if c < n_weak else prob_strong
        base = c * cluster_size
        for a, b in itertools.combinations(range(cluster_size), 2):
            if rng.random() < prob:
                edges.append((base + a, base + b))
    g = Graph.from_edges(p, edges)
    return _degree_model(g, eps, "cluster", range(n_weak * cluster_size))


def gen_scale_free(p: int, frac_weak: float = 0.2, rng=None, eps: float = 1e-4) -> GaussianModel:
    """Linear preferential attachment, one edge per arriving vertex (a tree).

    Weak vertices are the top ``frac_weak`` fraction by degree (ties to the
    lower index); edges touching them have the smallest precision entries.
    """
    if p < 2:
        raise ModelError("scale-free generator needs p >= 2")
    rng = _rng(rng)
    deg = np.zeros(p)
    edges = [(0, 1)]
    deg[[0, 1]] = 1
    for v in range(2, p):
        target = int(rng.choice(v, p=deg[:v] / deg[:v].sum()))
        edges.append((target, v))
        deg[target] += 1
        deg[v] += 1
    g = Graph.from_edges(p, edges)
    k = int(round(frac_weak * p))
    order = sorted(range(p), key=lambda v: (-deg[v], v))
    return _degree_model(g, eps, "scale_free", order[:k])


GENERATORS = {
    "chain": gen_chain,
    "two_chain": gen_two_chain,
    "hub": gen_hub,
    "cluster": gen_cluster,
    "scale_free": gen_scale_free,
}


def generate(kind: str, rng=None, **params) -> GaussianModel:
    """Dispatch to a named generator; ``rng`` is passed where it is used."""
    if kind not in GENERATORS:
        raise ModelError(f"unknown generator {kind!r}; choose from {sorted(GENERATORS)}")
    if kind in ("cluster", "scale_free", "hub"):
        params["rng"] = rng
    try:
        return GENERATORS[kind](**params)
    except TypeError as exc:
        raise ModelError(f"bad parameters for {kind}: {exc}") from None


# -- sampling ------------------------------------------------------------------

def sample(model: GaussianModel, n: int, vertices=None, rng=None) -> np.ndarray:
    """``n`` i.i.d. rows of ``N(0, Sigma[vertices, vertices])``."""
    if n < 1:
        raise ModelError("n must be at least 1")
    vs = list(range(model.p)) if vertices is None else list(vertices)
    if not vs:
        raise ModelError("vertex set must be non-empty")
    sub = model.sigma[np.ix_(vs, vs)]
    try:
        chol = np.linalg.cholesky(sub)
    except np.linalg.LinAlgError:
        raise ModelError("sub-covariance is singular") from None
    z = _rng(rng).standard_normal((n, len(vs)))
    return z @ chol.T


# -- exact conditional correlations ----------------------------------------------

def exact_cond_corr(sigma: np.ndarray, i: int, j: int, s=()) -> float:
    """Correlation of ``i`` and ``j`` given ``s`` via the Schur complement."""
    s = list(s)
    if i == j or i in s or j in s:
        raise ModelError("i, j must be distinct and outside s")
    ij = [i, j]
    block = sigma[np.ix_(ij, ij)]
    if s:
        cross = sigma[np.ix_(ij, s)]
        try:
            block = block - cross @ np.linalg.solve(sigma[np.ix_(s, s)], cross.T)
        except np.linalg.LinAlgError:
            raise ModelError(f"Sigma[s, s] is singular for s={s}") from None
    return float(np.clip(block[0, 1] / math.sqrt(block[0, 0] * block[1, 1]), -1.0, 1.0))


def _min_abs_corr(sigma, edges, pool_of, max_size) -> Optional[float]:
    """Smallest |rho_ij|S| over edges and S drawn from ``pool_of(i, j)``."""
    best = None
    for i, j in edges:
        pool = sorted(pool_of(i, j))
        for k in range(min(max_size, len(pool)) + 1):
            for s in itertools.combinations(pool, k):
                r = abs(exact_cond_corr(sigma, i, j, s))
                if best is None or r < best:
                    best = r
    return best


def _warn_cost(p, eta, n_edges):
    if n_edges and p ** max(eta, 1) * n_edges > ENUMERATION_WARN:
        logger.warning("exhaustive conditioning-set search over ~%.2g sets", p**eta * n_edges)


def rho_min(model: GaussianModel, eta: int) -> Optional[float]:
    """Smallest |conditional correlation| over edges and sets of size <= eta.

    Returns None for a model without edges.  Cost grows like ``p**eta`` per edge.
    """
    if eta < 0:
        raise ModelError("eta must be non-negative")
    p = model.p
    _warn_cost(p, eta, model.graph.n_edges)
    everyone = frozenset(range(p))
    return _min_abs_corr(model.sigma, model.graph.sorted_edges(),
                         lambda i, j: everyone - {i, j}, eta)


@dataclass(frozen=True)
class DifficultyParams:
    """Minimal conditional correlations (rho*) and normalized precision
    magnitudes (theta*) for a two-cluster split.  ``None`` marks an empty edge set.
    """

    rho0: Optional[float] = None
    rho1: Optional[float] = None
    rho2: Optional[float] = None
    theta1: Optional[float] = None
    theta2: Optional[float] = None


def rho_params(model: GaussianModel, dec: Decomposition, eta: int) -> DifficultyParams:
    if not dec.is_valid(model.graph):
        raise ModelError("decomposition is not valid for the model graph")
    g = model.graph
    _warn_cost(g.p, eta, g.n_edges)
    everyone = frozenset(range(g.p))
    edges = g.sorted_edges()
    rho0 = _min_abs_corr(model.sigma, edges, lambda i, j: everyone - {i, j}, len(dec.t))

    def within(vk):
        sub = [e for e in edges if e[0] in vk and e[1] in vk]
        return _min_abs_corr(model.sigma, sub, lambda i, j: vk - {i, j}, eta)

    return DifficultyParams(rho0=rho0, rho1=within(dec.v1), rho2=within(dec.v2))


def rho_theta_params(model: GaussianModel, dec: Decomposition) -> tuple:
    """``(theta1, theta2)``: min of |Theta_ij| / sqrt(Theta_ii Theta_jj) per cluster."""
    th = model.theta
    out = []
    for vk in (dec.v1, dec.v2):
        vals = [abs(th[i, j]) / math.sqrt(th[i, i] * th[j, j])
                for i, j in model.graph.edges if i in vk and j in vk]
        out.append(min(vals) if vals else None)
    return tuple(out)


def walk_summability_alpha(theta) -> float:
    """Spectral norm of ``I - |theta|``; walk-summable when below 1."""
    theta = np.asarray(theta, dtype=float)
    return float(np.linalg.norm(np.eye(len(theta)) - np.abs(theta), 2))


@dataclass
class AssumptionReport:
    max_variance: float
    a3_sup_abs_corr: float
    a3_ok: bool
    eta_graph: int
    eta_requested: int
    eta_ok: bool
    unit_diagonal: bool
    nonpositive_offdiag: bool
    walk_summability_alpha: float
    walk_summable: bool
    weak_edge_warnings: list = field(default_factory=list)

    def lines(self) -> list:
        return [
            f"max_variance(M) {self.max_variance:.6g}",
            f"a3_sup_abs_corr {self.a3_sup_abs_corr:.6g} < 1 {self.a3_ok}",
            f"eta_graph {self.eta_graph} <= eta {self.eta_requested} {self.eta_ok}",
            f"unit_diagonal {self.unit_diagonal}",
            f"nonpositive_offdiag {self.nonpositive_offdiag}",
            f"walk_summability_alpha {self.walk_summability_alpha:.6g} < 1 {self.walk_summable}",
            f"near_zero_edge_correlations {len(self.weak_edge_warnings)}",
        ]


def check_assumptions(model: GaussianModel, eta: int, n_probe: int = 500, rng=None) -> AssumptionReport:
    """Diagnose the modelling assumptions on ``model``.

    Conditional correlations are probed on ``n_probe`` random ``(i, j, S)``
    triples with ``|S| <= eta``; faithfulness cannot be certified, so edges
    whose probed correlation is near zero are only reported.
    """
    rng = _rng(rng)
    p = model.p
    sup, warn = 0.0, []
    if p >= 2:
        for _ in range(n_probe):
            i, j = (int(v) for v in rng.choice(p, 2, replace=False))
            pool = [v for v in range(p) if v not in (i, j)]
            k = int(rng.integers(0, min(eta, len(pool)) + 1))
            s = tuple(sorted(int(v) for v in rng.choice(pool, k, replace=False))) if k else ()
            r = abs(exact_cond_corr(model.sigma, i, j, s))
            sup = max(sup, r)
            if model.graph.has_edge(i, j) and r < 1e-8:
                warn.append((min(i, j), max(i, j), s))
    th = model.theta
    off = th[~np.eye(p, dtype=bool)]
    alpha = walk_summability_alpha(th)
    e = graph_eta(model.graph)
    return AssumptionReport(
        max_variance=float(np.max(np.diag(model.sigma))),
        a3_sup_abs_corr=sup,
        a3_ok=sup < 1,
        eta_graph=e,
        eta_requested=eta,
        eta_ok=e <= eta,
        unit_diagonal=bool(np.allclose(np.diag(th), 1.0)),
        nonpositive_offdiag=bool(np.all(off <= 0)),
        walk_summability_alpha=alpha,
        walk_summable=alpha < 1,
        weak_edge_warnings=warn,
    )


# -- serialization -----------------------------------------------------------------

def write_model(model: GaussianModel, graph_path, theta_path) -> None:
    write_graph(model.graph, graph_path)
    np.savetxt(theta_path, model.theta, delimiter=",", fmt="%.17g")


def read_model(graph_path, theta_path) -> GaussianModel:
    g = read_graph(graph_path)
    theta = np.loadtxt(theta_path, delimiter=",", ndmin=2)
    theta = (theta + theta.T) / 2
    support = Graph.from_adjacency(np.abs(theta) > 0)
    if support != g:
        raise ModelError("theta support does not match the graph file")
    return GaussianModel(g, theta)


def model_from_config(config, rng=None) -> GaussianModel:
    """Build a model from a mapping (or JSON file path) with a ``kind`` key."""
    if isinstance(config, (str, Path)):
        config = json.loads(Path(config).read_text())
    params = dict(config)
    kind = params.pop("kind", None)
    if kind is None:
        raise ModelError("model config needs a 'kind'")
    return generate(kind, rng=rng, **params)
