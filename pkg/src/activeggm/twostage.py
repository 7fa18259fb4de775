"""Two-stage active learning for graphs that split into a weak and a strong
cluster, together with its sample-size formulas and the passive lower bound."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .active import MeasurementLedger, RowStream
from .cit import graph_from_scores, min_partial_corr, population_scores
from .graph import Decomposition, Graph, articulation_points, induced_subgraph
from .model import DifficultyParams, GaussianModel, gen_two_chain

logger = logging.getLogger(__name__)

THRESHOLD_FACTOR = 0.9
# pairs scoring at or below this fraction of the stage-one signal level count
# as settled non-edges when searching for the reliable cluster
NULL_FACTOR = 0.1


# -- sample-size plans --------------------------------------------------------------------

@dataclass(frozen=True)
class TwoStagePlan:
    """Row counts and thresholds for the two stages.

    ``n1`` is only known once the size of the weak cluster is estimated;
    ``n1_for(p1_hat)`` evaluates it.  ``p2_cap`` is the largest strong
    cluster whose edges ``n0`` rows suffice for.
    """

    n0: int
    tau0: float
    tau1: float
    eta: int
    c2: float
    rho: DifficultyParams
    null_level: float
    p2_cap: float
    n1: Optional[int] = None

    def stage_two_total(self, p1_hat: int) -> int:
        """Rows the weak cluster needs in total (before subtracting ``n0``)."""
        log_p1 = math.log(p1_hat) if p1_hat > 1 else 0.0
        return self.eta + math.ceil(self.c2 * (self.eta + 2) * log_p1 / self.rho.rho1**2)

    def n1_for(self, p1_hat: int) -> int:
        extra = self.stage_two_total(p1_hat) - self.n0
        if extra < 0:
            logger.info("n1 = %d clamped to 0: stage one already suffices", extra)
        return max(extra, 0)


def _require(rho: DifficultyParams, names):
    for name in names:
        val = getattr(rho, name)
        if val is None or not val > 0:
            raise ValueError(f"{name} must be a positive number, got {val!r}")


def _check_common(eta, c2):
    if eta < 0:
        raise ValueError("eta must be non-negative")
    if c2 < 0:
        raise ValueError("c2 must be non-negative")


def _p2_cap(n0, eta, c2, rho2):
    """Largest p2 with ``eta + c2 rho2^-2 (eta+2) log p2 <= n0``."""
    if c2 == 0:
        return math.inf
    try:
        return math.exp((n0 - eta) * rho2**2 / (c2 * (eta + 2)))
    except OverflowError:
        return math.inf


def plan_alg4(p: int, rho: DifficultyParams, eta: int, c2: float,
              p1_hat: Optional[int] = None) -> TwoStagePlan:
    """Row counts for the two-stage algorithm without prior knowledge.

    ``n0 = eta + ceil(c2 log p max(3 rho0^-2, rho2^-2 (eta+2)))``,
    ``tau0 = 0.9 min(rho0, rho2)``, ``tau1 = 0.9 rho1`` and
    ``n1 = eta + ceil(c2 rho1^-2 (eta+2) log p1_hat) - n0`` clamped at 0.
    """
    _require(rho, ("rho0", "rho1", "rho2"))
    _check_common(eta, c2)
    if p < 2:
        raise ValueError("p must be at least 2")
    lead = max(3.0 / rho.rho0**2, (eta + 2) / rho.rho2**2)
    n0 = eta + math.ceil(c2 * math.log(p) * lead)
    low = min(rho.rho0, rho.rho2)
    plan = TwoStagePlan(n0, THRESHOLD_FACTOR * low, THRESHOLD_FACTOR * rho.rho1, eta, c2, rho,
                        NULL_FACTOR * low, _p2_cap(n0, eta, c2, rho.rho2))
    if p1_hat is not None:
        plan = _with_n1(plan, p1_hat)
    return plan


def plan_alg5(p2: int, rho: DifficultyParams, eta: int, c2: float,
              p1_hat: Optional[int] = None) -> TwoStagePlan:
    """Row counts when the split is known in advance.

    ``n0 = eta + ceil(c2 rho2^-2 (eta+2) log p2)`` and ``tau0 = 0.9 rho2``.
    """
    _require(rho, ("rho1", "rho2"))
    _check_common(eta, c2)
    if p2 < 1:
        raise ValueError("the strong cluster is empty; log p2 is undefined")
    n0 = eta + math.ceil(c2 * (eta + 2) * math.log(p2) / rho.rho2**2)
    plan = TwoStagePlan(n0, THRESHOLD_FACTOR * rho.rho2, THRESHOLD_FACTOR * rho.rho1, eta, c2,
                        rho, NULL_FACTOR * rho.rho2, max(_p2_cap(n0, eta, c2, rho.rho2), p2))
    if p1_hat is not None:
        plan = _with_n1(plan, p1_hat)
    return plan


def _with_n1(plan: TwoStagePlan, p1_hat: int) -> TwoStagePlan:
    from dataclasses import replace

    return replace(plan, n1=plan.n1_for(p1_hat))


# -- step 3: locating the reliable cluster ---------------------------------------------------

def ambiguous_vertices(scores: np.ndarray, tau: float, null_level: float, known=None) -> set:
    """Vertices with a pair whose score is neither above ``tau`` nor at most
    ``null_level``.  Pairs in ``known`` are treated as settled."""
    s = np.array(scores, dtype=float, copy=True)
    if known is not None:
        for i, j in known:
            s[i, j] = s[j, i] = -np.inf
    np.fill_diagonal(s, -np.inf)
    unsettled = (s > null_level) & (s <= tau)
    return set(np.flatnonzero(unsettled.any(axis=1)).tolist())


def _best_subset(items, cap):
    """Indices of ``items`` (sizes) maximizing the total without exceeding
    ``cap``; ties prefer earlier items."""
    if sum(items) <= cap:
        return list(range(len(items)))
    limit = int(min(cap, sum(items)))
    reach = {0: []}
    for k, size in enumerate(items):
        for total, picked in sorted(reach.items(), reverse=True):
            new = total + size
            if new <= limit and new not in reach:
                reach[new] = picked + [k]
    return reach[max(reach)]


def find_split(g_hat: Graph, ambiguous, p2_cap: float) -> Decomposition:
    """Split maximizing the reliable cluster ``V2`` subject to ``|V2| <= p2_cap``.

    ``V2`` minus the separator must avoid ambiguous vertices.  Candidates are
    unions of clean connected components, optionally extended by clean
    branches hanging off a single cut vertex.  Ties prefer no separator,
    then the lowest cut vertex.
    """
    p = g_hat.p
    everyone = frozenset(range(p))
    comps = [frozenset(c) for c in g_hat.components()]
    clean = [c for c in comps if not c & ambiguous]
    dirty = [c for c in comps if c & ambiguous]
    best = (0, frozenset(), frozenset())

    def consider(v2, t):
        nonlocal best
        if len(v2) > best[0]:
            best = (len(v2), v2, t)

    picked = _best_subset([len(c) for c in clean], p2_cap)
    consider(frozenset().union(*(clean[k] for k in picked)), frozenset())
    for comp in dirty:
        if len(comp) < 3:
            continue
        sub = induced_subgraph(g_hat, comp)
        for cut_local in articulation_points(sub):
            t = sub.labels[cut_local]
            rest = induced_subgraph(g_hat, comp - {t})
            branches = [frozenset(rest.labels[k] for k in c) for c in rest.components()]
            good = [b for b in branches if not b & ambiguous]
            if not good:
                continue
            sizes = [len(c) for c in clean] + [len(b) for b in good]
            chosen = _best_subset(sizes, p2_cap - 1)
            parts = [clean[k] if k < len(clean) else good[k - len(clean)] for k in chosen]
            if not any(k >= len(clean) for k in chosen):
                continue
            consider(frozenset().union(*parts) | {t}, frozenset({t}))
    _, v2, t = best
    if not v2:
        return Decomposition(everyone, frozenset(), frozenset())
    return Decomposition((everyone - v2) | t, v2, t)


# -- the algorithms ---------------------------------------------------------------------------

@dataclass
class TwoStageResult:
    """Output graph, measurement ledger and the intermediate choices.

    Unpacks as ``graph, ledger``.
    """

    graph: Graph
    ledger: MeasurementLedger
    plan: TwoStagePlan
    split: Decomposition
    stage_one: Graph
    n1: int
    ambiguous: set = field(default_factory=set)

    def __iter__(self):
        return iter((self.graph, self.ledger))


def _known_cross(dec: Decomposition) -> set:
    a, b = dec.v1 - dec.t, dec.v2 - dec.t
    return {(min(i, j), max(i, j)) for i in a for j in b}


def _cit_scores(x, eta, known, cols=None):
    """Min-score matrix over ``cols`` (sorted) with known non-edges forced out."""
    s = min_partial_corr(x, eta)
    if known:
        pos = {v: k for k, v in enumerate(cols)} if cols is not None else None
        for i, j in known:
            if pos is None:
                s[i, j] = s[j, i] = -np.inf
            elif i in pos and j in pos:
                s[pos[i], pos[j]] = s[pos[j], pos[i]] = -np.inf
    return s


def _run(sampler, p, plan, eta, known, kappa):
    kappa = eta if kappa is None else kappa
    everyone = list(range(p))
    ledger = MeasurementLedger(p)
    x0 = np.asarray(sampler(plan.n0, everyone), dtype=float)
    ledger.record(everyone, x0)
    scores = _cit_scores(x0, kappa, known)
    g_hat = graph_from_scores(scores, plan.tau0)
    amb = ambiguous_vertices(scores, plan.tau0, plan.null_level, known)
    split = find_split(g_hat, amb, plan.p2_cap)
    v1 = sorted(split.v1)
    n1 = plan.n1_for(len(v1))
    strong = induced_subgraph(g_hat, sorted(split.v2)).relabel(sorted(split.v2), p) \
        if split.v2 else Graph.empty(p)
    if n1 == 0:
        logger.info("stage two skipped (n1 = 0)")
        return TwoStageResult(g_hat, ledger, plan, split, g_hat, 0, amb)
    ledger.record(v1, sampler(n1, v1))
    x1 = ledger.rows_over(v1)
    s1 = _cit_scores(x1, kappa, known, v1)
    weak = graph_from_scores(s1, plan.tau1, v1, p)
    return TwoStageResult(weak.union(strong), ledger, plan, split, g_hat, n1, amb)


def algorithm4(sampler, rho: DifficultyParams, eta: int, c2: float, p: int,
               rng=None, kappa: Optional[int] = None) -> TwoStageResult:
    """Two-stage active learning with no knowledge of the split.

    Parameters
    ----------
    sampler : callable
        ``draw(m, vertices)`` returning ``(m, |vertices|)`` rows.
    rho : DifficultyParams
        ``rho0``, ``rho1`` and ``rho2`` must be set.
    eta : int
        Separator bound; also the conditioning-set cap unless ``kappa`` is given.
    c2 : float
        Sample-size constant.
    p : int
        Number of vertices.
    rng : ignored
        Accepted for a uniform signature; all randomness is in ``sampler``.

    Returns
    -------
    TwoStageResult
        Unpacks as ``(graph, ledger)``.
    """
    plan = plan_alg4(p, rho, eta, c2)
    return _run(sampler, p, plan, eta, set(), kappa)


def algorithm5(sampler, dec_prior: Decomposition, rho: DifficultyParams, eta: int, c2: float,
               rng=None, kappa: Optional[int] = None) -> TwoStageResult:
    """Two-stage learning when ``dec_prior.t`` is known to separate the clusters.

    Pairs across the split are fixed as non-edges and never tested.
    """
    p = len(dec_prior.v1 | dec_prior.v2)
    if dec_prior.v1 | dec_prior.v2 != frozenset(range(p)):
        raise ValueError("the prior split must cover vertices 0..p-1")
    plan = plan_alg5(len(dec_prior.v2), rho, eta, c2)
    return _run(sampler, p, plan, eta, _known_cross(dec_prior), kappa)


def algorithm4_population(model: GaussianModel, rho: DifficultyParams, eta: int,
                          kappa: Optional[int] = None) -> Graph:
    """Both stages with exact conditional correlations in place of estimates."""
    kappa = eta if kappa is None else kappa
    plan = plan_alg4(model.p, rho, eta, 1.0)
    scores = population_scores(model.sigma, kappa)
    g_hat = graph_from_scores(scores, plan.tau0)
    amb = ambiguous_vertices(scores, plan.tau0, plan.null_level)
    split = find_split(g_hat, amb, math.inf)
    v1, v2 = sorted(split.v1), sorted(split.v2)
    strong = induced_subgraph(g_hat, v2).relabel(v2, model.p) if v2 else Graph.empty(model.p)
    s1 = population_scores(model.sigma[np.ix_(v1, v1)], kappa)
    return graph_from_scores(s1, plan.tau1, v1, model.p).union(strong)


# -- fixtures and calibration -------------------------------------------------------------------

def two_chain_model(p: int = 40, p1: int = 20, rho1: float = 0.1, rho2: float = 0.3):
    """The two-path model and its split (weak path first, no separator)."""
    model = gen_two_chain(p, p1, rho1, rho2)
    dec = Decomposition(frozenset(range(p1)), frozenset(range(p1, p)), frozenset())
    return model, dec


def weak_split(model: GaussianModel) -> Decomposition:
    """A split putting the model's weak vertices in ``V1``.

    ``V1`` is the union of components touching a weak vertex.  When that is
    everything, a cut vertex leaving all weak vertices on one side is used,
    choosing the one with the largest strong side (lowest index on ties).
    """
    g = model.graph
    weak = set(model.weak)
    everyone = frozenset(range(g.p))
    if not weak:
        raise ValueError("model has no weak vertices to anchor the split")
    v1 = frozenset().union(*(frozenset(c) for c in g.components() if weak & set(c)))
    if v1 != everyone:
        return Decomposition(v1, everyone - v1, frozenset())
    best = None
    for t in articulation_points(g):
        rest = induced_subgraph(g, everyone - {t})
        parts = [frozenset(rest.labels[k] for k in c) for c in rest.components()]
        strong = frozenset().union(*(c for c in parts if not c & weak))
        if strong and (best is None or len(strong) > len(best[1])):
            best = (t, strong)
    if best is None:
        raise ValueError("no split with |T| <= 1 separates the weak vertices")
    t, strong = best
    return Decomposition((everyone - strong), strong | {t}, frozenset({t}))


def recovery_rate(model: GaussianModel, rho: DifficultyParams, eta: int, c2: float,
                  seeds, alg: int = 4, dec: Optional[Decomposition] = None) -> float:
    """Fraction of seeds on which the algorithm returns the true graph.

    Seed ``s`` always drives the same row stream, so larger ``c2`` sees a
    superset of the rows seen by a smaller one.
    """
    hits = 0
    seeds = list(seeds)
    for s in seeds:
        draw = RowStream(model, np.random.default_rng(s)).reader()
        if alg == 4:
            res = algorithm4(draw, rho, eta, c2, model.p)
        else:
            res = algorithm5(draw, dec, rho, eta, c2)
        hits += res.graph == model.graph
    return hits / len(seeds)


def calibrate_c2(model: GaussianModel, rho: DifficultyParams, eta: int, target: float = 0.9,
                 seeds=range(50), lo: float = 0.5, hi: float = 8.0, steps: int = 8,
                 alg: int = 4, dec: Optional[Decomposition] = None) -> float:
    """Smallest ``c2`` (to a geometric bisection tolerance) reaching ``target``.

    ``hi`` is doubled until it succeeds; the search then bisects on a log scale.
    """
    seeds = list(seeds)
    rate = lambda c: recovery_rate(model, rho, eta, c, seeds, alg, dec)  # noqa: E731
    if rate(lo) >= target:
        return lo
    for _ in range(20):
        if rate(hi) >= target:
            break
        lo, hi = hi, hi * 2
    else:
        raise RuntimeError("no c2 up to the search limit reaches the target rate")
    for _ in range(steps):
        mid = math.sqrt(lo * hi)
        if rate(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


# -- assumption checks and bounds -------------------------------------------------------------------

@dataclass(frozen=True)
class Inequality:
    name: str
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs > self.rhs

    def line(self) -> str:
        verdict = "holds" if self.holds else "fails"
        return f"{self.name}: {self.lhs:.6g} > {self.rhs:.6g} {verdict}"


def check_a5_a7(p: int, p1: int, p2: int, rho: DifficultyParams, eta: int, c2: float,
                c1: float = 1.0) -> list:
    """Both sides of the sufficient conditions for the two algorithms.

    The first three entries concern the algorithm without prior knowledge,
    the last three the variant given the split.  Row counts come from the
    corresponding plans with ``p1_hat = p1``.
    """
    _require(rho, ("rho0", "rho1", "rho2"))
    a4 = plan_alg4(p, rho, eta, c2, p1_hat=p1)
    a5 = plan_alg5(p2, rho, eta, c2, p1_hat=p1)
    r0, r1, r2 = rho.rho0, rho.rho1, rho.rho2
    k = eta + 2
    lp, lp1, lp2 = math.log(p), math.log(p1), math.log(p2)

    def ratio(num, rows):
        return num / rows if rows > 0 else math.inf

    return [
        Inequality("A5", k / r1**2 * lp1, max(3 / r0**2, k / r2**2) * lp),
        Inequality("A6", 0.9 * r1, ratio(c1 * k * lp1, a4.n0 + a4.n1 - eta)),
        Inequality("A7", 0.9 * min(r0, r2), ratio(c1 * k * lp, a4.n0 - eta)),
        Inequality("A5'", lp1 / r1**2, lp / r2**2),
        Inequality("A6'", 0.9 * r2, ratio(c1 * k * lp2, a5.n0 - eta)),
        Inequality("A7'", 0.9 * r1, ratio(c1 * k * lp1, a5.n0 + a5.n1 - eta)),
    ]


@dataclass(frozen=True)
class LowerBound:
    value: float
    vacuous: bool

    def scalars(self, p: int) -> float:
        """Scalar-measurement form of the bound for ``p`` vertices."""
        return p * self.value


def passive_lower_bound(p1: int, p2: int, d: int, theta1: float, theta2: float) -> LowerBound:
    """Rows any passive method needs:
    ``0.5 max(theta1^-2 log((p1-d-1)/(2e)), theta2^-2 log((p2-d-1)/(2e)))``.

    The bound is flagged vacuous when it is not positive.
    """
    for th in (theta1, theta2):
        if not 0 < th <= 0.5:
            raise ValueError("theta values must lie in (0, 0.5]")
    if p1 - d - 1 <= 0 or p2 - d - 1 <= 0:
        raise ValueError("need p1 > d + 1 and p2 > d + 1 for the logarithm")
    two_e = 2 * math.e
    val = 0.5 * max(math.log((p1 - d - 1) / two_e) / theta1**2,
                    math.log((p2 - d - 1) / two_e) / theta2**2)
    return LowerBound(val, val <= 0)


@dataclass(frozen=True)
class ScalingReport:
    q_passive: float
    q_active: float
    advantage_lhs: float
    advantage_rhs: float
    p: int
    p1: int
    p2: int

    @property
    def advantage(self) -> bool:
        """Whether the weak cluster is weak enough for the active count to win."""
        return self.advantage_lhs < self.advantage_rhs

    @property
    def ratio(self) -> float:
        return self.q_passive / self.q_active

    def csv_rows(self) -> list:
        return [("quantity", "value"), ("q_passive", self.q_passive), ("q_active", self.q_active),
                ("ratio", self.ratio), ("advantage_lhs", self.advantage_lhs),
                ("advantage_rhs", self.advantage_rhs), ("advantage", int(self.advantage))]


def scaling_report(p: int, p1: int, theta1: float, theta2: float, d: int, eta: int = 1,
                   t: int = 0) -> ScalingReport:
    """Passive and active scalar-count scalings (constants set to 1) and the
    condition under which the active count is smaller.

    ``q_passive = p theta1^-2 log(p1-d-1)``,
    ``q_active = (p-p1) theta2^-2 log p2 + p1 theta1^-2 log p1`` with
    ``p2 = p - p1 + t``, and the condition
    ``theta1^2 < theta2^2 p1 log p1 / ((p-p1) log p2)``.  ``eta`` enters only
    through the constants and is accepted for completeness.
    """
    p2 = p - p1 + t
    if p1 - d - 1 <= 0 or p2 <= 1 or p1 <= 1:
        raise ValueError("need p1 > d + 1 and p1, p2 > 1")
    q_passive = p * math.log(p1 - d - 1) / theta1**2
    q_active = (p - p1) * math.log(p2) / theta2**2 + p1 * math.log(p1) / theta1**2
    rhs = theta2**2 * p1 * math.log(p1) / ((p - p1) * math.log(p2))
    return ScalingReport(q_passive, q_active, theta1**2, rhs, p, p1, p2)
