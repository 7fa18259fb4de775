"""Randomized invariants checked with hypothesis."""

import itertools
import math

import numpy as np
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from activeggm.active import ActiveState, Bracket, MeasurementLedger, bracket_from_frequencies, update_state
from activeggm.chordal import greedy_fill, is_chordal
from activeggm.cit import cit_path, min_partial_corr
from activeggm.graph import Graph, format_graph, metrics, parse_graph
from activeggm.model import DifficultyParams
from activeggm.twostage import passive_lower_bound, plan_alg4, plan_alg5

SETTINGS = settings(max_examples=60, deadline=None,
                    suppress_health_check=[HealthCheck.too_slow])


@st.composite
def graphs(draw, max_p=9):
    p = draw(st.integers(1, max_p))
    pairs = list(itertools.combinations(range(p), 2))
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph.from_edges(p, [e for e, keep in zip(pairs, mask) if keep])


@st.composite
def graph_pairs(draw):
    a = draw(graphs())
    pairs = list(itertools.combinations(range(a.p), 2))
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return a, Graph.from_edges(a.p, [e for e, keep in zip(pairs, mask) if keep])


@SETTINGS
@given(graph_pairs())
def test_edit_distance_is_symmetric_difference(gs):
    a, b = gs
    ed = metrics(a, b)[2]
    assert ed == len(a.edges ^ b.edges) == metrics(b, a)[2]
    assert a.union(b).edges == a.edges | b.edges
    assert a.difference(b).edges == a.edges - b.edges


@SETTINGS
@given(graphs())
def test_text_round_trip(g):
    assert parse_graph(format_graph(g)) == g


@SETTINGS
@given(graphs())
def test_fill_is_chordal_superset(g):
    res = greedy_fill(g)
    assert g.edges <= res.fill.edges
    assert is_chordal(res.fill)
    for c in res.cliques:
        assert all(res.fill.has_edge(a, b) for a, b in itertools.combinations(c, 2))
    for a, b in itertools.combinations(res.cliques, 2):
        assert not a <= b and not b <= a
    assert all(any({i, j} <= c for c in res.cliques) for i, j in res.fill.edges)


@SETTINGS
@given(graphs(max_p=7))
def test_chordal_graph_needs_no_fill(g):
    fill = greedy_fill(g).fill
    assert greedy_fill(fill).fill == fill


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.integers(3, 7), st.integers(8, 40))
def test_cit_monotone(seed, p, n):
    x = np.random.default_rng(seed).standard_normal((n, p))
    taus = [0.05, 0.1, 0.2, 0.4]
    for k in range(min(3, p - 1)):
        path = cit_path(x, k, taus)
        for lo, hi in zip(path, path[1:]):
            assert hi.edges <= lo.edges
        s_k, s_next = min_partial_corr(x, k), min_partial_corr(x, k + 1)
        assert np.all(s_next <= s_k + 1e-12)


@st.composite
def brackets(draw):
    g_plus = draw(graphs(max_p=8))
    keep = draw(st.lists(st.booleans(), min_size=g_plus.n_edges, max_size=g_plus.n_edges))
    minus = [e for e, k in zip(g_plus.sorted_edges(), keep) if k]
    return Bracket(g_plus, Graph.from_edges(g_plus.p, minus), np.zeros((g_plus.p, g_plus.p)))


@SETTINGS
@given(st.lists(brackets(), min_size=1, max_size=4))
def test_update_state_is_monotone(seq):
    p = seq[0].h_plus.p
    seq = [b for b in seq if b.h_plus.p == p]
    state = ActiveState.initial(p)
    for b in seq:
        new = update_state(state, b)
        new.check(p)
        assert new.active <= state.active
        assert state.confirmed_edges <= new.confirmed_edges
        assert state.confirmed_nonedges <= new.confirmed_nonedges
        assert new.confirmed_edges - state.confirmed_edges <= b.h_minus.edges
        assert not (new.confirmed_nonedges - state.confirmed_nonedges) & b.h_plus.edges
        state = new


@SETTINGS
@given(st.integers(0, 2**32 - 1), st.integers(2, 8),
       st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_bracket_nesting(seed, p, a, b):
    lo, hi = sorted((a, b))
    q = np.random.default_rng(seed).random((p, p))
    q = (q + q.T) / 2
    br = bracket_from_frequencies(q, lo, hi)
    assert br.h_minus.edges <= br.h_plus.edges


@SETTINGS
@given(st.integers(2, 8), st.lists(st.tuples(st.integers(1, 6), st.integers(0, 8)),
                                    min_size=1, max_size=4))
def test_ledger_accounting(p, rounds):
    led = MeasurementLedger(p)
    active = list(range(p))
    total = 0
    for m, drop in rounds:
        active = active[:max(1, len(active) - drop % len(active))]
        led.record(active, np.zeros((m, len(active))))
        total += m * len(active)
    assert led.scalar_count == total
    assert (~np.isnan(led.matrix)).sum() == total


rhos = st.floats(0.01, 0.5)


@SETTINGS
@given(st.integers(2, 2000), rhos, rhos, rhos, st.integers(0, 4), st.floats(0.0, 10.0),
       st.integers(1, 2000))
def test_plan_invariants(p, r0, r1, r2, eta, c2, p1_hat):
    rho = DifficultyParams(rho0=r0, rho1=r1, rho2=r2)
    plan = plan_alg4(p, rho, eta, c2, p1_hat=p1_hat)
    assert plan.n0 >= eta and plan.n1 >= 0
    assert 0 < plan.tau0 < 1 and 0 < plan.tau1 < 1
    five = plan_alg5(p, rho, eta, c2)
    if r0 <= r2:
        assert five.n0 <= plan.n0


@SETTINGS
@given(st.integers(4, 500), st.integers(4, 500), st.integers(0, 2),
       st.floats(0.01, 0.5), st.floats(0.01, 0.5))
def test_lower_bound_decreases_with_signal(p1, p2, d, t1, t2):
    # the logarithms are positive once p_k - d - 1 >= 2e
    assume(p1 >= d + 7 and p2 >= d + 7)
    lb = passive_lower_bound(p1, p2, d, t1, t2)
    stronger = passive_lower_bound(p1, p2, d, min(0.5, t1 * 1.5), t2)
    assert stronger.value <= lb.value + 1e-9 * abs(lb.value)
    assert not lb.vacuous and math.isfinite(lb.value)


@SETTINGS
@given(st.integers(0, 2), st.floats(0.01, 0.5))
def test_lower_bound_boundary_is_vacuous(d, theta):
    lb = passive_lower_bound(d + 2, d + 2, d, theta, theta)
    assert lb.vacuous and lb.value < 0
