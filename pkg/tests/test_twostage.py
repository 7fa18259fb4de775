import math

import numpy as np
import pytest

from activeggm.active import RowStream
from activeggm.cit import graph_from_scores, min_partial_corr
from activeggm.graph import Decomposition, Graph
from activeggm.model import DifficultyParams, GaussianModel, gen_chain, rho_params
from activeggm.twostage import (
    algorithm4, algorithm4_population, algorithm5, ambiguous_vertices, check_a5_a7, find_split,
    passive_lower_bound, plan_alg4, plan_alg5, recovery_rate, scaling_report, two_chain_model,
    weak_split,
)

RHO = DifficultyParams(rho0=0.3, rho1=0.1, rho2=0.3)


def reader(model, seed):
    return RowStream(model, np.random.default_rng(seed)).reader()


class TestPlans:
    def test_frozen_plug_in(self):
        plan = plan_alg4(400, RHO, 1, 1.0, p1_hat=80)
        # 1 + ceil(log(400) * 3 / 0.09) and 1 + ceil(3 log(80) / 0.01) - n0
        assert plan.n0 == 201
        assert plan.n1 == 1115
        assert plan.tau0 == pytest.approx(0.27)
        assert plan.tau1 == pytest.approx(0.09)

    def test_branches_coincide_at_eta_one(self):
        for r in (0.2, 0.3, 0.45):
            rho = DifficultyParams(rho0=r, rho1=0.1, rho2=r)
            plan = plan_alg4(50, rho, 1, 2.0)
            assert plan.n0 == 1 + math.ceil(2.0 * math.log(50) * 3 / r**2)

    def test_zero_c2_floor(self):
        assert plan_alg4(30, RHO, 2, 0.0).n0 == 2
        assert plan_alg5(10, RHO, 2, 0.0).n0 == 2

    def test_n1_clamped(self):
        plan = plan_alg4(400, DifficultyParams(rho0=0.1, rho1=0.3, rho2=0.1), 1, 1.0)
        assert plan.n1_for(5) == 0

    def test_guards(self):
        with pytest.raises(ValueError):
            plan_alg4(40, DifficultyParams(rho1=0.1, rho2=0.3), 1, 1.0)
        with pytest.raises(ValueError):
            plan_alg5(0, RHO, 1, 1.0)
        with pytest.raises(ValueError):
            plan_alg4(40, RHO, 1, -1.0)

    def test_alg5_never_needs_more_round_one_rows(self):
        for r0 in (0.05, 0.1, 0.2, 0.3):
            rho = DifficultyParams(rho0=r0, rho1=0.1, rho2=0.3)
            for p2 in (5, 20, 40):
                assert plan_alg5(p2, rho, 1, 1.0).n0 <= plan_alg4(40, rho, 1, 1.0).n0


class TestSplit:
    def test_ambiguous(self):
        s = np.array([[0, 0.5, 0.05], [0.5, 0, 0.2], [0.05, 0.2, 0]])
        assert ambiguous_vertices(s, 0.3, 0.1) == {1, 2}
        assert ambiguous_vertices(s, 0.3, 0.1, known={(1, 2)}) == set()

    def test_clean_components_form_v2(self):
        g = Graph.from_edges(6, [(0, 1), (1, 2), (3, 4), (4, 5)])
        assert find_split(g, {0}, 3) == Decomposition({0, 1, 2}, {3, 4, 5}, ())
        # uncapped, cutting at 1 also keeps the clean leaf 2
        dec = find_split(g, {0}, math.inf)
        assert dec.v2 == {1, 2, 3, 4, 5} and dec.t == {1}

    def test_cut_vertex_branch(self):
        # path 0-1-2-3-4 with 0 ambiguous: cut at 1 leaves {2,3,4} clean
        g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
        dec = find_split(g, {0}, math.inf)
        assert dec.t == {1} and dec.v2 == {1, 2, 3, 4}

    def test_cap_limits_v2(self):
        g = Graph.from_edges(7, [(0, 1), (2, 3), (3, 4), (5, 6)])
        assert len(find_split(g, set(), 4).v2) == 4

    def test_no_split(self):
        g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
        dec = find_split(g, {0}, math.inf)
        assert dec.v1 == set(range(4)) and not dec.v2

    def test_weak_split(self):
        model, dec = two_chain_model(12, 6)
        assert weak_split(model) == dec
        chain = weak_split(gen_chain(10, 3))
        assert chain.t == {3} and chain.v1 == set(range(4))


class TestAlgorithms:
    def test_ledger_shape(self):
        model, _ = two_chain_model(40, 20)
        res = algorithm4(reader(model, 3), RHO, 1, 1.0, 40)
        v1 = len(res.split.v1)
        assert res.ledger.scalar_count == res.plan.n0 * 40 + res.n1 * v1
        assert res.n1 == res.plan.n1_for(v1)

    def test_unpacks(self):
        model, _ = two_chain_model(12, 6)
        g, ledger = algorithm4(reader(model, 0), RHO, 1, 1.0, 12)
        assert g.p == 12 and ledger.n_rows > 0

    def test_without_decomposition_is_passive(self):
        # weak 8-cycle: no cut vertex, so stage one cannot isolate a strong part
        p = 8
        theta = np.eye(p)
        for i in range(p):
            theta[i, (i + 1) % p] = theta[(i + 1) % p, i] = 0.15
        g = Graph.from_edges(p, [(i, (i + 1) % p) for i in range(p)])
        model = GaussianModel(g, theta)
        stream = RowStream(model, np.random.default_rng(5))
        res = algorithm4(stream.reader(), RHO, 1, 1.0, p)
        assert not res.split.v2
        rows = stream.rows(0, res.plan.n0 + res.n1)
        passive = graph_from_scores(min_partial_corr(rows, 1), res.plan.tau1)
        assert res.graph == passive

    def test_alg5_stage_one_is_cit_at_strong_threshold(self):
        model, dec = two_chain_model(20, 10)
        stream = RowStream(model, np.random.default_rng(2))
        res = algorithm5(stream.reader(), dec, RHO, 1, 1.0)
        assert res.plan.tau0 == pytest.approx(0.9 * RHO.rho2)
        scores = min_partial_corr(stream.rows(0, res.plan.n0), 1)
        passive = graph_from_scores(scores, res.plan.tau0)
        cross = [(i, j) for i in dec.v1 for j in dec.v2]
        assert all(not res.stage_one.has_edge(i, j) for i, j in cross)
        assert res.stage_one.difference(passive).n_edges == 0

    def test_alg5_empty_strong_cluster(self):
        model = gen_chain(6, 2)
        empty = Decomposition(range(6), (), ())
        with pytest.raises(ValueError):
            algorithm5(reader(model, 0), empty, RHO, 1, 1.0)

    def test_population_recovery(self):
        for p, p1 in ((8, 4), (12, 6), (12, 3)):
            model, dec = two_chain_model(p, p1)
            rho = rho_params(model, dec, 1)
            rho = DifficultyParams(rho0=rho.rho2, rho1=rho.rho1, rho2=rho.rho2)
            assert algorithm4_population(model, rho, 1) == model.graph
        chain = gen_chain(10, 4)
        dec = weak_split(chain)
        r = rho_params(chain, dec, 1)
        rho = DifficultyParams(rho0=r.rho0 or r.rho2, rho1=r.rho1, rho2=r.rho2)
        assert algorithm4_population(chain, rho, 1) == chain.graph

    def test_generous_c2_recovers_two_chain(self):
        model, _ = two_chain_model(40, 20)
        assert recovery_rate(model, RHO, 1, 64.0, range(10)) >= 0.9


class TestAssumptions:
    def test_a5_equality_fails(self):
        rho = DifficultyParams(rho0=0.3, rho1=0.3, rho2=0.3)
        checks = check_a5_a7(40, 40, 2, rho, 1, 1.0)
        assert checks[0].lhs == pytest.approx(checks[0].rhs, rel=1e-12)
        assert not checks[0].holds

    def test_a5_small_rho1(self):
        rho = DifficultyParams(rho0=0.3, rho1=1e-3, rho2=0.3)
        assert check_a5_a7(40, 20, 20, rho, 1, 1.0)[0].holds

    def test_a6_matches_plug_in(self):
        checks = check_a5_a7(400, 80, 320, RHO, 1, 1.0)
        assert checks[1].rhs == pytest.approx(3 * math.log(80) / (201 + 1115 - 1), rel=1e-12)
        assert checks[2].rhs == pytest.approx(3 * math.log(400) / 200, rel=1e-12)
        assert [c.name for c in checks] == ["A5", "A6", "A7", "A5'", "A6'", "A7'"]
        assert "holds" in checks[0].line() or "fails" in checks[0].line()


class TestBounds:
    def test_frozen_value(self):
        lb = passive_lower_bound(100, 5, 2, 0.1, 0.5)
        assert lb.value == pytest.approx(144.07818989717188, rel=1e-12)
        assert not lb.vacuous
        assert lb.scalars(105) == pytest.approx(105 * lb.value)

    def test_vacuous_boundary(self):
        lb = passive_lower_bound(4, 4, 2, 0.3, 0.3)
        assert lb.vacuous and lb.value < 0

    def test_branches_coincide(self):
        lb = passive_lower_bound(50, 50, 1, 0.2, 0.2)
        assert lb.value == pytest.approx(0.5 * math.log(48 / (2 * math.e)) / 0.04, rel=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            passive_lower_bound(3, 10, 2, 0.1, 0.1)
        with pytest.raises(ValueError):
            passive_lower_bound(10, 10, 2, 0.6, 0.1)

    def test_scaling_equal_thetas_fails(self):
        rep = scaling_report(100, 50, 0.2, 0.2, 1)
        assert rep.advantage_lhs == pytest.approx(rep.advantage_rhs, rel=1e-12)
        assert not rep.advantage

    def test_scaling_plug_in(self):
        rep = scaling_report(400, 20, 0.1, 0.3, 2)
        q_p = 400 * math.log(17) / 0.01
        q_a = 380 * math.log(380) / 0.09 + 20 * math.log(20) / 0.01
        assert rep.q_passive == pytest.approx(q_p, rel=1e-12)
        assert rep.q_active == pytest.approx(q_a, rel=1e-12)
        assert rep.ratio == pytest.approx(q_p / q_a, rel=1e-12)
        assert rep.advantage_rhs == pytest.approx(0.09 * 20 * math.log(20) / (380 * math.log(380)),
                                             rel=1e-12)
        assert not rep.advantage
        assert rep.csv_rows()[0] == ("quantity", "value")
