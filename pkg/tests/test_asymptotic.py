import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import linear_graph, orbit_graph
from lyapform.asymptotic import (
    NoCycleError,
    check_all,
    check_condition_II,
    check_condition_III,
    check_condition_IV,
    circulation_asymptotic_cycle,
    estimate_asymptotic_cycle,
    max_cycle_mean_through,
    pair_class,
)
from lyapform.cubical_map import FlowGraph, reweight
from lyapform.oracle import oracle_max_mean, random_graph
from lyapform.recurrence import report_from_sets, xi_recurrent_cells
from lyapform.torus_flow import GOLDEN_ALPHA, integrate_trajectory, linear_field, periodic_orbit_field, zero_field


class TestEstimates:
    def test_zero_field(self):
        est = estimate_asymptotic_cycle(zero_field(), [0.3, 0.4], 50.0, 0.1)
        assert np.array_equal(est.A, [0.0, 0.0])

    @pytest.mark.parametrize("t_total", [20.0, 333.0])
    def test_linear_field(self, t_total):
        est = estimate_asymptotic_cycle(linear_field(), [0.1, 0.9], t_total, 0.1)
        assert est.A == pytest.approx([1.0, GOLDEN_ALPHA], abs=1e-10)
        assert est.pairing([-1.0, 0.0]) == pytest.approx(-1.0, abs=1e-10)

    def test_periodic_orbit(self):
        spec = periodic_orbit_field()
        # period by first return of x1 to an integer along the orbit x2 = 0
        tr = integrate_trajectory(spec, [0.0, 0.0], 1.5, 0.001)
        i = np.argmax(tr.points_unwrapped[:, 0] >= 1.0)
        P = tr.times[i]
        assert abs(P - 1.0) <= 0.001
        est = estimate_asymptotic_cycle(spec, [0.0, 0.0], 1e4, 0.1)
        assert est.A == pytest.approx([1.0 / P, 0.0], abs=1e-6)
        assert pair_class([0.0, 1.0], est.A) == pytest.approx(0.0, abs=1e-6)

    def test_needs_long_horizon(self):
        with pytest.raises(ValueError):
            estimate_asymptotic_cycle(linear_field(), [0, 0], 1.0, 0.1)


class TestPairClass:
    def test_values(self):
        assert pair_class([0.0, 0.0], [1.0, GOLDEN_ALPHA]) == 0.0
        assert pair_class([-1.0, 0.0], [1.0, GOLDEN_ALPHA]) == -1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pair_class([1.0, 0.0], [1.0, 0.0, 0.0])


class TestMaxCycleMean:
    def test_self_loop(self):
        g = FlowGraph.from_edges(2, [(0, 0, -2.0), (0, 1, 5.0)])
        mean, cyc = max_cycle_mean_through(g, [0])
        assert mean == -2.0 and cyc.nodes == (0,)

    def test_max_of_means(self):
        g = FlowGraph.from_edges(3, [(0, 0, -1.0), (1, 2, -3.0), (2, 1, -3.0)])
        assert max_cycle_mean_through(g, [0, 1, 2])[0] == -1.0
        assert max_cycle_mean_through(g, [1])[0] == -3.0

    def test_no_cycle(self):
        g = FlowGraph.from_edges(2, [(0, 1, 1.0)])
        with pytest.raises(NoCycleError):
            max_cycle_mean_through(g, [0, 1])

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=80, deadline=None)
    def test_matches_enumeration(self, seed):
        g = random_graph(np.random.default_rng(seed), max_nodes=10)
        rep = xi_recurrent_cells(g, 0.0)
        for k in np.unique(rep.scc_id[rep.R]):
            restrict = np.flatnonzero(rep.scc_id == k)
            mean, cyc = max_cycle_mean_through(g, restrict)
            assert mean == pytest.approx(oracle_max_mean(g, restrict), abs=1e-8)
            assert cyc.mean == pytest.approx(mean, abs=1e-8)


def reevaluate(graph, cyc):
    """Weight of a witness recomputed from the graph's own edges."""
    e = graph.edge_index(list(cyc.nodes), list(cyc.nodes[1:] + cyc.nodes[:1]))
    assert np.all(e >= 0)
    return float(graph.weight[e].sum())


class TestConditions:
    def test_vacuous(self):
        g = FlowGraph.from_edges(2, [(0, 1, 0.0), (1, 0, 0.0)])
        rep = xi_recurrent_cells(g, 0.0)
        assert len(rep.C_xi) == 0
        res = check_all(g, rep)
        assert all(r.holds for r in res.values())
        assert res["III"].eta == math.inf
        assert json.loads(res["III"].dumps())["eta"] == "inf"

    def test_linear_flow_holds(self):
        g = linear_graph()
        res = check_all(g, xi_recurrent_cells(g))
        assert all(r.holds for r in res.values())
        # every edge is at most -2 + 2/32, so eta is at least that
        assert res["III"].eta >= 2 - 2 / 32
        assert res["III"].eta_per_time == pytest.approx(res["III"].eta / 2.0)
        assert res["III"].parameters["T"] == 2.0
        assert res["III"].parameters["delta"] == pytest.approx(1 / 32)

    def test_flipped_class_fails_with_winding_witness(self):
        g = linear_graph(xi=1.0)
        rep = xi_recurrent_cells(g)
        for r in check_all(g, rep).values():
            assert not r.holds
            A = circulation_asymptotic_cycle(g, r.witness)
            assert pair_class([1.0, 0.0], A) >= 1.0 - 2 / 32 / 2.0
            assert reevaluate(g, r.witness) == pytest.approx(r.witness.weight, abs=1e-9)
            assert r.witness.weight > 0

    def test_eta_single_cycle(self):
        g = FlowGraph.from_edges(2, [(0, 1, -1.0), (1, 0, -2.0)])
        rep = xi_recurrent_cells(g, 0.0)
        res = check_condition_III(g, rep)
        assert res.holds and res.eta == pytest.approx(1.5, abs=1e-9)
        assert check_condition_IV(g, rep).eta == pytest.approx(1.5, abs=1e-9)

    def test_zero_cycle_inside_C_fails_IV(self):
        g = FlowGraph.from_edges(3, [(0, 1, 1.0), (1, 0, -1.0), (1, 2, -1.0), (2, 2, -4.0)])
        rep = report_from_sets(g, [], [0, 1, 2])
        res = check_condition_IV(g, rep)
        assert not res.holds
        assert set(res.witness.nodes) == {0, 1}
        assert reevaluate(g, res.witness) == pytest.approx(0.0, abs=1e-9)
        assert not check_condition_III(g, rep).holds
        assert not check_condition_II(g, rep).holds

    def test_II_needs_weight_one(self):
        g = FlowGraph.from_edges(2, [(0, 1, -0.25), (1, 0, -0.25)])
        rep = xi_recurrent_cells(g, 0.0)
        ii = check_condition_II(g, rep)
        assert not ii.holds
        assert reevaluate(g, ii.witness) > -1
        assert check_condition_IV(g, rep).holds
        # rescaling by 1/eta turns IV into II
        eta = check_condition_III(g, rep).eta
        scaled = g.with_weights(g.weight / eta)
        assert check_condition_II(scaled, xi_recurrent_cells(scaled, 0.0)).holds

    def test_positive_component_fails(self):
        g = FlowGraph.from_edges(3, [(0, 1, 2.0), (1, 0, -1.0), (1, 2, -1.0), (2, 2, -1.0)])
        rep = xi_recurrent_cells(g, 0.0)
        for r in check_all(g, rep).values():
            assert not r.holds
            assert r.witness.weight == pytest.approx(1.0)

    def test_report_json(self):
        g = linear_graph()
        js = json.loads(check_condition_IV(g, xi_recurrent_cells(g)).dumps())
        assert js["holds"] is True and js["witness"] is None
        assert set(js["parameters"]) == {"theta", "delta", "T"}


class TestCirculation:
    def test_self_loop(self):
        g = FlowGraph.from_edges(1, [(0, 0, 0.0, [0.0, 0.0])], tau=2.0)
        assert np.array_equal(circulation_asymptotic_cycle(g, [0]), [0.0, 0.0])

    def test_arithmetic(self):
        g = FlowGraph.from_edges(3, [(0, 1, 0.0, [1.0, 0.0]), (1, 2, 0.0, [1.0, 1.0]), (2, 0, 0.0, [1.0, 0.0])],
                                 tau=2.0)
        assert circulation_asymptotic_cycle(g, [0, 1, 2]) == pytest.approx([0.5, 1 / 6])

    def test_orbit_tube(self):
        g = orbit_graph()
        rep = xi_recurrent_cells(g)
        row0 = np.flatnonzero(g.grid.index_vectors()[:, 1] == 0)
        _, cyc = max_cycle_mean_through(g, row0)
        A = circulation_asymptotic_cycle(g, cyc)
        # each edge is off by at most one landing cell plus one padding cell
        assert np.max(np.abs(A - [1.0, 0.0])) <= 2 / 32 / 2.0
        assert set(cyc.nodes) <= set(rep.R.tolist())


def test_gauge_invariance_of_cycle_weights():
    from lyapform.torus_flow import ClosedOneForm, TrigPoly, TrigTerm

    g = orbit_graph()
    f = TrigPoly([TrigTerm(0.5, (1, 1), "cos")], 2)
    g2 = reweight(g, ClosedOneForm((-1.0, 0.0), f))
    _, cyc = max_cycle_mean_through(g, xi_recurrent_cells(g).R)
    assert reevaluate(g2, cyc) == pytest.approx(reevaluate(g, cyc), abs=1e-9)
