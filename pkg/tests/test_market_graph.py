import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arbgeom import market_graph as mg
from arbgeom.errors import GraphError
from arbgeom.market_graph import MarketGraph
from oracles import cycle_gains, random_directed_graph, random_reciprocal_graph

TRIANGLE = MarketGraph.from_edges([("A", "B", 1.2), ("B", "C", 1.0), ("C", "A", 1.0)])


def consistent(prices, pairs):
    return MarketGraph.from_edges([(a, b, prices[b] / prices[a]) for a, b in pairs])


class TestConstruction:
    @pytest.mark.parametrize("edges", [
        [("A", "A", 1.0)],
        [("A", "B", 0.0)],
        [("A", "B", -1.0)],
        [("A", "B", float("inf"))],
        [("A", "B", 1.0), ("A", "B", 2.0)],
    ])
    def test_invalid_edges(self, edges):
        with pytest.raises(GraphError):
            MarketGraph.from_edges(edges)

    def test_unknown_node(self):
        with pytest.raises(GraphError):
            MarketGraph(["A"], [("A", "B", 1.0)])

    def test_reversed(self):
        r = TRIANGLE.reversed()
        assert r.rate("B", "A") == pytest.approx(1 / 1.2)
        assert not r.has_edge("A", "B")


class TestCycleLogSum:
    def test_triangle(self):
        assert mg.cycle_log_sum(TRIANGLE, ["A", "B", "C", "A"]) == pytest.approx(math.log(1.2), abs=1e-15)

    def test_open_sequence_rejected(self):
        with pytest.raises(GraphError):
            mg.cycle_log_sum(TRIANGLE, ["A", "B", "C"])

    def test_missing_edge(self):
        with pytest.raises(GraphError):
            mg.cycle_log_sum(TRIANGLE, ["A", "C", "B", "A"])


class TestFindArbitrage:
    def test_triangle(self):
        rep = mg.find_arbitrage(TRIANGLE)
        assert rep.cycle == ("A", "B", "C", "A")
        assert rep.log_gain == pytest.approx(0.182322, abs=1e-6)
        assert rep.log_gain == pytest.approx(math.log(1.2), abs=1e-9)

    def test_consistent_graph(self):
        g = consistent({"A": 1.0, "B": 2.0, "C": 0.5}, [("A", "B"), ("B", "C"), ("C", "A"), ("B", "A")])
        assert mg.find_arbitrage(g) is None

    def test_dag_has_no_cycle(self):
        g = MarketGraph.from_edges([("A", "B", 2.0), ("B", "C", 2.0), ("A", "C", 1.0)])
        assert mg.find_arbitrage(g) is None
        assert mg.node_potentials(g) is None  # inconsistent paths without any cycle

    def test_empty(self):
        assert mg.find_arbitrage(MarketGraph(["A"], [])) is None

    def test_below_tolerance(self):
        g = MarketGraph.from_edges([("A", "B", 1.0 + 1e-12), ("B", "A", 1.0)])
        assert mg.find_arbitrage(g) is None
        assert mg.find_arbitrage(g, tol=1e-14) is not None

    def test_two_cycle(self):
        g = MarketGraph.from_edges([("A", "B", 2.0), ("B", "A", 0.6)])
        rep = mg.find_arbitrage(g)
        assert rep.cycle == ("A", "B", "A")
        assert rep.log_gain == pytest.approx(math.log(1.2))

    def test_disconnected_components(self):
        g = MarketGraph.from_edges([
            ("A", "B", 1.0), ("B", "A", 1.0),
            ("C", "D", 1.1), ("D", "E", 1.0), ("E", "C", 1.0),
        ])
        assert mg.find_arbitrage(g).cycle == ("C", "D", "E", "C")

    def test_deterministic(self):
        rng = np.random.default_rng(11)
        g = random_reciprocal_graph(rng, arbitrage=True)
        first = mg.find_arbitrage(g)
        assert all(mg.find_arbitrage(g) == first for _ in range(5))


class TestPotentials:
    def test_consistent(self):
        prices = {"A": 1.0, "B": 2.0, "C": 0.5, "D": 3.0}
        g = consistent(prices, [("A", "B"), ("B", "C"), ("C", "A"), ("A", "D")])
        res = mg.node_potentials(g)
        assert res.reference == "A" and res.potentials["A"] == 0.0
        for a, b, r in g.edges:
            assert res.potentials[b] - res.potentials[a] == pytest.approx(math.log(r), abs=1e-12)
        assert res.potentials["B"] == pytest.approx(math.log(2.0))

    def test_triangle_has_none(self):
        assert mg.node_potentials(TRIANGLE) is None

    def test_components(self):
        g = MarketGraph(["A", "B", "C", "D"], [("A", "B", 2.0), ("C", "D", 3.0)])
        res = mg.node_potentials(g)
        assert res.component_references == ("A", "C")
        assert res.potentials["C"] == 0.0

    def test_isolated_nodes(self):
        res = mg.node_potentials(MarketGraph(["X", "Y"], []))
        assert res.potentials == {"X": 0.0, "Y": 0.0}


class TestTriangularScan:
    def test_triangle(self):
        reps = mg.triangular_scan(TRIANGLE)
        assert [r.cycle for r in reps] == [("A", "B", "C", "A")]

    def test_both_orientations(self):
        g = MarketGraph.from_edges([
            ("A", "B", 1.2), ("B", "C", 1.0), ("C", "A", 1.0),
            ("A", "C", 1.1), ("C", "B", 1.0), ("B", "A", 1.0),
        ])
        reps = mg.triangular_scan(g)
        assert [r.cycle for r in reps] == [("A", "B", "C", "A"), ("A", "C", "B", "A")]
        assert reps[0].log_gain >= reps[1].log_gain

    def test_matches_oracle_triangles(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            g = random_directed_graph(rng, 6)
            expected = sorted(c for c, v in cycle_gains(g).items() if len(c) == 4 and v > 1e-9)
            assert sorted(r.cycle for r in mg.triangular_scan(g)) == expected


class TestSimpleCycles:
    def test_matches_permutation_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            g = random_directed_graph(rng, 6)
            assert sorted(mg.simple_cycles(g)) == sorted(cycle_gains(g))


class TestDuality:
    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_reciprocal_graphs(self, seed):
        g = random_reciprocal_graph(np.random.default_rng(seed), max_nodes=6)
        gains = cycle_gains(g)
        has_arb = any(v > 1e-9 for v in gains.values())
        rep = mg.find_arbitrage(g)
        pots = mg.node_potentials(g)
        assert (rep is not None) == has_arb
        assert (pots is None) == has_arb
        if rep is not None:
            assert rep.cycle in gains
            assert rep.log_gain == pytest.approx(gains[rep.cycle], abs=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_general_graphs(self, seed):
        g = random_directed_graph(np.random.default_rng(seed), max_nodes=6)
        gains = cycle_gains(g)
        rep = mg.find_arbitrage(g)
        assert (rep is not None) == any(v > 1e-9 for v in gains.values())
        if mg.node_potentials(g) is not None:
            assert rep is None

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
    def test_numeraire_invariance(self, seed, scale):
        # rescaling one asset's unit changes rates but no cycle product
        g = random_reciprocal_graph(np.random.default_rng(seed), max_nodes=6)
        tgt = g.nodes[0]
        scaled = MarketGraph(g.nodes, [
            (a, b, r * (scale if b == tgt else 1.0) / (scale if a == tgt else 1.0)) for a, b, r in g.edges
        ])
        assert (mg.find_arbitrage(g) is None) == (mg.find_arbitrage(scaled) is None)


class TestInvariants:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
    def test_unit_change_shifts_potential(self, seed, c):
        g = random_reciprocal_graph(np.random.default_rng(seed), max_nodes=6, arbitrage=False)
        tgt = g.nodes[-1]
        scaled = MarketGraph(g.nodes, [
            (a, b, r * (c if a == tgt else 1.0) / (c if b == tgt else 1.0)) for a, b, r in g.edges
        ])
        before, after = mg.node_potentials(g), mg.node_potentials(scaled)
        assert before is not None and after is not None
        touched = any(tgt in (a, b) for a, b, _ in g.edges)
        if touched and before.reference != tgt:
            assert after.potentials[tgt] - before.potentials[tgt] == pytest.approx(-math.log(c), abs=1e-9)
        for cyc, v in cycle_gains(g).items():
            assert mg.cycle_log_sum(scaled, cyc) == pytest.approx(v, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_reports_recompute(self, seed):
        g = random_directed_graph(np.random.default_rng(seed), max_nodes=7)
        reports = mg.triangular_scan(g)
        found = mg.find_arbitrage(g)
        if found is not None:
            reports.append(found)
        for r in reports:
            assert abs(mg.cycle_log_sum(g, r.cycle) - r.log_gain) <= 1e-12

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_reversal_negates_cycle_sums(self, seed):
        g = random_directed_graph(np.random.default_rng(seed), max_nodes=6)
        r = g.reversed()
        for cyc, v in cycle_gains(g).items():
            assert mg.cycle_log_sum(r, cyc[::-1]) == pytest.approx(-v, abs=1e-12)
