"""Tests for dag_core module."""

import itertools
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from dag_core import (
    Dag,
    build_dag,
    classify_triple,
    d_separated_by_paths,
    is_d_separated,
    random_dag,
    relations,
)
from errors import CycleError, DuplicateError, OverlapError, UnknownNodeError
from scenarios import scenario_graph
from tests.fixtures.test_data import (
    BaseTestCase,
    figure_1_dag,
    figure_3_dag,
    named_dag,
)


@st.composite
def dags(draw, max_nodes: int = 7) -> Dag:
    """Random DAGs: a random order plus a random subset of forward edges."""
    n = draw(st.integers(min_value=2, max_value=max_nodes))
    pairs = list(itertools.combinations(range(n), 2))
    mask = draw(st.lists(st.booleans(), min_size=len(pairs),
                         max_size=len(pairs)))
    order = draw(st.permutations(range(n)))
    edges = [
        (f"V{order[i] + 1}", f"V{order[j] + 1}")
        for (i, j), on in zip(pairs, mask, strict=True) if on
    ]
    return named_dag(n, edges)


class TestBuildDag(BaseTestCase):
    """Test cases for build_dag and graph validation."""

    def test_handles_follow_declaration_order(self):
        """Test node handles are assigned in declaration order."""
        dag = build_dag([("A", True), ("U", False), ("Y", True)],
                        [("A", "Y"), ("U", "Y")])
        self.assertEqual(dag.node_id("A"), 0)
        self.assertEqual(dag.node_id("Y"), 2)
        self.assertEqual(dag.parents(2), (0, 1))
        self.assertFalse(dag.is_observed(1))
        self.assertEqual(dag.observed_nodes, (0, 2))

    def test_duplicate_name_raises(self):
        """Test two nodes with one name are rejected."""
        with self.assertRaises(DuplicateError):
            build_dag([("A", True), ("A", True)], [])

    def test_duplicate_edge_raises(self):
        """Test the same edge twice is rejected."""
        with self.assertRaises(DuplicateError):
            named_dag(2, [("V1", "V2"), ("V1", "V2")])

    def test_unknown_endpoint_raises(self):
        """Test edges must reference declared nodes."""
        with self.assertRaises(UnknownNodeError):
            named_dag(2, [("V1", "V9")])
        # lookup errors are also KeyErrors
        with self.assertRaises(KeyError):
            named_dag(2, []).node_id("V9")

    def test_self_edge_raises(self):
        """Test a self-loop is a cycle."""
        with self.assertRaises(CycleError):
            named_dag(2, [("V1", "V1")])

    def test_cycle_raises(self):
        """Test directed cycles are rejected."""
        with self.assertRaises(CycleError):
            named_dag(3, [("V1", "V2"), ("V2", "V3"), ("V3", "V1")])

    def test_edge_names_sorted(self):
        """Test edge_names lists named edges in sorted order."""
        dag = named_dag(3, [("V2", "V3"), ("V1", "V2")])
        self.assertEqual(dag.edge_names(), [("V1", "V2"), ("V2", "V3")])

    def test_topological_order_is_deterministic(self):
        """Test parents always come before children."""
        dag = named_dag(4, [("V4", "V1"), ("V3", "V2")])
        order = dag.topological_order()
        self.assertEqual(order, dag.topological_order())
        self.assertLess(order.index(3), order.index(0))
        self.assertLess(order.index(2), order.index(1))

    def test_without_incoming_cuts_edges(self):
        """Test mutilation removes only the edges into the given nodes."""
        dag = figure_3_dag()
        v4 = dag.node_id("V4")
        cut = dag.without_incoming([v4])
        self.assertEqual(cut.parents(v4), ())
        self.assertEqual(len(cut.edges), len(dag.edges) - 2)


class TestRelations(BaseTestCase):
    """Test cases for relations."""

    def setUp(self):
        super().setUp()
        self.dag = figure_3_dag()
        self.ids = {self.dag.name(v): v for v in self.dag.nodes}

    def test_root(self):
        """Test a root has no ancestors."""
        rel = relations(self.dag, self.ids["V1"])
        self.assertTrue(rel.is_root)
        self.assertFalse(rel.is_leaf)
        self.assertEqual(rel.parents, frozenset())
        self.assertEqual(
            rel.descendants,
            frozenset(self.ids[n] for n in ("V2", "V4", "V5", "V6")),
        )

    def test_leaf(self):
        """Test a leaf has no descendants and is not its own ancestor."""
        v6 = self.ids["V6"]
        rel = relations(self.dag, v6)
        self.assertTrue(rel.is_leaf)
        self.assertNotIn(v6, rel.ancestors)
        self.assertEqual(
            rel.ancestors,
            frozenset(self.ids[n] for n in ("V1", "V2", "V3", "V5")),
        )

    def test_unknown_handle(self):
        """Test unknown handles raise UnknownNodeError."""
        with self.assertRaises(UnknownNodeError):
            relations(self.dag, 42)

    def test_isolated_node(self):
        """Test an isolated node is both a root and a leaf."""
        dag = named_dag(3, [("V1", "V2")])
        rel = relations(dag, dag.node_id("V3"))
        self.assertEqual(rel.parents, frozenset())
        self.assertEqual(rel.ancestors, frozenset())
        self.assertEqual(rel.descendants, frozenset())
        self.assertTrue(rel.is_root)
        self.assertTrue(rel.is_leaf)

    def test_empty_graph(self):
        """Test a graph with no nodes and no edges is valid."""
        dag = build_dag([], [])
        self.assertEqual(len(dag), 0)
        self.assertEqual(dag.edge_names(), [])
        self.assertEqual(dag.topological_order(), ())
        self.assertEqual(dag.observed_nodes, ())

    @settings(max_examples=100, deadline=None)
    @given(dags())
    def test_ancestor_descendant_duality(self, dag):
        """Test u is an ancestor of v exactly when v descends from u."""
        for u, v in itertools.permutations(dag.nodes, 2):
            self.assertEqual(u in relations(dag, v).ancestors,
                             v in relations(dag, u).descendants)


class TestDSeparation(BaseTestCase):
    """Test cases for is_d_separated on the worked examples."""

    def test_figure_3_statements(self):
        """Test the five statements about the six-node example."""
        dag = figure_3_dag()
        v = {dag.name(n): n for n in dag.nodes}
        self.assertTrue(is_d_separated(dag, v["V2"], v["V3"]))
        self.assertFalse(is_d_separated(dag, v["V2"], v["V3"], [v["V5"]]))
        for given_names in (["V1"], ["V1", "V5", "V3"],
                            ["V1", "V6", "V3"]):
            given_set = [v[n] for n in given_names]
            self.assertTrue(
                is_d_separated(dag, v["V2"], v["V4"], given_set),
                given_names,
            )

    def test_conditioning_on_response_opens_path(self):
        """Test X3 and A are separated a priori but not given Y."""
        dag = scenario_graph("1")
        x3, a, y = (dag.node_id(n) for n in ("X3", "A", "Y"))
        self.assertTrue(is_d_separated(dag, x3, a))
        self.assertFalse(is_d_separated(dag, x3, a, [y]))

    def test_disjoint_components_always_separated(self):
        """Test nodes in different components are separated given any s."""
        dag = named_dag(6, [("V1", "V2"), ("V3", "V2"),
                            ("V4", "V5"), ("V6", "V5")])
        x, y = dag.node_id("V1"), dag.node_id("V4")
        rest = [v for v in dag.nodes if v not in (x, y)]
        for size in range(len(rest) + 1):
            for s in itertools.combinations(rest, size):
                self.assertTrue(is_d_separated(dag, x, y, s), s)

    def test_figure_1_roles(self):
        """Test confounder and mediator block, collider opens."""
        for role in ("confounder", "mediator"):
            dag = figure_1_dag(role)
            self.assertFalse(is_d_separated(dag, 0, 2))
            self.assertTrue(is_d_separated(dag, 0, 2, [1]))
            self.assertEqual(classify_triple(dag, 0, 1, 2), role)

        dag = figure_1_dag("collider")
        self.assertTrue(is_d_separated(dag, 0, 2))
        self.assertFalse(is_d_separated(dag, 0, 2, [1]))
        self.assertEqual(classify_triple(dag, 0, 1, 2), "collider")

    def test_descendant_of_collider_opens(self):
        """Test conditioning on a collider's descendant opens it."""
        dag = named_dag(4, [("V1", "V2"), ("V3", "V2"), ("V2", "V4")])
        self.assertFalse(is_d_separated(dag, 0, 2, [3]))

    def test_overlap_errors(self):
        """Test x == y and endpoints in s are rejected."""
        dag = figure_3_dag()
        with self.assertRaises(OverlapError):
            is_d_separated(dag, 0, 0)
        with self.assertRaises(OverlapError):
            is_d_separated(dag, 0, 1, [1])

    def test_classify_requires_adjacency(self):
        """Test classify_triple rejects non-adjacent triples."""
        dag = figure_3_dag()
        with self.assertRaises(ValueError):
            classify_triple(dag, 0, 2, 5)


class TestOracleEquivalence(BaseTestCase):
    """Reachability agrees with exhaustive path enumeration."""

    @settings(max_examples=150, deadline=None)
    @given(dags(), st.data())
    def test_matches_path_oracle(self, dag, data):
        """Test both algorithms agree on random triples."""
        x, y = data.draw(
            st.lists(st.sampled_from(list(dag.nodes)), min_size=2,
                     max_size=2, unique=True)
        )
        rest = [v for v in dag.nodes if v not in (x, y)]
        s = data.draw(st.sets(st.sampled_from(rest))) if rest else set()
        self.assertEqual(
            is_d_separated(dag, x, y, s),
            d_separated_by_paths(dag, x, y, s),
        )

    @settings(max_examples=100, deadline=None)
    @given(dags(max_nodes=6), st.data())
    def test_symmetric(self, dag, data):
        """Test d-separation does not depend on argument order."""
        x, y = data.draw(
            st.lists(st.sampled_from(list(dag.nodes)), min_size=2,
                     max_size=2, unique=True)
        )
        self.assertEqual(is_d_separated(dag, x, y),
                         is_d_separated(dag, y, x))

    def test_exhaustive_sweep(self):
        """Test every triple of many random DAGs (full run: 500 DAGs)."""
        rng = np.random.default_rng(7)
        disagreements = 0
        max_nodes = 8 if self.full_acceptance else 6
        for _ in range(self.scale(500, 25)):
            n_nodes = int(rng.integers(2, max_nodes + 1))
            dag = random_dag(n_nodes, 0.4, rng)
            for x, y in itertools.combinations(dag.nodes, 2):
                rest = [v for v in dag.nodes if v not in (x, y)]
                for size in range(len(rest) + 1):
                    for s in itertools.combinations(rest, size):
                        if is_d_separated(dag, x, y, s) != \
                                d_separated_by_paths(dag, x, y, s):
                            disagreements += 1
        self.assertEqual(disagreements, 0)


if __name__ == '__main__':
    unittest.main()
