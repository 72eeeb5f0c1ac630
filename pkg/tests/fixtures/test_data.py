"""
Test data fixtures for the fairdag test suite.

Provides the worked-example graphs, a small hand-built discrete model,
and a base test case that isolates FAIRDAG_* settings and switches
between quick and full-scale statistical runs.
"""

import json
import os
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np

from dag_core import Dag, build_dag
from discrete_model import DiscreteModel, model_from_names

FIXTURE_DIR = Path(__file__).parent

# Confounder, mediator and collider on V1 - V2 - V3
FIGURE_1_GRAPHS = {
    "confounder": [("V2", "V1"), ("V2", "V3")],
    "mediator": [("V1", "V2"), ("V2", "V3")],
    "collider": [("V1", "V2"), ("V3", "V2")],
}

FIGURE_2_EDGES = [("V1", "V2"), ("V1", "V3"), ("V2", "V4"), ("V3", "V4")]

FIGURE_3_EDGES = [
    ("V1", "V2"), ("V1", "V4"), ("V2", "V5"),
    ("V3", "V4"), ("V3", "V5"), ("V5", "V6"),
]

# V1 is an unobserved confounder of V2 and V3
FIGURE_4_NODES = [("V1", False), ("V2", True), ("V3", True)]
FIGURE_4_EDGES = [("V1", "V2"), ("V1", "V3"), ("V2", "V3")]


def named_dag(n_nodes: int, edges: list[tuple[str, str]]) -> Dag:
    """Observed nodes V1..Vn with the given named edges."""
    return build_dag([(f"V{i}", True) for i in range(1, n_nodes + 1)],
                     edges)


def figure_1_dag(role: str) -> Dag:
    return named_dag(3, FIGURE_1_GRAPHS[role])


def figure_3_dag() -> Dag:
    return named_dag(6, FIGURE_3_EDGES)


def figure_4_model() -> DiscreteModel:
    """Binary model on the unobserved-confounder graph."""
    dag = build_dag(FIGURE_4_NODES, FIGURE_4_EDGES)
    return model_from_names(
        dag,
        {"V1": ["0", "1"], "V2": ["0", "1"], "V3": ["0", "1"]},
        {
            "V1": [0.4, 0.6],
            "V2": [[0.8, 0.2], [0.3, 0.7]],
            "V3": [[[0.9, 0.1], [0.6, 0.4]], [[0.5, 0.5], [0.2, 0.8]]],
        },
    )


def chain_model() -> DiscreteModel:
    """A -> R -> Y with hand CPTs (R is a noisy copy of A)."""
    dag = build_dag([("A", True), ("R", True), ("Y", True)],
                    [("A", "R"), ("R", "Y")])
    return model_from_names(
        dag,
        {"A": ["0", "1"], "R": ["0", "1"], "Y": ["0", "1"]},
        {
            "A": [0.5, 0.5],
            "R": [[0.7, 0.3], [0.2, 0.8]],
            "Y": [[0.9, 0.1], [0.4, 0.6]],
        },
    )


def chain_model_json() -> dict:
    """The chain model in the JSON model-file layout."""
    return {
        "nodes": [{"name": "A", "observed": True},
                  {"name": "R", "observed": True},
                  {"name": "Y", "observed": True}],
        "edges": [["A", "R"], ["R", "Y"]],
        "domains": {"A": ["0", "1"], "R": ["0", "1"], "Y": ["0", "1"]},
        "cpts": {
            "A": {"": [0.5, 0.5]},
            "R": {"0": [0.7, 0.3], "1": [0.2, 0.8]},
            "Y": {"0": [0.9, 0.1], "1": [0.4, 0.6]},
        },
    }


def load_scenario_edges() -> dict[str, list[list[str]]]:
    """Committed edge lists of every scenario graph."""
    with open(FIXTURE_DIR / "scenario_edges.json", encoding="utf-8") as f:
        return json.load(f)


class BaseTestCase(unittest.TestCase):
    """
    Base test case class with shared setUp and tearDown methods.

    Provides common functionality for all test classes including:
    - Isolation from FAIRDAG_* overrides in the caller's environment
    - Quick vs full-scale statistical runs via FAIRDAG_FULL_ACCEPTANCE
    - A seeded generator per test
    """

    @classmethod
    def setUpClass(cls):
        """Set up class-level resources."""
        cls.full_acceptance = os.environ.get(
            'FAIRDAG_FULL_ACCEPTANCE', 'false'
        ).lower() == 'true'

    def setUp(self):
        """Clear FAIRDAG_* settings and seed a generator."""
        cleaned = {
            k: v for k, v in os.environ.items()
            if not k.startswith('FAIRDAG_') or k == 'FAIRDAG_FULL_ACCEPTANCE'
        }
        self._env = patch.dict(os.environ, cleaned, clear=True)
        self._env.start()
        self.rng = np.random.default_rng(20240101)

    def tearDown(self):
        """Restore the caller's environment."""
        self._env.stop()

    def scale(self, full: int, quick: int) -> int:
        """Pick the full-scale size only when acceptance runs are on."""
        return full if self.full_acceptance else quick
