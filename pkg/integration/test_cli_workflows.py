"""Integration tests for command-line workflows.

Runs the fairdag CLI end to end on model files and datasets written to a
temporary directory, checking standard output and exit codes.
"""

import contextlib
import io
import json
import logging
import tempfile
import unittest
from pathlib import Path

from fairdag_cli import run
from tests.fixtures.test_data import FIGURE_3_EDGES, chain_model_json

FIGURE_4_JSON = {
    "nodes": [{"name": "V1", "observed": False}, {"name": "V2"},
              {"name": "V3"}],
    "edges": [["V1", "V2"], ["V1", "V3"], ["V2", "V3"]],
    "domains": {"V1": ["0", "1"], "V2": ["0", "1"], "V3": ["0", "1"]},
    "cpts": {
        "V1": {"": [0.4, 0.6]},
        "V2": {"0": [0.8, 0.2], "1": [0.3, 0.7]},
        "V3": {"0,0": [0.9, 0.1], "0,1": [0.6, 0.4],
               "1,0": [0.5, 0.5], "1,1": [0.2, 0.8]},
    },
}


class CliTestCase(unittest.TestCase):
    """Temporary workspace plus a runner capturing stdout and stderr."""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        root = logging.getLogger()
        self._handlers = list(root.handlers)
        self._level = root.level

    def tearDown(self):
        root = logging.getLogger()
        root.handlers = self._handlers
        root.setLevel(self._level)
        self._tmp.cleanup()

    def write_json(self, name, payload):
        path = self.tmp / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return str(path)

    def run_cli(self, *argv):
        """Return (exit code, stdout, stderr)."""
        out, err = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = run(list(argv))
        return code, out.getvalue().strip(), err.getvalue()


class TestGraphWorkflow(CliTestCase):
    """dsep on the six-node example."""

    def setUp(self):
        super().setUp()
        self.graph = self.write_json("figure3.json", {
            "nodes": [{"name": f"V{i}"} for i in range(1, 7)],
            "edges": [list(edge) for edge in FIGURE_3_EDGES],
        })

    def test_collider_opens_path(self):
        """Test V2 and V3 are separated until V5 is observed."""
        self.assertEqual(
            self.run_cli("dsep", "--model", self.graph, "--x", "V2",
                         "--y", "V3")[:2],
            (0, "true"),
        )
        self.assertEqual(
            self.run_cli("dsep", "--model", self.graph, "--x", "V2",
                         "--y", "V3", "--given", "V5")[:2],
            (0, "false"),
        )

    def test_comma_separated_given(self):
        """Test --given accepts a comma-separated list."""
        code, out, _ = self.run_cli("dsep", "--model", self.graph,
                                    "--x", "V2", "--y", "V4",
                                    "--given", "V1,V6,V3")
        self.assertEqual((code, out), (0, "true"))

    def test_unknown_node(self):
        """Test unknown names exit 1 with a message on stderr."""
        code, out, err = self.run_cli("dsep", "--model", self.graph,
                                      "--x", "V2", "--y", "V9")
        self.assertEqual(code, 1)
        self.assertEqual(out, "")
        self.assertIn("V9", err)


class TestAuditWorkflow(CliTestCase):
    """audit and exact on small inputs."""

    def test_audit_perfect_predictor(self):
        """Test R == Y satisfies Equalized Odds."""
        rows = ["A,R,Y"]
        rows += [f"a,{y},{y}" for y in [0] * 40 + [1] * 10]
        rows += [f"b,{y},{y}" for y in [0] * 20 + [1] * 30]
        data = self.tmp / "data.csv"
        data.write_text("\n".join(rows) + "\n", encoding="utf-8")

        code, out, _ = self.run_cli("audit", "--data", str(data),
                                    "--a", "A", "--r", "R", "--y", "Y",
                                    "--categorical", "A")
        self.assertEqual(code, 0)
        reports = {r["criterion"]: r for r in json.loads(out)}
        self.assertEqual(reports["EqualizedOdds"]["verdict"], "satisfied")
        self.assertEqual(reports["DemographicParity"]["verdict"],
                         "violated")

    def test_audit_missing_column(self):
        """Test a missing column exits 1."""
        data = self.tmp / "data.csv"
        data.write_text("A,R\na,1\nb,0\n", encoding="utf-8")
        code, _, err = self.run_cli("audit", "--data", str(data),
                                    "--a", "A", "--r", "R", "--y", "Y",
                                    "--categorical", "A")
        self.assertEqual(code, 1)
        self.assertIn("Missing required columns", err)

    def test_exact_chain(self):
        """Test the chain model is sufficient and not independent."""
        model = self.write_json("chain.json", chain_model_json())
        code, out, _ = self.run_cli("exact", "--model", model, "--a", "A",
                                    "--r", "R", "--y", "Y")
        self.assertEqual(code, 0)
        verdicts = {r["criterion"]: r["verdict"] for r in json.loads(out)}
        self.assertEqual(verdicts, {"Independence": "violated",
                                    "Separation": "violated",
                                    "Sufficiency": "satisfied"})

    def test_exact_needs_discrete_model(self):
        """Test bare graphs are rejected by exact."""
        graph = self.write_json("graph.json", {
            "nodes": [{"name": "A"}, {"name": "R"}, {"name": "Y"}],
        })
        code, _, _ = self.run_cli("exact", "--model", graph, "--a", "A",
                                  "--r", "R", "--y", "Y")
        self.assertEqual(code, 1)


class TestInterventionWorkflow(CliTestCase):
    """intervene with flags and payload files."""

    def setUp(self):
        super().setUp()
        self.chain = self.write_json("chain.json", chain_model_json())

    def test_distribution(self):
        """Test P(Y | do(A=1)) is printed as a table."""
        code, out, _ = self.run_cli("intervene", "--model", self.chain,
                                    "--do", "A=1", "--target", "Y")
        self.assertEqual(code, 0)
        table = json.loads(out)
        self.assertEqual(table["variables"], ["Y"])
        self.assertAlmostEqual(table["rows"][1]["p"], 0.5)

    def test_payload(self):
        """Test the payload file form gives the same answer."""
        payload = self.write_json("do.json",
                                  {"do": {"A": "1"}, "target": "Y"})
        flags = self.run_cli("intervene", "--model", self.chain,
                             "--do", "A=1", "--target", "Y")
        from_file = self.run_cli("intervene", "--model", self.chain,
                                 "--payload", payload)
        self.assertEqual(flags[:2], from_file[:2])

    def test_unidentifiable(self):
        """Test a hidden confounder prints unidentifiable and exits 2."""
        model = self.write_json("figure4.json", FIGURE_4_JSON)
        code, out, _ = self.run_cli("intervene", "--model", model,
                                    "--do", "V2=1", "--target", "V3")
        self.assertEqual((code, out), (2, "unidentifiable"))

    def test_usage_errors(self):
        """Test malformed assignments and conflicting options exit 1."""
        payload = self.write_json("do.json",
                                  {"do": {"A": "1"}, "target": "Y"})
        cases = [
            ("--do", "A", "--target", "Y"),
            ("--do", "A=7", "--target", "Y"),
            ("--do", "A=1"),
            ("--payload", payload, "--target", "Y"),
        ]
        for extra in cases:
            with self.subTest(args=extra):
                code, _, _ = self.run_cli("intervene", "--model",
                                          self.chain, *extra)
                self.assertEqual(code, 1)


class TestScenarioWorkflow(CliTestCase):
    """scenario and incompat."""

    def test_discrete_scenario(self):
        """Test scenario 2 prints empirical and exact reports."""
        code, out, _ = self.run_cli("scenario", "--id", "2", "--n", "2000",
                                    "--seed", "1")
        self.assertEqual(code, 0)
        methods = {r["method"] for r in json.loads(out)}
        self.assertEqual(methods, {"empirical", "exact"})

    def test_identical_output_per_seed(self):
        """Test two runs with one seed print identical bytes."""
        argv = ("scenario", "--id", "3", "--n", "1000", "--seed", "4")
        self.assertEqual(self.run_cli(*argv)[1], self.run_cli(*argv)[1])

    def test_figure_csv(self):
        """Test --emit-figure writes the figure data."""
        figure = self.tmp / "figure.csv"
        code, _, _ = self.run_cli("scenario", "--id", "1", "--n", "1000",
                                  "--emit-figure", str(figure))
        self.assertEqual(code, 0)
        header = figure.read_text(encoding="utf-8").splitlines()[0]
        self.assertEqual(header, "x2,y,group,line_id,band_lo,band_hi")

    def test_invalid_scenario_options(self):
        """Test small samples and misplaced flags exit 1."""
        for argv in (("scenario", "--id", "2", "--n", "500"),
                     ("scenario", "--id", "2", "--biased-credit"),
                     ("scenario", "--id", "7")):
            with self.subTest(argv=argv):
                self.assertEqual(self.run_cli(*argv)[0], 1)

    def test_incompatibility(self):
        """Test no counterexample turns up and the summary follows."""
        code, out, _ = self.run_cli("incompat", "--trials", "5000",
                                    "--seed", "7")
        first, _, rest = out.partition("\n")
        self.assertEqual((code, first), (0, "none"))
        summary = json.loads(rest)
        self.assertIsNone(summary["counterexample"])
        self.assertEqual(summary["trials"], 5000)
        self.assertLessEqual(summary["max_bound_ratio"], 1.0)


if __name__ == '__main__':
    unittest.main()
