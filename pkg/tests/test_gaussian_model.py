"""Tests for gaussian_model module."""

import unittest

import numpy as np

from dag_core import build_dag
from errors import (
    DomainError,
    ModelError,
    OverlapError,
    SingularConditioningError,
)
from gaussian_model import (
    DiscreteRoot,
    GaussianLinearModel,
    Mechanism,
    conditional_gaussian,
    is_positive_semidefinite,
    joint_gaussian,
    sample,
)
from scenarios import unfaithful_fixture
from tests.fixtures.test_data import BaseTestCase, named_dag


def grouped_model() -> GaussianLinearModel:
    """A in {a0, a1} shifts X; Y = 2 X + noise."""
    dag = build_dag([("A", True), ("X", True), ("Y", True)],
                    [("A", "X"), ("X", "Y")])
    a, x, y = dag.nodes
    return GaussianLinearModel(
        dag,
        {a: DiscreteRoot(("a0", "a1"), (0.4, 0.6))},
        {
            x: {"a0": Mechanism(-1.0, {}, 1.0),
                "a1": Mechanism(1.0, {}, 4.0)},
            y: {"": Mechanism(0.5, {x: 2.0}, 1.0)},
        },
        frozenset({x, y}),
    )


class TestModelValidation(BaseTestCase):
    """Test cases for GaussianLinearModel construction."""

    def setUp(self):
        super().setUp()
        self.dag = build_dag([("A", True), ("X", True)], [("A", "X")])
        self.a, self.x = self.dag.nodes

    def test_discrete_node_must_be_root(self):
        """Test discrete non-roots are rejected."""
        with self.assertRaises(ModelError):
            GaussianLinearModel(
                self.dag,
                {self.x: DiscreteRoot(("0", "1"), (0.5, 0.5))},
                {self.a: {"": Mechanism()}},
            )

    def test_mechanism_keys_cover_configurations(self):
        """Test a missing configuration key is rejected."""
        with self.assertRaises(ModelError):
            GaussianLinearModel(
                self.dag,
                {self.a: DiscreteRoot(("0", "1"), (0.5, 0.5))},
                {self.x: {"0": Mechanism()}},
            )

    def test_nondegenerate_requires_noise(self):
        """Test zero noise on a non-degenerate node is rejected."""
        with self.assertRaises(ModelError):
            GaussianLinearModel(
                self.dag,
                {self.a: DiscreteRoot(("0", "1"), (0.5, 0.5))},
                {self.x: {"0": Mechanism(noise_variance=0.0),
                          "1": Mechanism()}},
                frozenset({self.x}),
            )

    def test_coefficients_must_reference_parents(self):
        """Test coefficients on non-parents are rejected."""
        dag = build_dag([("V1", True), ("V2", True)], [])
        v1, v2 = dag.nodes
        with self.assertRaises(ModelError):
            GaussianLinearModel(
                dag, {},
                {v1: {"": Mechanism()},
                 v2: {"": Mechanism(0.0, {v1: 1.0})}},
            )

    def test_root_probabilities(self):
        """Test discrete root laws must sum to one."""
        with self.assertRaises(ModelError):
            DiscreteRoot(("0", "1"), (0.5, 0.6))


class TestJointGaussian(BaseTestCase):
    """Test cases for joint_gaussian and conditional_gaussian."""

    def test_unfaithful_cancellation(self):
        """Test the cancelling paths give Cov(V1, V4) == 0."""
        model = unfaithful_fixture()
        v1, v2, v3, v4 = model.dag.nodes
        joint = joint_gaussian(model)
        self.assertAlmostEqual(joint.covariance_of(v1, v4), 0.0, places=12)
        self.assertAlmostEqual(joint.variance_of(v2), 10.0)
        self.assertAlmostEqual(joint.covariance_of(v2, v3), 6.0)

    def test_perturbation_breaks_cancellation(self):
        """Test a small coefficient change makes V1 and V4 dependent."""
        model = unfaithful_fixture(coefficient=-2.1)
        v1, _, _, v4 = model.dag.nodes
        joint = joint_gaussian(model)
        self.assertAlmostEqual(joint.covariance_of(v1, v4), -0.3)

    def test_group_configuration(self):
        """Test intercepts and noise follow the discrete root label."""
        model = grouped_model()
        a, x, y = model.dag.nodes
        joint = joint_gaussian(model, {a: "a1"})
        self.assertEqual(joint.variables, (x, y))
        self.assertAlmostEqual(joint.mean_of(y), 2.5)
        self.assertAlmostEqual(joint.variance_of(y), 17.0)
        self.assertAlmostEqual(joint.covariance_of(x, y), 8.0)
        self.assertTrue(is_positive_semidefinite(joint.covariance))

    def test_configuration_errors(self):
        """Test missing and unknown root labels."""
        model = grouped_model()
        a = model.dag.node_id("A")
        with self.assertRaises(ModelError):
            joint_gaussian(model, {})
        with self.assertRaises(DomainError):
            joint_gaussian(model, {a: "a7"})

    def test_conditioning(self):
        """Test the Schur complement on V2 given V1."""
        model = unfaithful_fixture()
        v1, v2, _, _ = model.dag.nodes
        joint = joint_gaussian(model)
        conditional = conditional_gaussian(joint, [v2], {v1: 1.0})
        self.assertAlmostEqual(conditional.mean_of(v2), 3.0)
        self.assertAlmostEqual(conditional.variance_of(v2), 1.0)

    def test_conditioning_errors(self):
        """Test overlap and singular conditioning blocks."""
        model = unfaithful_fixture()
        v1, v2, _, _ = model.dag.nodes
        joint = joint_gaussian(model)
        with self.assertRaises(OverlapError):
            conditional_gaussian(joint, [v1], {v1: 0.0})

        dag = build_dag([("V1", True), ("V2", True)], [("V1", "V2")])
        u, w = dag.nodes
        constant = GaussianLinearModel(
            dag, {},
            {u: {"": Mechanism(1.0, {}, 0.0)},
             w: {"": Mechanism(0.0, {u: 1.0})}},
        )
        with self.assertRaises(SingularConditioningError):
            conditional_gaussian(joint_gaussian(constant), [w], {u: 1.0})

    def test_sequential_conditioning(self):
        """Test conditioning twice equals conditioning once."""
        model = unfaithful_fixture()
        v1, v2, v3, v4 = model.dag.nodes
        joint = joint_gaussian(model)
        once = conditional_gaussian(joint, [v3, v4], {v1: 1.0, v2: 2.5})
        first = conditional_gaussian(joint, [v2, v3, v4], {v1: 1.0})
        twice = conditional_gaussian(first, [v3, v4], {v2: 2.5})
        np.testing.assert_allclose(twice.mean, once.mean,
                                   rtol=0, atol=1e-10)
        np.testing.assert_allclose(twice.covariance, once.covariance,
                                   rtol=0, atol=1e-10)

    def test_zero_noise_is_deterministic(self):
        """Test noiseless mechanisms propagate their intercepts."""
        dag = named_dag(3, [("V1", "V2"), ("V2", "V3")])
        v1, v2, v3 = dag.nodes
        model = GaussianLinearModel(
            dag, {},
            {v1: {"": Mechanism(1.0, {}, 0.0)},
             v2: {"": Mechanism(0.5, {v1: 2.0}, 0.0)},
             v3: {"": Mechanism(-1.0, {v2: 3.0}, 0.0)}},
        )
        joint = joint_gaussian(model)
        np.testing.assert_allclose(joint.mean, [1.0, 2.5, 6.5])
        np.testing.assert_allclose(joint.covariance, np.zeros((3, 3)))
        self.assertTrue(is_positive_semidefinite(joint.covariance))

        frame = sample(model, 500, seed=4)
        self.assertEqual(len(frame.drop_duplicates()), 1)
        np.testing.assert_allclose(frame.iloc[0].to_numpy(dtype=float),
                                   [1.0, 2.5, 6.5])

    def test_noiseless_child_is_exact_linear_function(self):
        """Test a zero-noise child gives a singular but valid covariance."""
        dag = named_dag(2, [("V1", "V2")])
        v1, v2 = dag.nodes
        model = GaussianLinearModel(
            dag, {},
            {v1: {"": Mechanism(0.0, {}, 1.0)},
             v2: {"": Mechanism(0.5, {v1: -2.0}, 0.0)}},
            frozenset({v1}),
        )
        covariance = joint_gaussian(model).covariance
        np.testing.assert_allclose(covariance, [[1.0, -2.0], [-2.0, 4.0]])
        self.assertAlmostEqual(np.linalg.det(covariance), 0.0)
        self.assertTrue(is_positive_semidefinite(covariance))

        frame = sample(model, 1000, seed=6)
        np.testing.assert_allclose(frame["V2"], 0.5 - 2.0 * frame["V1"],
                                   rtol=0, atol=1e-12)

    def test_positive_semidefinite(self):
        """Test indefinite matrices are detected."""
        self.assertFalse(
            is_positive_semidefinite(np.array([[1.0, 2.0], [2.0, 1.0]]))
        )
        self.assertTrue(is_positive_semidefinite(np.eye(3)))


class TestSampling(BaseTestCase):
    """Test cases for sample."""

    def test_deterministic(self):
        """Test identical seeds give identical frames."""
        model = grouped_model()
        first = sample(model, 1000, seed=9)
        second = sample(model, 1000, seed=9)
        self.assertTrue(first.equals(second))

    def test_moments_match_joint(self):
        """Test sample covariance approaches the exact covariance."""
        model = unfaithful_fixture()
        frame = sample(model, self.scale(200_000, 50_000), seed=1)
        empirical = np.cov(frame[["V1", "V2", "V3", "V4"]].to_numpy().T)
        exact = joint_gaussian(model).covariance
        np.testing.assert_allclose(empirical, exact, atol=0.5)
        self.assertLess(abs(np.corrcoef(frame["V1"], frame["V4"])[0, 1]),
                        0.02)

    def test_moments_per_configuration(self):
        """Test each group's sampled moments sit within 5 standard errors."""
        model = grouped_model()
        a, x, y = model.dag.nodes
        frame = sample(model, self.scale(10**6, 200_000), seed=3)
        for label in ("a0", "a1"):
            exact = joint_gaussian(model, {a: label})
            group = frame.loc[frame["A"] == label, ["X", "Y"]].to_numpy()
            n = len(group)
            variances = np.diag(exact.covariance)

            mean_se = np.sqrt(variances / n)
            np.testing.assert_array_less(
                np.abs(group.mean(axis=0) - exact.mean), 5 * mean_se
            )
            # Var(s_uv) = (s_uu s_vv + s_uv^2) / n for Gaussian pairs
            cov_se = np.sqrt(
                (np.outer(variances, variances) + exact.covariance**2) / n
            )
            np.testing.assert_array_less(
                np.abs(np.cov(group.T) - exact.covariance), 5 * cov_se
            )

    def test_discrete_column_and_predictor(self):
        """Test discrete roots are categorical and predictors are appended."""
        model = grouped_model()
        frame = sample(
            model, 20_000, seed=2,
            predictors={"R": lambda df, rng: df["X"].to_numpy() * 2.0},
        )
        self.assertEqual(list(frame.columns), ["A", "X", "Y", "R"])
        self.assertEqual(str(frame["A"].dtype), "category")
        np.testing.assert_allclose(frame["R"], frame["X"] * 2.0)
        self.assertAlmostEqual((frame["A"] == "a1").mean(), 0.6, delta=0.02)
        group = frame[frame["A"] == "a1"]
        self.assertAlmostEqual(group["X"].mean(), 1.0, delta=0.1)

    def test_rejects_empty_sample(self):
        """Test n must be positive."""
        with self.assertRaises(ValueError):
            sample(grouped_model(), 0, seed=0)


if __name__ == '__main__':
    unittest.main()
