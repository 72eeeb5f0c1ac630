"""Linear-Gaussian structural models with discrete roots.

Discrete variables (e.g. a sensitive attribute) are restricted to roots.
Every other node is linear in its continuous parents plus Gaussian noise,
with intercept, coefficients and noise variance allowed to depend on the
configuration of its discrete parents. Given a full configuration of the
discrete roots the continuous nodes are jointly Gaussian, so means and
covariances are computed exactly and conditioned in closed form.
"""

import itertools
import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from dag_core import Dag, NodeId
from errors import (
    DomainError,
    ModelError,
    OverlapError,
    SingularConditioningError,
)

logger = logging.getLogger(__name__)

SINGULARITY_THRESHOLD = 1e-12
PSD_FLOOR = -1e-10

# (sampled frame so far, generator) -> one value per row
Predictor = Callable[[pd.DataFrame, np.random.Generator], np.ndarray]


@dataclass(frozen=True)
class Mechanism:
    """Linear mechanism for one discrete-parent configuration.

    value = intercept + sum(coefficients[p] * parent_p) + noise,
    noise ~ N(0, noise_variance).
    """

    intercept: float = 0.0
    coefficients: Mapping[NodeId, float] = field(default_factory=dict)
    noise_variance: float = 1.0


@dataclass(frozen=True)
class DiscreteRoot:
    """Categorical distribution of a discrete root node."""

    labels: tuple[str, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.labels or len(self.labels) != len(self.probs):
            raise ModelError("Discrete root needs one prob per label")
        if len(set(self.labels)) != len(self.labels):
            raise ModelError("Discrete root repeats a label")
        probs = np.asarray(self.probs, dtype=float)
        if (probs < 0).any() or not np.isclose(probs.sum(), 1.0, atol=1e-9):
            raise ModelError("Discrete root probabilities must sum to 1")


@dataclass(frozen=True, eq=False)
class GaussianLinearModel:
    """Dag plus linear-Gaussian mechanisms and discrete root laws.

    Attributes:
        dag: The graph
        discrete_roots: Law of each discrete node (roots only)
        mechanisms: For each continuous node, mechanism per configuration
            key, the comma-joined labels of its discrete parents in
            declaration order ("" when it has none)
        nondegenerate: Continuous nodes whose noise must be strictly
            positive

    Raises:
        ModelError: If any invariant above is violated
    """

    dag: Dag
    discrete_roots: Mapping[NodeId, DiscreteRoot]
    mechanisms: Mapping[NodeId, Mapping[str, Mechanism]]
    nondegenerate: frozenset[NodeId] = frozenset()

    def __post_init__(self) -> None:
        dag = self.dag
        for node in self.discrete_roots:
            dag.check(node)
            if dag.parents(node):
                raise ModelError(
                    f"Discrete node '{dag.name(node)}' must be a root"
                )

        for node in dag.nodes:
            if node in self.discrete_roots:
                if node in self.mechanisms:
                    raise ModelError(
                        f"Discrete node '{dag.name(node)}' cannot have a "
                        f"linear mechanism"
                    )
                continue
            self._check_mechanisms(node)

    def _check_mechanisms(self, node: NodeId) -> None:
        name = self.dag.name(node)
        table = self.mechanisms.get(node)
        if not table:
            raise ModelError(f"No mechanism for continuous node '{name}'")

        expected = {
            ",".join(labels)
            for labels in itertools.product(
                *(self.discrete_roots[p].labels
                  for p in self.discrete_parents(node))
            )
        }
        if set(table) != expected:
            raise ModelError(
                f"Mechanism keys of '{name}' are {sorted(table)}, "
                f"expected {sorted(expected)}"
            )

        continuous = set(self.continuous_parents(node))
        for key, mechanism in table.items():
            stray = set(mechanism.coefficients) - continuous
            if stray:
                raise ModelError(
                    f"Mechanism '{key}' of '{name}' references non-parents "
                    f"{sorted(stray)}"
                )
            if mechanism.noise_variance < 0:
                raise ModelError(f"Negative noise variance on '{name}'")
            if node in self.nondegenerate and mechanism.noise_variance <= 0:
                raise ModelError(
                    f"'{name}' is flagged non-degenerate but has zero noise"
                )

    def is_discrete(self, node: NodeId) -> bool:
        return node in self.discrete_roots

    def discrete_parents(self, node: NodeId) -> tuple[NodeId, ...]:
        return tuple(
            p for p in self.dag.parents(node) if p in self.discrete_roots
        )

    def continuous_parents(self, node: NodeId) -> tuple[NodeId, ...]:
        return tuple(
            p for p in self.dag.parents(node) if p not in self.discrete_roots
        )

    @property
    def continuous_nodes(self) -> tuple[NodeId, ...]:
        """Continuous nodes in topological order."""
        return tuple(
            v for v in self.dag.topological_order()
            if v not in self.discrete_roots
        )

    def mechanism(
        self, node: NodeId, config: Mapping[NodeId, str]
    ) -> Mechanism:
        """Mechanism of ``node`` under a discrete-root configuration."""
        key = ",".join(config[p] for p in self.discrete_parents(node))
        return self.mechanisms[node][key]

    def configurations(self) -> list[dict[NodeId, str]]:
        """Every labelling of the discrete roots, in label order."""
        roots = sorted(self.discrete_roots)
        return [
            dict(zip(roots, labels, strict=True))
            for labels in itertools.product(
                *(self.discrete_roots[r].labels for r in roots)
            )
        ]


@dataclass(frozen=True, eq=False)
class GaussianJoint:
    """Mean vector and covariance matrix over named continuous nodes."""

    variables: tuple[NodeId, ...]
    names: tuple[str, ...]
    mean: np.ndarray
    covariance: np.ndarray

    def index(self, node: NodeId) -> int:
        try:
            return self.variables.index(node)
        except ValueError:
            raise ModelError(f"Node {node!r} is not in this joint") from None

    def mean_of(self, node: NodeId) -> float:
        return float(self.mean[self.index(node)])

    def variance_of(self, node: NodeId) -> float:
        i = self.index(node)
        return float(self.covariance[i, i])

    def covariance_of(self, u: NodeId, v: NodeId) -> float:
        return float(self.covariance[self.index(u), self.index(v)])

    def marginal(self, nodes: Sequence[NodeId]) -> "GaussianJoint":
        idx = [self.index(v) for v in nodes]
        return GaussianJoint(
            tuple(nodes),
            tuple(self.names[i] for i in idx),
            self.mean[idx],
            self.covariance[np.ix_(idx, idx)],
        )


def _check_config(
    model: GaussianLinearModel, config: Mapping[NodeId, str]
) -> dict[NodeId, str]:
    missing = [
        model.dag.name(r) for r in model.discrete_roots if r not in config
    ]
    if missing:
        raise ModelError(
            f"Configuration must label every discrete root; missing "
            f"{', '.join(missing)}"
        )
    checked = {}
    for root, law in model.discrete_roots.items():
        label = str(config[root])
        if label not in law.labels:
            raise DomainError(
                f"'{label}' is not a label of '{model.dag.name(root)}'"
            )
        checked[root] = label
    return checked


def joint_gaussian(
    model: GaussianLinearModel,
    config: Mapping[NodeId, str] | None = None,
) -> GaussianJoint:
    """Exact mean and covariance of every continuous node.

    Each node is written as mean + L @ noise, where row v of L is the
    coefficient-weighted sum of its parents' rows plus its own unit
    entry. Then covariance = L diag(noise variances) L^T.

    Args:
        model: The linear-Gaussian model
        config: Label for every discrete root

    Returns:
        GaussianJoint over continuous nodes in topological order

    Examples:
        >>> joint = joint_gaussian(scenario_one, {a: "a0"})
        >>> joint.covariance  # [[s_a^2, b s_a^2], [b s_a^2, ...]]
    """
    config = _check_config(model, config or {})
    nodes = model.continuous_nodes
    position = {v: i for i, v in enumerate(nodes)}
    k = len(nodes)

    mean = np.zeros(k)
    loadings = np.zeros((k, k))
    noise = np.zeros(k)
    for v in nodes:
        i = position[v]
        mechanism = model.mechanism(v, config)
        mean[i] = mechanism.intercept
        loadings[i, i] = 1.0
        noise[i] = mechanism.noise_variance
        for parent, coef in mechanism.coefficients.items():
            mean[i] += coef * mean[position[parent]]
            loadings[i] += coef * loadings[position[parent]]

    covariance = (loadings * noise) @ loadings.T
    # exact symmetry for downstream eigen checks
    covariance = (covariance + covariance.T) / 2.0
    return GaussianJoint(
        nodes,
        tuple(model.dag.name(v) for v in nodes),
        mean,
        covariance,
    )


def conditional_gaussian(
    joint: GaussianJoint,
    targets: Sequence[NodeId],
    given: Mapping[NodeId, float],
) -> GaussianJoint:
    """Condition a Gaussian joint on observed values (Schur complement).

    Args:
        joint: Joint to condition
        targets: Nodes whose conditional law is wanted
        given: Observed node -> value

    Returns:
        Conditional mean and covariance of targets

    Raises:
        OverlapError: If a target is also observed
        SingularConditioningError: If the observed block's determinant is
            below the singularity threshold
    """
    if set(targets) & set(given):
        raise OverlapError("Targets and conditioning nodes must be disjoint")

    t_idx = [joint.index(v) for v in targets]
    g_idx = [joint.index(v) for v in given]
    mean_t = joint.mean[t_idx]
    cov_tt = joint.covariance[np.ix_(t_idx, t_idx)]
    if not g_idx:
        return GaussianJoint(
            tuple(targets),
            tuple(joint.names[i] for i in t_idx),
            mean_t.copy(),
            cov_tt.copy(),
        )

    cov_gg = joint.covariance[np.ix_(g_idx, g_idx)]
    cov_tg = joint.covariance[np.ix_(t_idx, g_idx)]
    if abs(np.linalg.det(cov_gg)) < SINGULARITY_THRESHOLD:
        raise SingularConditioningError(
            "Covariance of the conditioning block is singular"
        )

    observed = np.array([given[v] for v in given], dtype=float)
    residual = observed - joint.mean[g_idx]
    gain = np.linalg.solve(cov_gg, cov_tg.T).T
    conditional_cov = cov_tt - gain @ cov_tg.T
    return GaussianJoint(
        tuple(targets),
        tuple(joint.names[i] for i in t_idx),
        mean_t + gain @ residual,
        (conditional_cov + conditional_cov.T) / 2.0,
    )


def is_positive_semidefinite(
    matrix: np.ndarray, floor: float = PSD_FLOOR
) -> bool:
    """True when the smallest eigenvalue of a symmetric matrix >= floor."""
    if matrix.size == 0:
        return True
    return bool(np.linalg.eigvalsh(matrix).min() >= floor)


def sample(
    model: GaussianLinearModel,
    n: int,
    seed: int,
    predictors: Mapping[str, Predictor] | None = None,
) -> pd.DataFrame:
    """Ancestral sampling of the model into a DataFrame.

    Nodes are drawn in topological order from one generator seeded with
    ``seed``; registered predictors run afterwards, in insertion order,
    on the same generator. Identical (model, n, seed, predictors) give
    bit-identical frames. Concurrent callers derive distinct seeds as
    ``base_seed + i``.

    Args:
        model: The model
        n: Number of rows (>= 1)
        seed: Generator seed
        predictors: Extra named columns computed from the sampled frame

    Returns:
        Categorical column per discrete root, float column per
        continuous node, then one column per predictor
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    dag = model.dag
    codes: dict[NodeId, np.ndarray] = {}
    values: dict[NodeId, np.ndarray] = {}

    for node in dag.topological_order():
        if node in model.discrete_roots:
            law = model.discrete_roots[node]
            codes[node] = rng.choice(
                len(law.labels), size=n, p=np.asarray(law.probs, dtype=float)
            )
            continue

        draws = rng.standard_normal(n)
        column = np.empty(n)
        discrete = model.discrete_parents(node)
        for key, mechanism in model.mechanisms[node].items():
            mask = np.ones(n, dtype=bool)
            if discrete:
                for parent, label in zip(discrete, key.split(","),
                                         strict=True):
                    code = model.discrete_roots[parent].labels.index(label)
                    mask &= codes[parent] == code
            value = np.full(mask.sum(), mechanism.intercept)
            for parent, coef in mechanism.coefficients.items():
                value = value + coef * values[parent][mask]
            value = value + np.sqrt(mechanism.noise_variance) * draws[mask]
            column[mask] = value
        values[node] = column

    frame = pd.DataFrame({
        dag.name(v): (
            pd.Categorical.from_codes(
                codes[v], categories=list(model.discrete_roots[v].labels)
            )
            if v in codes else values[v]
        )
        for v in dag.nodes
    })

    for name, predictor in (predictors or {}).items():
        frame[name] = np.asarray(predictor(frame, rng), dtype=float)
        logger.debug("Registered predictor column", extra={"column": name})
    return frame
