"""Exact finite-domain graphical models.

A ``DiscreteModel`` pairs a ``Dag`` with one conditional probability table
per node. The joint distribution is the product of those tables (the
Markov factorization) and is built by brute force, which keeps every
marginal, conditional and independence query exact at desk scale.
"""

import itertools
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from math import prod

import numpy as np
import pandas as pd

from dag_core import Dag, NodeId, is_d_separated
from errors import (
    DomainError,
    ModelError,
    OverlapError,
    SizeCapError,
    ZeroProbabilityEvidenceError,
)
from settings import load_settings

logger = logging.getLogger(__name__)

ROW_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    """Dag plus a CPT per node over finite, labelled domains.

    ``cpts[v]`` has shape ``(*parent cardinalities, cardinality of v)``
    with parents in declaration order, so ``cpts[v][pa_config]`` is the
    distribution of ``v`` given that parent configuration.

    Raises:
        ModelError: If a domain is too small, a CPT has the wrong shape,
            or a CPT row is not a probability vector
    """

    dag: Dag
    domains: tuple[tuple[str, ...], ...]
    cpts: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.domains) != len(self.dag) or len(self.cpts) != len(
            self.dag
        ):
            raise ModelError("Every node needs exactly one domain and CPT")

        frozen_cpts = []
        for node in self.dag.nodes:
            name = self.dag.name(node)
            domain = self.domains[node]
            if len(domain) < 2:
                raise ModelError(f"Domain of '{name}' needs at least 2 labels")
            if len(set(domain)) != len(domain):
                raise ModelError(f"Domain of '{name}' repeats a label")

            table = np.array(self.cpts[node], dtype=float)
            expected = tuple(
                len(self.domains[p]) for p in self.dag.parents(node)
            ) + (len(domain),)
            if table.shape != expected:
                raise ModelError(
                    f"CPT of '{name}' has shape {table.shape}, "
                    f"expected {expected}"
                )
            if (table < 0).any() or not np.isfinite(table).all():
                raise ModelError(f"CPT of '{name}' has negative entries")
            if not np.allclose(table.sum(axis=-1), 1.0, rtol=0.0,
                               atol=ROW_TOLERANCE):
                raise ModelError(f"CPT rows of '{name}' must sum to 1")

            table.setflags(write=False)
            frozen_cpts.append(table)

        object.__setattr__(self, "domains", tuple(map(tuple, self.domains)))
        object.__setattr__(self, "cpts", tuple(frozen_cpts))

    def cardinality(self, node: NodeId) -> int:
        return len(self.domains[node])

    def label_index(self, node: NodeId, label: str) -> int:
        """Position of ``label`` in the node's domain."""
        try:
            return self.domains[node].index(str(label))
        except ValueError:
            raise DomainError(
                f"'{label}' is not in the domain of "
                f"'{self.dag.name(node)}': {list(self.domains[node])}"
            ) from None

    def with_node(
        self,
        name: str,
        parents: Sequence[NodeId],
        domain: Sequence[str],
        cpt: np.ndarray,
        observed: bool = True,
    ) -> "DiscreteModel":
        """Return a model with one more node appended (e.g. a predictor)."""
        return DiscreteModel(
            self.dag.with_node(name, parents, observed),
            self.domains + (tuple(domain),),
            self.cpts + (np.asarray(cpt, dtype=float),),
        )


@dataclass(frozen=True, eq=False)
class JointTable:
    """Dense probability table over an ordered list of variables.

    Attributes:
        variables: Node handles, one per array axis
        names: Node names, parallel to variables
        domains: Category labels per axis
        probabilities: Array of shape (len(domains[0]), ...)
    """

    variables: tuple[NodeId, ...]
    names: tuple[str, ...]
    domains: tuple[tuple[str, ...], ...]
    probabilities: np.ndarray

    def axis(self, node: NodeId) -> int:
        try:
            return self.variables.index(node)
        except ValueError:
            raise ModelError(f"Node {node!r} is not in this table") from None

    def marginal(self, nodes: Sequence[NodeId]) -> "JointTable":
        """Sum out every variable not in ``nodes`` and reorder the rest."""
        axes = [self.axis(v) for v in nodes]
        if len(set(axes)) != len(axes):
            raise ModelError("Marginal variables must be distinct")
        others = tuple(i for i in range(len(self.variables)) if i not in axes)
        summed = self.probabilities.sum(axis=others)
        # after summing, remaining axes keep their relative order
        kept = sorted(axes)
        order = [kept.index(a) for a in axes]
        return JointTable(
            tuple(nodes),
            tuple(self.names[a] for a in axes),
            tuple(self.domains[a] for a in axes),
            np.transpose(summed, order) if order else summed,
        )

    def probability(self, assignment: Mapping[NodeId, str]) -> float:
        """Mass of a full or partial assignment of labels."""
        table = self.marginal(list(assignment))
        index = tuple(
            table.domains[i].index(str(assignment[v]))
            for i, v in enumerate(table.variables)
        )
        return float(table.probabilities[index])

    def to_records(self) -> list[dict[str, object]]:
        """Rows of {name: label, ..., "p": probability} in table order."""
        records = []
        for cell in itertools.product(*(range(len(d)) for d in self.domains)):
            row: dict[str, object] = {
                name: self.domains[i][cell[i]]
                for i, name in enumerate(self.names)
            }
            row["p"] = float(self.probabilities[cell])
            records.append(row)
        return records


def joint_distribution(
    model: DiscreteModel,
    size_cap: int | None = None,
) -> JointTable:
    """Multiply every CPT into the full joint table.

    Args:
        model: The discrete model
        size_cap: Largest table allowed in cells (default from settings)

    Returns:
        JointTable over every node in declaration order

    Raises:
        SizeCapError: If the table would exceed size_cap cells

    Examples:
        >>> joint_distribution(copy_chain).probabilities
        array([[0.5, 0. ],
               [0. , 0.5]])
    """
    size_cap = size_cap if size_cap is not None else load_settings().size_cap
    dag = model.dag
    shape = tuple(model.cardinality(v) for v in dag.nodes)
    cells = prod(shape)
    if cells > size_cap:
        raise SizeCapError(
            f"Joint table needs {cells} cells, cap is {size_cap}"
        )
    logger.debug("Building joint table", extra={"cells": cells})

    joint = np.ones(shape, dtype=float)
    for node in dag.nodes:
        axes = list(dag.parents(node)) + [node]
        order = np.argsort(axes)
        table = np.transpose(model.cpts[node], order)
        broadcast = [
            shape[i] if i in axes else 1 for i in range(len(shape))
        ]
        joint = joint * table.reshape(broadcast)

    return JointTable(
        tuple(dag.nodes),
        tuple(dag.name(v) for v in dag.nodes),
        model.domains,
        joint,
    )


def query(
    joint: JointTable,
    targets: Sequence[NodeId],
    given: Mapping[NodeId, str] | None = None,
) -> JointTable:
    """Conditional marginal table of ``targets`` given label evidence.

    Args:
        joint: Table to query (need not be the full joint)
        targets: Nodes to keep, in output axis order
        given: Evidence as node -> category label

    Returns:
        Normalized table over targets

    Raises:
        OverlapError: If a target also appears in the evidence
        DomainError: If an evidence label is not in the node's domain
        ZeroProbabilityEvidenceError: If the evidence has zero mass

    Examples:
        >>> query(joint, [v2], {v1: "0"}).probabilities
        array([1., 0.])
    """
    given = dict(given or {})
    if set(targets) & set(given):
        raise OverlapError("Targets and evidence must be disjoint")

    evidence = list(given)
    table = joint.marginal(list(targets) + evidence)
    index: list[int | slice] = [slice(None)] * len(targets)
    for offset, node in enumerate(evidence):
        domain = table.domains[len(targets) + offset]
        label = str(given[node])
        if label not in domain:
            raise DomainError(
                f"'{label}' is not in the domain of "
                f"'{table.names[len(targets) + offset]}'"
            )
        index.append(domain.index(label))

    sliced = table.probabilities[tuple(index)]
    mass = float(np.sum(sliced))
    if mass <= 0.0:
        raise ZeroProbabilityEvidenceError(
            f"Evidence {given} has zero probability"
        )

    return JointTable(
        tuple(targets),
        table.names[: len(targets)],
        table.domains[: len(targets)],
        sliced / mass,
    )


def independence_gap(
    joint: JointTable,
    x: NodeId,
    y: NodeId,
    s: Iterable[NodeId] = (),
) -> float:
    """Largest |P(x,y|s) - P(x|s)P(y|s)| over cells with P(s) > 0."""
    s = list(s)
    table = joint.marginal([x, y, *s]).probabilities
    cx, cy = table.shape[:2]
    table = table.reshape(cx, cy, -1)

    mass = table.sum(axis=(0, 1))
    positive = mass > 0.0
    if not positive.any():
        return 0.0
    conditional = table[:, :, positive] / mass[positive]
    px = conditional.sum(axis=1)
    py = conditional.sum(axis=0)
    product = px[:, None, :] * py[None, :, :]
    return float(np.abs(conditional - product).max())


def _check_triple(
    model: DiscreteModel, x: NodeId, y: NodeId, s: frozenset[NodeId]
) -> None:
    model.dag.check(x, y, *s)
    if x == y:
        raise OverlapError("x and y must be distinct nodes")
    if x in s or y in s:
        raise OverlapError("x and y must not be in the conditioning set")


def conditional_independent(
    model: DiscreteModel,
    x: NodeId,
    y: NodeId,
    s: Iterable[NodeId] = (),
    tol: float | None = None,
    size_cap: int | None = None,
) -> bool:
    """Exact test of x independent of y given s, cell-wise within tol.

    Raises:
        OverlapError: If x == y or an endpoint is in s
        SizeCapError: If the joint table exceeds the cell cap
    """
    s = frozenset(s)
    _check_triple(model, x, y, s)
    tol = tol if tol is not None else load_settings().exact_tol
    joint = joint_distribution(model, size_cap)
    return independence_gap(joint, x, y, sorted(s)) <= tol


@dataclass(frozen=True)
class FaithfulnessViolation:
    """A d-connected triple that is nonetheless independent."""

    x: NodeId
    y: NodeId
    s: frozenset[NodeId]
    d_connected: bool = True
    independent: bool = True

    def describe(self, dag: Dag) -> dict[str, object]:
        return {
            "x": dag.name(self.x),
            "y": dag.name(self.y),
            "s": sorted(dag.name(v) for v in self.s),
            "d_connected": self.d_connected,
            "independent": self.independent,
        }


def faithfulness_report(
    model: DiscreteModel,
    tol: float | None = None,
    size_cap: int | None = None,
) -> list[FaithfulnessViolation]:
    """List every d-connected triple that is independent within tol.

    An empty list means the model is faithful at tol.

    Raises:
        SizeCapError: If the graph has more nodes than the faithfulness
            cap or the joint exceeds the cell cap
    """
    settings = load_settings()
    tol = tol if tol is not None else settings.exact_tol
    dag = model.dag
    if len(dag) > settings.faithfulness_node_cap:
        raise SizeCapError(
            f"Faithfulness audit enumerates at most "
            f"{settings.faithfulness_node_cap} nodes, got {len(dag)}"
        )

    joint = joint_distribution(model, size_cap)
    violations = []
    for x, y in itertools.combinations(dag.nodes, 2):
        rest = [v for v in dag.nodes if v not in (x, y)]
        for size in range(len(rest) + 1):
            for s in itertools.combinations(rest, size):
                if is_d_separated(dag, x, y, s):
                    continue
                if independence_gap(joint, x, y, s) <= tol:
                    violations.append(
                        FaithfulnessViolation(x, y, frozenset(s))
                    )
    return violations


def sample_discrete(
    model: DiscreteModel,
    n: int,
    seed: int,
) -> pd.DataFrame:
    """Ancestral sampling into a DataFrame of categorical columns.

    Identical (model, n, seed) always give identical output.

    Args:
        model: The discrete model
        n: Number of rows (>= 1)
        seed: Seed for numpy's default generator

    Returns:
        One categorical column per node, named by node name
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    dag = model.dag
    codes: dict[NodeId, np.ndarray] = {}

    for node in dag.topological_order():
        parents = dag.parents(node)
        table = model.cpts[node]
        if parents:
            rows = table[tuple(codes[p] for p in parents)]
        else:
            rows = np.broadcast_to(table, (n, table.shape[-1]))
        # inverse-CDF draw, one uniform per row
        cumulative = np.cumsum(rows, axis=1)
        draws = rng.random(n)[:, None]
        picked = (draws >= cumulative).sum(axis=1)
        codes[node] = np.minimum(picked, model.cardinality(node) - 1)

    return pd.DataFrame({
        dag.name(v): pd.Categorical.from_codes(
            codes[v], categories=list(model.domains[v])
        )
        for v in dag.nodes
    })


def random_cpts(
    dag: Dag,
    rng: np.random.Generator,
    cardinality: int = 2,
    concentration: float = 1.0,
) -> DiscreteModel:
    """Model on ``dag`` with every CPT row drawn from a Dirichlet.

    Labels are "0", "1", ... up to cardinality - 1.
    """
    labels = tuple(str(i) for i in range(cardinality))
    cpts = []
    for node in dag.nodes:
        rows = cardinality ** len(dag.parents(node))
        draws = rng.dirichlet([concentration] * cardinality, size=rows)
        cpts.append(
            draws.reshape((cardinality,) * len(dag.parents(node))
                          + (cardinality,))
        )
    return DiscreteModel(dag, (labels,) * len(dag), tuple(cpts))


def model_from_names(
    dag: Dag,
    domains: Mapping[str, Sequence[str]],
    cpts: Mapping[str, np.ndarray | Sequence],
) -> DiscreteModel:
    """Build a DiscreteModel from name-keyed domains and CPT arrays."""
    missing = [
        dag.name(v) for v in dag.nodes
        if dag.name(v) not in domains or dag.name(v) not in cpts
    ]
    if missing:
        raise ModelError(
            f"Missing domain or CPT for: {', '.join(missing)}"
        )
    return DiscreteModel(
        dag,
        tuple(tuple(str(lbl) for lbl in domains[dag.name(v)])
              for v in dag.nodes),
        tuple(np.asarray(cpts[dag.name(v)], dtype=float) for v in dag.nodes),
    )
