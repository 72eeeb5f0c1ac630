"""Interventions by graph mutilation and the causal fairness criteria.

``intervene`` cuts every edge into the assigned nodes and replaces their
laws by point masses, leaving all other mechanisms untouched. Interventional
distributions are then ordinary marginals of the mutilated model, provided
the query passes a conservative identifiability check: any intervened node
that still influences the target must have its back-door paths blocked by
observed variables.
"""

import itertools
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from dag_core import Dag, NodeId, is_d_separated
from discrete_model import DiscreteModel, JointTable, joint_distribution
from errors import DomainError, OverlapError
from fairness_criteria import (
    Criterion,
    CriterionReport,
    Method,
    Verdict,
    exact_report,
    undecidable,
)
from gaussian_model import (
    DiscreteRoot,
    GaussianLinearModel,
    Mechanism,
    joint_gaussian,
)
from settings import load_settings

logger = logging.getLogger(__name__)

Model = DiscreteModel | GaussianLinearModel

# Mediator settings for affine mechanisms: two points fix the line
MEDIATOR_POINTS = (0.0, 1.0)


@dataclass(frozen=True)
class Intervention:
    """Assignments for a do() statement: node -> label or real value."""

    assignments: Mapping[NodeId, str | float]

    @classmethod
    def from_names(
        cls, dag: Dag, assignments: Mapping[str, str | float]
    ) -> "Intervention":
        """Build an intervention keyed by node names.

        Raises:
            UnknownNodeError: If a name is not in the graph
        """
        return cls({dag.node_id(name): value
                    for name, value in assignments.items()})

    @property
    def nodes(self) -> frozenset[NodeId]:
        return frozenset(self.assignments)


@dataclass(frozen=True)
class Unidentifiable:
    """A do-query the identifiability check refuses to evaluate."""

    target: NodeId
    intervened: frozenset[NodeId]
    reason: str


def _real(dag: Dag, node: NodeId, value: str | float) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise DomainError(
            f"'{value}' is not a real value for '{dag.name(node)}'"
        ) from None


def _intervene_discrete(
    model: DiscreteModel, iv: Intervention
) -> DiscreteModel:
    cpts = list(model.cpts)
    for node, value in iv.assignments.items():
        # the node loses its parents, so its CPT shrinks to a root vector
        point = np.zeros(model.cardinality(node))
        point[model.label_index(node, str(value))] = 1.0
        cpts[node] = point
    return DiscreteModel(
        model.dag.without_incoming(iv.nodes), model.domains, tuple(cpts)
    )


def _intervene_gaussian(
    model: GaussianLinearModel, iv: Intervention
) -> GaussianLinearModel:
    roots = dict(model.discrete_roots)
    mechanisms = dict(model.mechanisms)
    for node, value in iv.assignments.items():
        if model.is_discrete(node):
            law = roots[node]
            label = str(value)
            if label not in law.labels:
                raise DomainError(
                    f"'{label}' is not a label of '{model.dag.name(node)}'"
                )
            # keep every label so children's mechanism keys stay valid
            roots[node] = DiscreteRoot(
                law.labels,
                tuple(float(lbl == label) for lbl in law.labels),
            )
        else:
            mechanisms[node] = {
                "": Mechanism(
                    intercept=_real(model.dag, node, value),
                    noise_variance=0.0,
                )
            }
    return GaussianLinearModel(
        model.dag.without_incoming(iv.nodes),
        roots,
        mechanisms,
        model.nondegenerate - iv.nodes,
    )


def intervene(model: Model, iv: Intervention) -> Model:
    """Return the mutilated model for do(iv).

    Args:
        model: Discrete or linear-Gaussian model
        iv: Assignments; labels for discrete nodes, reals for continuous

    Returns:
        A new model of the same kind

    Raises:
        UnknownNodeError: If an assigned node is not in the graph
        DomainError: If a value is outside the node's domain

    Examples:
        >>> mutilated = intervene(model, Intervention({x2: "1"}))
        >>> mutilated.dag.parents(x2)
        ()
    """
    model.dag.check(*iv.nodes)
    if isinstance(model, DiscreteModel):
        return _intervene_discrete(model, iv)
    return _intervene_gaussian(model, iv)


def identifiability(
    dag: Dag, target: NodeId, intervened: frozenset[NodeId]
) -> Unidentifiable | None:
    """Conservative identifiability check for P(target | do(intervened)).

    An intervened node that is no longer an ancestor of the target
    contributes nothing. Otherwise its effect is accepted when the graph
    is fully observed, when all its parents are observed, or when its
    back-door paths to the target are blocked by observed non-descendants
    (with the other interventions applied). Anything else is reported
    unidentifiable, which may reject some identifiable queries but never
    accepts an unidentifiable one.

    Returns:
        None when identifiable, else the reason
    """
    dag.check(target, *intervened)
    if target in intervened:
        raise OverlapError("The target cannot also be intervened on")

    mutilated = dag.without_incoming(intervened)
    influencing = sorted(
        v for v in intervened if v in mutilated.ancestors(target)
    )
    if not influencing or len(dag.observed_nodes) == len(dag):
        return None

    for v in influencing:
        if all(dag.is_observed(p) for p in dag.parents(v)):
            continue
        others = intervened - {v}
        cut = dag.without_incoming(others)
        backdoor = cut.without_outgoing([v])
        blockers = {
            w for w in cut.observed_nodes
            if w not in cut.descendants(v) and w not in (v, target)
        } | others
        if not is_d_separated(backdoor, v, target, blockers):
            reason = (
                f"'{dag.name(v)}' reaches '{dag.name(target)}' through a "
                f"back-door path that observed variables cannot block"
            )
            logger.info("Unidentifiable do-query",
                        extra={"target": dag.name(target),
                               "intervened": dag.name(v)})
            return Unidentifiable(target, intervened, reason)
    return None


def do_distribution(
    model: DiscreteModel,
    target: NodeId,
    iv: Intervention,
    size_cap: int | None = None,
) -> JointTable | Unidentifiable:
    """P(target | do(iv)) via the truncated factorization.

    Args:
        model: Discrete model
        target: Node whose interventional marginal is wanted
        iv: The intervention
        size_cap: Joint cell cap (default from settings)

    Returns:
        Table over ``target`` or an Unidentifiable result

    Raises:
        SizeCapError: If the mutilated joint exceeds the cell cap
    """
    blocked = identifiability(model.dag, target, iv.nodes)
    if blocked is not None:
        return blocked
    mutilated = intervene(model, iv)
    return joint_distribution(mutilated, size_cap).marginal([target])


@dataclass(frozen=True)
class GaussianMoments:
    """Interventional mean and variance of a target under one setting."""

    configuration: dict[str, str]
    mean: float
    variance: float


def gaussian_do_moments(
    model: GaussianLinearModel,
    target: NodeId,
    iv: Intervention,
) -> list[GaussianMoments] | Unidentifiable:
    """Interventional moments of a continuous target.

    One entry per labelling of the discrete roots left free by the
    intervention (intervened roots are pinned to their assigned label).
    """
    blocked = identifiability(model.dag, target, iv.nodes)
    if blocked is not None:
        return blocked
    mutilated = intervene(model, iv)
    dag = model.dag

    results = []
    for config in mutilated.configurations():
        pinned = all(
            config[node] == str(value)
            for node, value in iv.assignments.items()
            if model.is_discrete(node)
        )
        if not pinned:
            continue
        joint = joint_gaussian(mutilated, config)
        results.append(GaussianMoments(
            {dag.name(k): v for k, v in config.items()},
            joint.mean_of(target),
            joint.variance_of(target),
        ))
    return results


def _settings_for(model: Model, node: NodeId) -> list[str | float]:
    """Values a do() on ``node`` ranges over: labels, or two reals."""
    if isinstance(model, DiscreteModel):
        return list(model.domains[node])
    if model.is_discrete(node):
        return list(model.discrete_roots[node].labels)
    return list(MEDIATOR_POINTS)


def _discrete_gap(
    model: DiscreteModel,
    r: NodeId,
    a: NodeId,
    mediators: Sequence[NodeId],
    size_cap: int | None,
) -> float:
    """Largest cell gap in P(r | do(a), do(mediators)) between a-values.

    Args:
        model: Discrete model
        r: Prediction node
        a: Sensitive attribute
        mediators: Nodes held fixed, one product over their domains
        size_cap: Joint cell cap

    Returns:
        Max over mediator settings and a-pairs of the largest
        |P(r | do(a=a1, m)) - P(r | do(a=a2, m))|

    Examples:
        >>> _discrete_gap(model, r_x2, a, [x2], None)  # R copies X2
        0.0
    """
    gap = 0.0
    # with no mediators the product yields one empty setting
    for setting in itertools.product(
        *(model.domains[m] for m in mediators)
    ):
        fixed = dict(zip(mediators, setting, strict=True))
        tables = [
            intervene(model, Intervention({a: label, **fixed}))
            for label in model.domains[a]
        ]
        dists = [
            joint_distribution(t, size_cap).marginal([r]).probabilities
            for t in tables
        ]
        for p, q in itertools.combinations(dists, 2):
            gap = max(gap, float(np.abs(p - q).max()))
    return gap


def _gaussian_gaps(
    model: GaussianLinearModel,
    r: NodeId,
    a: NodeId,
    mediators: Sequence[NodeId],
) -> dict[str, float]:
    """Largest mean and variance gaps of r across do(a) values.

    Moments are compared per remaining discrete-root configuration, so a
    free root never mixes its groups into one Gaussian mixture.

    Examples:
        >>> _gaussian_gaps(grouped, y, a, [])
        {'max_mean_gap': 4.0, 'max_variance_gap': 12.0}
    """
    gaps = {"max_mean_gap": 0.0, "max_variance_gap": 0.0}
    # a discrete root has no parents to carry an effect
    if model.is_discrete(r):
        return gaps
    for setting in itertools.product(
        *(_settings_for(model, m) for m in mediators)
    ):
        fixed = dict(zip(mediators, setting, strict=True))
        per_value = [
            gaussian_do_moments(model, r, Intervention({a: value, **fixed}))
            for value in _settings_for(model, a)
        ]
        # same remaining-root configurations, same order, for every value
        for first, second in itertools.combinations(per_value, 2):
            for m1, m2 in zip(first, second, strict=True):
                gaps["max_mean_gap"] = max(
                    gaps["max_mean_gap"], abs(m1.mean - m2.mean)
                )
                gaps["max_variance_gap"] = max(
                    gaps["max_variance_gap"], abs(m1.variance - m2.variance)
                )
    return gaps


def _causal_criterion(
    criterion: Criterion,
    model: Model,
    r: NodeId,
    a: NodeId,
    mediators: Sequence[NodeId],
    tol: float | None,
    size_cap: int | None,
) -> CriterionReport:
    """Shared body of cde_equal and te_equal (te has no mediators).

    Raises:
        OverlapError: If r, a and the mediators are not distinct
    """
    tol = tol if tol is not None else load_settings().exact_tol
    dag = model.dag
    dag.check(r, a, *mediators)
    if r == a or r in mediators or a in mediators:
        raise OverlapError("r, a and the mediators must be distinct")
    subject = dag.name(r)

    blocked = identifiability(dag, r, frozenset({a, *mediators}))
    if blocked is not None:
        return undecidable(criterion, Method.EXACT, tol, blocked.reason,
                           subject)

    if isinstance(model, DiscreteModel):
        gap = _discrete_gap(model, r, a, mediators, size_cap)
        return exact_report(criterion, gap, tol, subject)

    gaps = _gaussian_gaps(model, r, a, mediators)
    satisfied = all(g <= tol for g in gaps.values())
    return CriterionReport(
        criterion=criterion,
        method=Method.EXACT,
        gaps=gaps,
        threshold=tol,
        verdict=Verdict.SATISFIED if satisfied else Verdict.VIOLATED,
        subject=subject,
    )


def cde_equal(
    model: Model,
    r: NodeId,
    a: NodeId,
    mediators: Sequence[NodeId],
    tol: float | None = None,
    size_cap: int | None = None,
) -> CriterionReport:
    """Controlled direct effect equality.

    Compares P(r | do(a), do(mediators = x)) across every pair of a's
    values, for every mediator setting x. Gaussian models compare means
    and variances; continuous mediators are fixed at 0 and at 1.

    Args:
        model: Discrete or linear-Gaussian model
        r: Prediction node
        a: Sensitive attribute
        mediators: Nodes held fixed
        tol: Tolerance on the largest gap (default from settings)
        size_cap: Joint cell cap for discrete models

    Returns:
        Exact report; undecidable when the query is unidentifiable
    """
    return _causal_criterion(
        Criterion.CDE_EQUAL, model, r, a, list(mediators), tol, size_cap
    )


def te_equal(
    model: Model,
    r: NodeId,
    a: NodeId,
    tol: float | None = None,
    size_cap: int | None = None,
) -> CriterionReport:
    """Total effect equality: P(r | do(a)) is the same for every a."""
    return _causal_criterion(
        Criterion.TE_EQUAL, model, r, a, [], tol, size_cap
    )
