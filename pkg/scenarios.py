"""Worked fairness scenarios: graphs, parameters, predictors and audits.

Scenario 1 (loan repayment) is linear-Gaussian with a discrete sensitive
attribute A; scenarios 2, 2b, 3 and 4 are small binary models evaluated
exactly and on samples. ``evaluate_scenario`` samples a scenario, adds its
predictors as columns and runs the matching battery of criteria.

Node names follow the figures: A (sensitive attribute), X1..X3 (features),
Y (response), U (unobserved), R_* (predictions).
"""

import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str.__str__(self)

        def __format__(self, format_spec: str) -> str:
            return str.__format__(str(self), format_spec)
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    model_validator,
)

from causal_surgery import cde_equal, te_equal
from dag_core import Dag, build_dag
from discrete_model import (
    DiscreteModel,
    model_from_names,
    random_cpts,
    sample_discrete,
)
from errors import DegenerateGroupError, ParamError
from fairness_criteria import (
    Criterion,
    CriterionReport,
    exact_criteria,
    test_cond_independence,
    test_independence,
)
from gaussian_model import (
    DiscreteRoot,
    GaussianLinearModel,
    Mechanism,
    Predictor,
    conditional_gaussian,
    joint_gaussian,
    sample,
)

logger = logging.getLogger(__name__)

ScenarioModel = GaussianLinearModel | DiscreteModel

MIN_SAMPLES = 1_000
FIGURE_POINTS = 200
FIGURE_GRID = 50

# (name, observed) nodes and edges of each scenario's graph
SCENARIO_GRAPHS: dict[str, tuple[list[tuple[str, bool]],
                                 list[tuple[str, str]]]] = {
    "1": (
        [("A", True), ("X1", True), ("X2", True), ("X3", True),
         ("Y", True)],
        [("A", "X1"), ("A", "X2"), ("X2", "Y"), ("X3", "Y")],
    ),
    "1-biased": (
        [("A", True), ("E_X2", False), ("X1", True), ("X2", True),
         ("X3", True), ("Y", True)],
        [("A", "X1"), ("A", "X2"), ("E_X2", "X2"), ("E_X2", "Y"),
         ("X3", "Y")],
    ),
    "2": (
        [("A", True), ("X1", True), ("Y", True), ("X2", True)],
        [("A", "Y"), ("A", "X1"), ("Y", "X2")],
    ),
    "2b": (
        [("A", True), ("U", False), ("X1", True), ("X2", True),
         ("Y", True)],
        [("A", "U"), ("A", "X1"), ("U", "X2"), ("U", "Y")],
    ),
    "3": (
        [("A", True), ("X1", True), ("X2", True), ("Y", True)],
        [("A", "X1"), ("X1", "X2"), ("X1", "Y"), ("X2", "Y")],
    ),
    "4": (
        [("U", False), ("A", True), ("X", True), ("Y", True)],
        [("U", "A"), ("U", "Y"), ("U", "X")],
    ),
}

# P(node = 1 | parent configuration), parents in declaration order
HAND_CPTS: dict[str, dict[str, list]] = {
    "2": {
        "A": [0.5],
        "X1": [0.2, 0.7],
        "Y": [0.3, 0.6],
        "X2": [0.2, 0.8],
    },
    "2b": {
        "A": [0.5],
        "U": [0.3, 0.6],
        "X1": [0.2, 0.7],
        "X2": [0.2, 0.8],
        "Y": [0.1, 0.7],
    },
    "3": {
        "A": [0.5],
        "X1": [0.3, 0.7],
        "X2": [0.2, 0.75],
        "Y": [[0.1, 0.4], [0.5, 0.8]],
    },
    "4": {
        "U": [0.4],
        "A": [0.3, 0.7],
        "X": [0.2, 0.65],
        "Y": [0.1, 0.6],
    },
}

BINARY = ("0", "1")


class ScenarioId(StrEnum):
    ONE = "1"
    TWO = "2"
    TWO_B = "2b"
    THREE = "3"
    FOUR = "4"


class PredictorForm(StrEnum):
    RAW_FEATURE = "raw_feature"
    DEMEANED_FEATURE = "demeaned_feature"
    SIGNAL = "signal"
    SEPARATION_ENFORCING = "separation_enforcing"
    DESCENDANT_OF_Y = "descendant_of_Y"


class PredictorSpec(BaseModel):
    """Declared shape of a prediction built from scenario features."""

    model_config = ConfigDict(frozen=True)

    name: str
    inputs: tuple[str, ...]
    form: PredictorForm
    randomized: bool = False

    @model_validator(mode="after")
    def _only_separation_is_randomized(self) -> "PredictorSpec":
        if self.randomized and self.form != PredictorForm.SEPARATION_ENFORCING:
            raise ValueError("Only separation_enforcing may add noise")
        return self


@dataclass(frozen=True)
class ScenarioPredictor:
    """A predictor spec with the function that computes its column."""

    spec: PredictorSpec
    compute: Predictor

    def __call__(
        self, frame: pd.DataFrame, rng: np.random.Generator
    ) -> np.ndarray:
        return self.compute(frame, rng)


class Scenario1Params(BaseModel):
    """Parameters of the loan-repayment scenario.

    X2 | A=a ~ N(mu[a], sigma2_a[a]); X3 ~ N(x3_mean, x3_variance);
    Y = beta X2 + gamma (X3 - x3_mean) + eps, with the noise variance
    chosen so that Y | X2 ~ N(beta X2, sigma2). X1 | A=a ~
    N(x1_means[a], x1_variance) is unrelated to Y.

    With ``biased_credit`` the credit rating is X2 = mu[A] + sigma_A E_X2
    where the unobserved residual E_X2 ~ N(0, 1) drives Y in place of X2
    (Y = beta E_X2 + gamma (X3 - x3_mean) + eps).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    groups: tuple[str, ...] = ("a0", "a1")
    probs: tuple[float, ...] = (0.5, 0.5)
    mu: tuple[float, ...] = (0.0, 2.0)
    sigma2_a: tuple[float, ...] = (4.0, 1.0)
    beta: float = 1.0
    sigma2: float = Field(default=1.0, gt=0.0)
    x3_mean: float = 0.0
    x3_variance: float = Field(default=1.0, gt=0.0)
    gamma: float = 0.5
    x1_means: tuple[float, ...] = (0.0, 1.0)
    x1_variance: float = Field(default=1.0, gt=0.0)
    biased_credit: bool = False

    @model_validator(mode="after")
    def _check(self) -> "Scenario1Params":
        k = len(self.groups)
        if k < 1 or len(set(self.groups)) != k:
            raise ValueError("groups must be non-empty and distinct")
        for field in ("probs", "mu", "sigma2_a", "x1_means"):
            if len(getattr(self, field)) != k:
                raise ValueError(f"{field} needs one entry per group")
        if any(p < 0 for p in self.probs) or abs(sum(self.probs) - 1) > 1e-9:
            raise ValueError("group probs must sum to 1")
        if any(v <= 0 for v in self.sigma2_a):
            raise ValueError("sigma2_a must be positive")
        if self.gamma**2 * self.x3_variance >= self.sigma2:
            raise ValueError("gamma^2 * x3_variance must be below sigma2")
        return self

    @property
    def rho(self) -> np.ndarray:
        """Share of Var(Y | A=a) explained by beta X2, per group.

        X2 | Y, A=a has mean (1 - rho_a) mu_a + rho_a Y / beta and
        variance sigma2_a (1 - rho_a) = sigma2 rho_a / beta^2. The shorter
        form sigma2 rho_a only agrees when beta = 1.
        """
        signal = self.beta**2 * np.asarray(self.sigma2_a)
        return signal / (signal + self.sigma2)

    @property
    def c(self) -> float:
        """max_a 1/rho_a, so Var(R | Y) of separation_enforcing is c sigma2."""
        rho = self.rho
        if (rho <= 0).any():
            raise DegenerateGroupError(
                "rho_a is zero for some group (beta = 0)"
            )
        return float((1.0 / rho).max())

    def z_variances(self) -> np.ndarray:
        """Variance of the added noise Z per group."""
        return (self.c - 1.0 / self.rho) * self.sigma2


class DiscreteScenarioParams(BaseModel):
    """Binary scenarios: documented hand CPTs, or Dirichlet draws."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    cpt_seed: int | None = None
    concentration: float = Field(default=1.0, gt=0.0)


def parse_params(
    scenario_id: str, raw: Mapping[str, object] | None = None
) -> Scenario1Params | DiscreteScenarioParams:
    """Validate raw parameters for a scenario.

    Raises:
        ParamError: If the id is unknown or a parameter is invalid
    """
    try:
        match ScenarioId(scenario_id):
            case ScenarioId.ONE:
                return Scenario1Params(**(raw or {}))
            case _:
                return DiscreteScenarioParams(**(raw or {}))
    except ValidationError as error:
        raise ParamError(f"Invalid scenario parameters: {error}") from error
    except ValueError:
        raise ParamError(f"Unknown scenario: '{scenario_id}'") from None


def scenario_graph(key: str) -> Dag:
    nodes, edges = SCENARIO_GRAPHS[key]
    return build_dag(nodes, edges)


# ---------------------------------------------------------------------------
# Scenario 1


def _build_scenario1(params: Scenario1Params) -> GaussianLinearModel:
    key = "1-biased" if params.biased_credit else "1"
    dag = scenario_graph(key)
    a, x1, x2, x3, y = (dag.node_id(n) for n in ("A", "X1", "X2", "X3",
                                                 "Y"))
    per_group = list(zip(params.groups, params.mu, params.sigma2_a,
                         params.x1_means, strict=True))

    mechanisms = {
        x1: {g: Mechanism(m1, {}, params.x1_variance)
             for g, _, _, m1 in per_group},
        x3: {"": Mechanism(params.x3_mean, {}, params.x3_variance)},
    }
    # X3 takes its share of sigma2 so that Var(Y | X2) stays sigma2
    noise = params.sigma2 - params.gamma**2 * params.x3_variance
    if params.biased_credit:
        e = dag.node_id("E_X2")
        mechanisms[e] = {"": Mechanism(0.0, {}, 1.0)}
        mechanisms[x2] = {
            g: Mechanism(mu, {e: float(np.sqrt(s2))}, 0.0)
            for g, mu, s2, _ in per_group
        }
        driver = e
        nondegenerate = frozenset({x1, x3, y, e})
    else:
        mechanisms[x2] = {g: Mechanism(mu, {}, s2)
                          for g, mu, s2, _ in per_group}
        driver = x2
        nondegenerate = frozenset({x1, x2, x3, y})
    mechanisms[y] = {
        "": Mechanism(
            -params.gamma * params.x3_mean,
            {driver: params.beta, x3: params.gamma},
            noise,
        )
    }
    return GaussianLinearModel(
        dag,
        {a: DiscreteRoot(params.groups, params.probs)},
        mechanisms,
        nondegenerate,
    )


def _group_index(frame: pd.DataFrame, params: Scenario1Params) -> np.ndarray:
    return pd.Categorical(
        frame["A"].astype(str), categories=list(params.groups)
    ).codes


def scenario1_predictors(
    params: Scenario1Params,
) -> dict[str, ScenarioPredictor]:
    """The four Scenario-1 predictors, keyed by column name.

    independence_demeaned: beta (X2 - mu_A) / sigma_A + gamma (X3 - m3),
        identically distributed in every group
    separation_enforcing: beta (X2 - (1 - rho_A) mu_A) / rho_A + Z with
        Z ~ N(0, (c - 1/rho_A) sigma2), so R | Y, A ~ N(Y, c sigma2)
    sufficiency_signal: beta X2, invertible in X2
    naive: beta X2, ignoring the groups

    With ``biased_credit`` the separation-enforcing predictor is left out:
    its construction assumes Y is driven by X2 itself.

    Raises:
        DegenerateGroupError: If some rho_a is zero
    """
    rho = params.rho
    if (rho <= 0).any():
        raise DegenerateGroupError(
            "rho_a is zero for some group (beta = 0); separation cannot "
            "be enforced"
        )
    mu = np.asarray(params.mu)
    sd = np.sqrt(np.asarray(params.sigma2_a))
    z_sd = np.sqrt(np.clip(params.z_variances(), 0.0, None))
    beta, gamma, m3 = params.beta, params.gamma, params.x3_mean

    def demeaned(frame: pd.DataFrame, rng: np.random.Generator) -> np.ndarray:
        g = _group_index(frame, params)
        return (beta * (frame["X2"].to_numpy() - mu[g]) / sd[g]
                + gamma * (frame["X3"].to_numpy() - m3))

    def separation(frame: pd.DataFrame,
                   rng: np.random.Generator) -> np.ndarray:
        g = _group_index(frame, params)
        shifted = frame["X2"].to_numpy() - (1.0 - rho[g]) * mu[g]
        return beta * shifted / rho[g] + z_sd[g] * rng.standard_normal(
            len(frame)
        )

    def signal(frame: pd.DataFrame, rng: np.random.Generator) -> np.ndarray:
        return beta * frame["X2"].to_numpy()

    predictors = {
        "independence_demeaned": ScenarioPredictor(
            PredictorSpec(name="independence_demeaned",
                          inputs=("X2", "X3", "A"),
                          form=PredictorForm.DEMEANED_FEATURE),
            demeaned,
        ),
        "separation_enforcing": ScenarioPredictor(
            PredictorSpec(name="separation_enforcing", inputs=("X2", "A"),
                          form=PredictorForm.SEPARATION_ENFORCING,
                          randomized=True),
            separation,
        ),
        "sufficiency_signal": ScenarioPredictor(
            PredictorSpec(name="sufficiency_signal", inputs=("X2",),
                          form=PredictorForm.SIGNAL),
            signal,
        ),
        "naive": ScenarioPredictor(
            PredictorSpec(name="naive", inputs=("X2",),
                          form=PredictorForm.RAW_FEATURE),
            signal,
        ),
    }
    if params.biased_credit:
        del predictors["separation_enforcing"]
    return predictors


def single_feature_predictors() -> dict[str, ScenarioPredictor]:
    """R1 on hair colour X1 and R3 on interest rate X3."""

    def column(name: str) -> ScenarioPredictor:
        return ScenarioPredictor(
            PredictorSpec(name=f"R_{name.lower()}", inputs=(name,),
                          form=PredictorForm.RAW_FEATURE),
            lambda frame, rng: frame[name].to_numpy(dtype=float),
        )

    return {"R_x1": column("X1"), "R_x3": column("X3")}


def separation_enforcing_model(
    params: Scenario1Params,
) -> GaussianLinearModel:
    """Scenario 1 with the separation-enforcing predictor as a node R.

    R = (beta / rho_a) X2 - beta (1 - rho_a) mu_a / rho_a + Z, so its
    moments given Y can be checked in closed form.
    """
    if params.biased_credit:
        raise ParamError("The separation-enforcing node needs Y driven by X2")
    base = _build_scenario1(params)
    dag = base.dag.with_node("R", [base.dag.node_id("A"),
                                   base.dag.node_id("X2")])
    x2, r = dag.node_id("X2"), dag.node_id("R")
    rho = params.rho
    z_var = params.z_variances()
    mechanisms = dict(base.mechanisms)
    mechanisms[r] = {
        g: Mechanism(
            -params.beta * (1.0 - rho[i]) * params.mu[i] / rho[i],
            {x2: params.beta / rho[i]},
            max(float(z_var[i]), 0.0),
        )
        for i, g in enumerate(params.groups)
    }
    return GaussianLinearModel(
        dag, base.discrete_roots, mechanisms, base.nondegenerate
    )


def signal_column(frame: pd.DataFrame, params: Scenario1Params) -> np.ndarray:
    """theta = E[Y | features], the signal Parity by Signal conditions on."""
    driver = "E_X2" if params.biased_credit else "X2"
    return (params.beta * frame[driver].to_numpy()
            + params.gamma * (frame["X3"].to_numpy() - params.x3_mean))


# ---------------------------------------------------------------------------
# Discrete scenarios


def _hand_cpt(p_one: list) -> np.ndarray:
    p = np.asarray(p_one, dtype=float)
    return np.stack([1.0 - p, p], axis=-1)


def _build_discrete(
    scenario_id: ScenarioId, params: DiscreteScenarioParams
) -> DiscreteModel:
    dag = scenario_graph(scenario_id.value)
    if params.cpt_seed is not None:
        rng = np.random.default_rng(params.cpt_seed)
        return random_cpts(dag, rng, concentration=params.concentration)
    cpts = {name: _hand_cpt(p) for name, p in
            HAND_CPTS[scenario_id.value].items()}
    # root tables are vectors, not 1-row matrices
    cpts = {name: t.reshape(t.shape[-1]) if t.ndim == 2 and t.shape[0] == 1
            else t for name, t in cpts.items()}
    domains = {dag.name(v): BINARY for v in dag.nodes}
    return model_from_names(dag, domains, cpts)


def build_scenario(
    scenario_id: str,
    params: Scenario1Params | DiscreteScenarioParams | None = None,
) -> ScenarioModel:
    """Build the model of a scenario.

    Scenario 1 is linear-Gaussian; 2, 2b, 3 and 4 are binary discrete
    models whose graphs follow their figures node for node.

    Args:
        scenario_id: One of "1", "2", "2b", "3", "4"
        params: Matching parameter model (defaults when None)

    Returns:
        GaussianLinearModel for "1", DiscreteModel otherwise

    Raises:
        ParamError: If the id is unknown or params do not fit it

    Examples:
        >>> build_scenario("2").dag.edge_names()
        [('A', 'X1'), ('A', 'Y'), ('Y', 'X2')]
    """
    if params is None:
        params = parse_params(scenario_id)
    try:
        sid = ScenarioId(scenario_id)
    except ValueError:
        raise ParamError(f"Unknown scenario: '{scenario_id}'") from None

    match sid, params:
        case ScenarioId.ONE, Scenario1Params():
            return _build_scenario1(params)
        case ScenarioId.ONE, _:
            raise ParamError("Scenario 1 takes Scenario1Params")
        case _, DiscreteScenarioParams():
            return _build_discrete(sid, params)
        case _:
            raise ParamError(
                f"Scenario {scenario_id} takes DiscreteScenarioParams"
            )


def _deterministic(
    parent_cards: tuple[int, ...], rule: Callable[..., int]
) -> np.ndarray:
    """CPT putting all mass on rule(*parent codes)."""
    table = np.zeros(parent_cards + (2,))
    for codes in np.ndindex(*parent_cards):
        table[codes + (int(rule(*codes)),)] = 1.0
    return table


def discrete_predictors(
    scenario_id: str, model: DiscreteModel
) -> tuple[DiscreteModel, dict[str, PredictorSpec]]:
    """Append a scenario's predictors as deterministic nodes.

    Scenario 2/2b: R_x1 copies X1 and R_x2 copies X2 (a child of Y, or
    of U). Scenario 3: R_x2 copies X2 and R_x1x2 = X1 xor X2.
    Scenario 4: R_x copies X.
    """
    dag = model.dag

    def copy(source: str) -> tuple[str, list[int], np.ndarray, PredictorSpec]:
        form = (PredictorForm.DESCENDANT_OF_Y
                if source == "X2" and scenario_id == "2"
                else PredictorForm.RAW_FEATURE)
        name = f"R_{source.lower()}"
        return (name, [dag.node_id(source)], np.eye(2),
                PredictorSpec(name=name, inputs=(source,), form=form))

    match scenario_id:
        case "2" | "2b":
            added = [copy("X1"), copy("X2")]
        case "3":
            x1, x2 = dag.node_id("X1"), dag.node_id("X2")
            added = [
                copy("X2"),
                ("R_x1x2", [x1, x2], _deterministic((2, 2), np.bitwise_xor),
                 PredictorSpec(name="R_x1x2", inputs=("X1", "X2"),
                               form=PredictorForm.RAW_FEATURE)),
            ]
        case "4":
            added = [copy("X")]
        case _:
            raise ParamError(f"No discrete predictors for '{scenario_id}'")

    specs = {}
    for name, parents, cpt, spec in added:
        model = model.with_node(name, parents, BINARY, cpt)
        specs[name] = spec
    return model, specs


def discretized_scenario1(cpt_seed: int = 0) -> DiscreteModel:
    """Binary version of the Scenario 1 graph with R_x2 copying X2."""
    dag = scenario_graph("1")
    model = random_cpts(dag, np.random.default_rng(cpt_seed))
    return model.with_node("R_x2", [dag.node_id("X2")], BINARY, np.eye(2))


def unfaithful_fixture(coefficient: float = -2.0) -> GaussianLinearModel:
    """V2 = 3 V1 + e2, V3 = 2 V1 + e3, V4 = coefficient V2 + 3 V3 + e4.

    At the default coefficient the two paths from V1 to V4 cancel, so
    Cov(V1, V4) = 0 although V1 and V4 are d-connected.
    """
    dag = build_dag(
        [("V1", True), ("V2", True), ("V3", True), ("V4", True)],
        [("V1", "V2"), ("V1", "V3"), ("V2", "V4"), ("V3", "V4")],
    )
    v1, v2, v3, v4 = dag.nodes
    return GaussianLinearModel(
        dag,
        {},
        {
            v1: {"": Mechanism()},
            v2: {"": Mechanism(0.0, {v1: 3.0})},
            v3: {"": Mechanism(0.0, {v1: 2.0})},
            v4: {"": Mechanism(0.0, {v2: coefficient, v3: 3.0})},
        },
    )


def unfaithful_discrete_fixture() -> DiscreteModel:
    """Binary model on the same graph where V4 is independent of V1.

    V2 and V3 each copy V1 with flip probability 0.2, and V4 signals
    whether they disagree. Disagreement has probability 0.32 whatever
    V1 is.
    """
    dag = build_dag(
        [("V1", True), ("V2", True), ("V3", True), ("V4", True)],
        [("V1", "V2"), ("V1", "V3"), ("V2", "V4"), ("V3", "V4")],
    )
    noisy_copy = _hand_cpt([0.2, 0.8])
    return model_from_names(
        dag,
        {name: BINARY for name in ("V1", "V2", "V3", "V4")},
        {
            "V1": [0.5, 0.5],
            "V2": noisy_copy,
            "V3": noisy_copy,
            "V4": _hand_cpt([[0.1, 0.9], [0.9, 0.1]]),
        },
    )


# ---------------------------------------------------------------------------
# Evaluation


@dataclass(frozen=True)
class ScenarioEvaluation:
    reports: list[CriterionReport]
    figure_data: pd.DataFrame | None = None


def _empirical_battery(
    data: pd.DataFrame,
    predictor: str,
    alpha: float | None,
    bins: int | None,
    signal: str | None = None,
) -> list[CriterionReport]:
    """Independence, Separation, Sufficiency, then Parity by Signal."""
    reports = [
        test_independence(data, predictor, "A", alpha),
        test_cond_independence(
            data, predictor, "A", ["Y"], alpha, bins,
            criterion=Criterion.SEPARATION,
        ),
        test_cond_independence(
            data, "Y", "A", [predictor], alpha, bins,
            criterion=Criterion.SUFFICIENCY, subject=predictor,
        ),
    ]
    if signal is not None:
        reports.append(test_cond_independence(
            data, predictor, "A", [signal], alpha, bins,
            criterion=Criterion.PARITY_BY_SIGNAL,
        ))
    return reports


def figure_data(
    params: Scenario1Params, seed: int, n: int = FIGURE_POINTS
) -> pd.DataFrame:
    """Sampled points, regression lines and separation-enforcing lines.

    Columns: x2, y, group, line_id, band_lo, band_hi. Points have
    line_id "points"; lines are evaluated on a grid over the points'
    X2 range; bands (prediction +/- 2 sd) are set only where the
    separation-enforcing predictor adds noise.
    """
    model = _build_scenario1(params)
    points = sample(model, n, seed)
    rows = [pd.DataFrame({
        "x2": points["X2"].to_numpy(),
        "y": points["Y"].to_numpy(),
        "group": points["A"].astype(str).to_numpy(),
        "line_id": "points",
        "band_lo": np.nan,
        "band_hi": np.nan,
    })]
    grid = np.linspace(points["X2"].min(), points["X2"].max(), FIGURE_GRID)
    dag = model.dag
    a, x2, y = (dag.node_id(v) for v in ("A", "X2", "Y"))

    lines = []
    for group in params.groups:
        joint = joint_gaussian(model, {a: group})
        lines.append([
            conditional_gaussian(joint, [y], {x2: float(x)}).mean_of(y)
            for x in grid
        ])
    lines = np.asarray(lines)
    if np.allclose(lines, lines[0]):
        regressions = [("", lines[0], "true_regression")]
    else:
        regressions = [
            (g, lines[i], f"true_regression_{g}")
            for i, g in enumerate(params.groups)
        ]
    for group, values, line_id in regressions:
        rows.append(pd.DataFrame({
            "x2": grid, "y": values, "group": group, "line_id": line_id,
            "band_lo": np.nan, "band_hi": np.nan,
        }))

    if not params.biased_credit:
        rho = params.rho
        z_sd = np.sqrt(np.clip(params.z_variances(), 0.0, None))
        for i, group in enumerate(params.groups):
            shifted = grid - (1.0 - rho[i]) * params.mu[i]
            values = params.beta * shifted / rho[i]
            band = 2.0 * z_sd[i] if z_sd[i] > 0 else np.nan
            rows.append(pd.DataFrame({
                "x2": grid, "y": values, "group": group,
                "line_id": f"separation_{group}",
                "band_lo": values - band, "band_hi": values + band,
            }))
    return pd.concat(rows, ignore_index=True)


def write_figure_csv(frame: pd.DataFrame, path: str | Path) -> None:
    """Write figure data; missing bands become empty fields."""
    frame.to_csv(path, index=False, na_rep="", float_format="%.10g")


def _evaluate_scenario1(
    params: Scenario1Params,
    n: int,
    seed: int,
    alpha: float | None,
    bins: int | None,
    emit_figure: bool,
) -> ScenarioEvaluation:
    model = _build_scenario1(params)
    predictors = {**scenario1_predictors(params),
                  **single_feature_predictors()}
    data = sample(model, n, seed, predictors)
    data["theta"] = signal_column(data, params)

    reports = []
    for name in predictors:
        logger.info("Auditing predictor", extra={"predictor": name})
        reports.extend(
            _empirical_battery(data, name, alpha, bins, signal="theta")
        )
    figure = figure_data(params, seed + 1) if emit_figure else None
    return ScenarioEvaluation(reports, figure)


def _evaluate_discrete(
    scenario_id: str,
    params: DiscreteScenarioParams,
    n: int,
    seed: int,
    alpha: float | None,
    bins: int | None,
) -> ScenarioEvaluation:
    base = _build_discrete(ScenarioId(scenario_id), params)
    model, specs = discrete_predictors(scenario_id, base)
    data = sample_discrete(model, n, seed)
    dag = model.dag
    a, y = dag.node_id("A"), dag.node_id("Y")

    reports = []
    for name in specs:
        r = dag.node_id(name)
        reports.extend(_empirical_battery(data, name, alpha, bins))
        reports.extend(exact_criteria(model, a, r, y))
        match scenario_id:
            case "3":
                reports.append(
                    cde_equal(model, r, a, [dag.node_id("X2")])
                )
                reports.append(te_equal(model, r, a))
            case "4":
                reports.append(te_equal(model, r, a))
    return ScenarioEvaluation(reports)


def evaluate_scenario(
    scenario_id: str,
    params: Scenario1Params | DiscreteScenarioParams | None = None,
    n: int = 100_000,
    seed: int = 0,
    alpha: float | None = None,
    bins: int | None = None,
    emit_figure: bool = False,
) -> ScenarioEvaluation:
    """Sample a scenario, add its predictors and audit each of them.

    Scenario 1 runs Independence, Separation, Sufficiency and Parity by
    Signal on every predictor. Discrete scenarios run the empirical
    battery plus the exact criteria, and for scenarios 3 and 4 the
    causal criteria.

    Args:
        scenario_id: "1", "2", "2b", "3" or "4"
        params: Scenario parameters (defaults when None)
        n: Samples (>= 1000)
        seed: Sampling seed
        alpha: Significance level (default from settings)
        bins: Bins per real conditioner (default from settings)
        emit_figure: Scenario 1 only; also return figure data sampled
            with seed + 1

    Returns:
        ScenarioEvaluation with reports in predictor order
    """
    if n < MIN_SAMPLES:
        raise ValueError(f"n must be at least {MIN_SAMPLES}, got {n}")
    if params is None:
        params = parse_params(scenario_id)
    build_scenario(scenario_id, params)
    logger.info("Evaluating scenario",
                extra={"scenario": scenario_id, "n": n, "seed": seed})

    if isinstance(params, Scenario1Params):
        return _evaluate_scenario1(params, n, seed, alpha, bins,
                                   emit_figure)
    return _evaluate_discrete(scenario_id, params, n, seed, alpha, bins)
