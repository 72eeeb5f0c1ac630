"""Fairness criteria: exact decisions, empirical tests, impossibility search.

Every criterion produces a ``CriterionReport``. Exact reports come from a
``DiscreteModel``'s joint table and compare the largest cell gap against a
tolerance; empirical reports come from a sampled ``pd.DataFrame`` and
compare a p-value against a significance level.

Empirical conditional tests stratify on the conditioning columns
(categorical levels, or equal-frequency bins for real columns). Within a
stratum a categorical prediction gets a G-test against the sensitive
attribute and the G statistics are summed over strata; a real prediction
gets a Kruskal-Wallis test across groups (after removing any linear trend
in real conditioners) and the stratum p-values are pooled with Fisher's
method.
"""

import itertools
import logging
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
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

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import stats

from dag_core import NodeId
from discrete_model import DiscreteModel, independence_gap, joint_distribution
from errors import EmptyGroupError, InsufficientStrataError
from settings import load_settings

logger = logging.getLogger(__name__)

# Constant-residual cutoff below which a stratum carries no evidence
FLAT_TOLERANCE = 1e-12
P_FLOOR = 1e-300


class Criterion(StrEnum):
    DEMOGRAPHIC_PARITY = "DemographicParity"
    INDEPENDENCE = "Independence"
    EQUALIZED_ODDS = "EqualizedOdds"
    SEPARATION = "Separation"
    CALIBRATION = "Calibration"
    CALIBRATION_BY_GROUP = "CalibrationByGroup"
    PREDICTIVE_PARITY = "PredictiveParity"
    SUFFICIENCY = "Sufficiency"
    PARITY_BY_SIGNAL = "ParityBySignal"
    PARITY_BY_S = "ParityByS"
    CONDITIONAL_INDEPENDENCE = "ConditionalIndependence"
    CDE_EQUAL = "CDEEqual"
    TE_EQUAL = "TEEqual"


class Method(StrEnum):
    EXACT = "exact"
    EMPIRICAL = "empirical"


class Verdict(StrEnum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    UNDECIDABLE = "undecidable"


class CriterionReport(BaseModel):
    """Outcome of evaluating one fairness criterion.

    Attributes:
        criterion: Which criterion was evaluated
        method: exact (tolerance on gaps) or empirical (p-value)
        gaps: Named statistics, e.g. max_cell_gap or tpr_gap
        threshold: Tolerance (exact) or significance level (empirical)
        p_value: Test p-value for empirical reports (a 0/1 flag for
            Calibration by Group, see audit_binary)
        verdict: satisfied, violated or undecidable
        subject: What was audited, e.g. a predictor name
        detail: Why a report is undecidable, when it is
    """

    model_config = ConfigDict(frozen=True)

    criterion: Criterion
    method: Method
    gaps: dict[str, float]
    threshold: float
    p_value: float | None = None
    verdict: Verdict
    subject: str | None = None
    detail: str | None = None

    @model_validator(mode="after")
    def _satisfied_is_consistent(self) -> "CriterionReport":
        if self.verdict != Verdict.SATISFIED:
            return self
        if self.method == Method.EXACT:
            if any(gap > self.threshold for gap in self.gaps.values()):
                raise ValueError("Exact verdict exceeds its tolerance")
        elif self.p_value is None or self.p_value < self.threshold:
            raise ValueError("Empirical verdict contradicts its p-value")
        return self

    def to_json_dict(self) -> dict[str, object]:
        """Report in the fixed JSON layout, plus subject/detail if set."""
        payload: dict[str, object] = {
            "criterion": self.criterion.value,
            "method": self.method.value,
            "gaps": dict(self.gaps),
            "p_value": self.p_value,
            "threshold": self.threshold,
            "verdict": self.verdict.value,
        }
        if self.subject is not None:
            payload["subject"] = self.subject
        if self.detail is not None:
            payload["detail"] = self.detail
        return payload


def _empirical(
    criterion: Criterion,
    gaps: dict[str, float],
    p_value: float,
    alpha: float,
    subject: str | None,
) -> CriterionReport:
    return CriterionReport(
        criterion=criterion,
        method=Method.EMPIRICAL,
        gaps=gaps,
        threshold=alpha,
        p_value=p_value,
        verdict=Verdict.SATISFIED if p_value >= alpha else Verdict.VIOLATED,
        subject=subject,
    )


def exact_report(
    criterion: Criterion,
    gap: float,
    tol: float,
    subject: str | None,
) -> CriterionReport:
    return CriterionReport(
        criterion=criterion,
        method=Method.EXACT,
        gaps={"max_cell_gap": gap},
        threshold=tol,
        verdict=Verdict.SATISFIED if gap <= tol else Verdict.VIOLATED,
        subject=subject,
    )


def undecidable(
    criterion: Criterion,
    method: Method,
    threshold: float,
    detail: str,
    subject: str | None = None,
) -> CriterionReport:
    """Report for a criterion that could not be evaluated."""
    logger.warning(
        "Criterion undecidable",
        extra={"criterion": criterion.value, "detail": detail},
    )
    return CriterionReport(
        criterion=criterion,
        method=method,
        gaps={},
        threshold=threshold,
        verdict=Verdict.UNDECIDABLE,
        subject=subject,
        detail=detail,
    )


def _guard(
    criterion: Criterion,
    alpha: float,
    subject: str | None,
    evaluate: Callable[[], CriterionReport],
) -> CriterionReport:
    # empty groups/strata make a criterion undecidable, not the audit
    try:
        return evaluate()
    except (EmptyGroupError, InsufficientStrataError) as error:
        return undecidable(
            criterion, Method.EMPIRICAL, alpha, str(error), subject
        )


# ---------------------------------------------------------------------------
# Column helpers


def _require_columns(data: pd.DataFrame, columns: Iterable[str]) -> None:
    missing = [col for col in columns if col not in data.columns]
    if missing:
        raise ValueError(
            f"Missing required columns: {', '.join(missing)}"
        )


def _is_categorical(series: pd.Series) -> bool:
    return isinstance(series.dtype, pd.CategoricalDtype) or (
        series.dtype == object or pd.api.types.is_bool_dtype(series)
    )


def _group_codes(series: pd.Series) -> tuple[np.ndarray, list[str]]:
    """Integer codes and labels of a sensitive-attribute column."""
    if isinstance(series.dtype, pd.CategoricalDtype):
        labels = [str(c) for c in series.cat.categories]
        codes = series.cat.codes.to_numpy()
    else:
        values = series.astype(str)
        labels = sorted(values.unique())
        codes = values.map({lbl: i for i, lbl in enumerate(labels)})
        codes = codes.to_numpy()
    if len(labels) < 2:
        raise ValueError(
            f"Column '{series.name}' needs at least 2 groups, "
            f"found {labels}"
        )
    return codes.astype(int), labels


def _binary(series: pd.Series) -> np.ndarray:
    """Coerce a column to 0/1 integers or raise ValueError."""
    mapping = {
        "0": 0, "1": 1, "0.0": 0, "1.0": 1, "false": 0, "true": 1,
    }
    coded = series.astype(str).str.strip().str.lower().map(mapping)
    if coded.isna().any():
        bad = sorted(series[coded.isna()].astype(str).unique())[:5]
        raise ValueError(
            f"Column '{series.name}' must be binary (0/1), found {bad}"
        )
    return coded.to_numpy(dtype=int)


# ---------------------------------------------------------------------------
# Binary audit


def _rate_cells(
    outcome: np.ndarray,
    groups: np.ndarray,
    n_groups: int,
    strata: np.ndarray,
    stratum_name: str,
    levels: tuple[int, ...] = (0, 1),
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Positives and totals per group, for each present stratum."""
    cells = {}
    for stratum in levels:
        in_stratum = strata == stratum
        if not in_stratum.any():
            logger.warning("Stratum absent from the data",
                           extra={"stratum": f"{stratum_name}={stratum}"})
            continue
        totals = np.bincount(groups[in_stratum], minlength=n_groups)
        positives = np.bincount(
            groups[in_stratum], weights=outcome[in_stratum],
            minlength=n_groups,
        )
        if (totals == 0).any():
            empty = int(np.flatnonzero(totals == 0)[0])
            raise EmptyGroupError(
                f"No samples for group {empty} with {stratum_name}={stratum}"
            )
        cells[stratum] = (positives, totals)
    if not cells:
        raise EmptyGroupError(f"No samples in any {stratum_name} stratum")
    return cells


def _proportion_statistic(
    positives: np.ndarray, totals: np.ndarray
) -> tuple[float, int]:
    """Pearson chi-square for equal proportions across groups.

    With two groups this is the squared two-proportion z statistic.
    """
    pooled = positives.sum() / totals.sum()
    if pooled <= 0.0 or pooled >= 1.0:
        return 0.0, 0
    expected = totals * pooled
    statistic = ((positives - expected) ** 2
                 / (expected * (1.0 - pooled))).sum()
    return float(statistic), len(totals) - 1


def _pooled_p_value(parts: Iterable[tuple[float, int]]) -> float:
    statistic, dof = 0.0, 0
    for part_stat, part_dof in parts:
        statistic += part_stat
        dof += part_dof
    if dof == 0:
        return 1.0
    return float(stats.chi2.sf(statistic, dof))


def _spread(values: np.ndarray) -> float:
    return float(values.max() - values.min())


def audit_binary(
    data: pd.DataFrame,
    a_col: str,
    r_col: str,
    y_col: str,
    alpha: float | None = None,
) -> list[CriterionReport]:
    """Plug-in audit of a binary classifier against a binary response.

    Emits Demographic Parity, Equalized Odds, Predictive Parity and
    Calibration by Group (with R playing the score P). Gaps are plug-in
    frequency differences; p-values come from two-proportion
    (chi-square) tests pooled over strata. A criterion whose (group,
    stratum) cell is empty is reported undecidable.

    Calibration by Group has no sampling test: a binary score is
    calibrated only when R == Y on every row. Its p_value is therefore a
    flag, 1.0 when every calibration_error gap is zero and 0.0 otherwise,
    and the gaps carry the magnitude.

    Args:
        data: Samples with the three columns
        a_col: Sensitive attribute (>= 2 levels)
        r_col: Binary prediction
        y_col: Binary response
        alpha: Significance level (default from settings)

    Returns:
        Four reports in the order listed above

    Examples:
        >>> reports = audit_binary(frame, "A", "R", "Y")
        >>> [r.criterion.value for r in reports]
        ['DemographicParity', 'EqualizedOdds', 'PredictiveParity',
         'CalibrationByGroup']
    """
    alpha = alpha if alpha is not None else load_settings().alpha
    _require_columns(data, [a_col, r_col, y_col])
    groups, labels = _group_codes(data[a_col])
    r = _binary(data[r_col])
    y = _binary(data[y_col])
    k = len(labels)
    everyone = np.ones_like(r)

    def demographic_parity() -> CriterionReport:
        cells = _rate_cells(r, groups, k, everyone, "all", levels=(1,))
        positives, totals = cells[1]
        return _empirical(
            Criterion.DEMOGRAPHIC_PARITY,
            {"positive_rate_gap": _spread(positives / totals)},
            _pooled_p_value([_proportion_statistic(positives, totals)]),
            alpha, r_col,
        )

    def equalized_odds() -> CriterionReport:
        cells = _rate_cells(r, groups, k, y, y_col)
        names = {0: "fpr_gap", 1: "tpr_gap"}
        return _empirical(
            Criterion.EQUALIZED_ODDS,
            {names[s]: _spread(p / t) for s, (p, t) in cells.items()},
            _pooled_p_value(
                _proportion_statistic(p, t) for p, t in cells.values()
            ),
            alpha, r_col,
        )

    def predictive_parity() -> CriterionReport:
        cells = _rate_cells(y, groups, k, r, r_col)
        names = {0: "npv_gap", 1: "ppv_gap"}
        return _empirical(
            Criterion.PREDICTIVE_PARITY,
            {names[s]: _spread(p / t) for s, (p, t) in cells.items()},
            _pooled_p_value(
                _proportion_statistic(p, t) for p, t in cells.values()
            ),
            alpha, r_col,
        )

    def calibration_by_group() -> CriterionReport:
        cells = _rate_cells(y, groups, k, r, r_col)
        gaps = {
            f"calibration_error_r{s}": float(np.abs(p / t - s).max())
            for s, (p, t) in cells.items()
        }
        # P(Y=1 | R=r, A=a) = r with r in {0, 1} leaves no room for a
        # single contrary outcome, so the p-value is a 0/1 flag
        p_value = 1.0 if (r == y).all() else 0.0
        return _empirical(
            Criterion.CALIBRATION_BY_GROUP, gaps, p_value, alpha, r_col
        )

    return [
        _guard(Criterion.DEMOGRAPHIC_PARITY, alpha, r_col,
               demographic_parity),
        _guard(Criterion.EQUALIZED_ODDS, alpha, r_col, equalized_odds),
        _guard(Criterion.PREDICTIVE_PARITY, alpha, r_col,
               predictive_parity),
        _guard(Criterion.CALIBRATION_BY_GROUP, alpha, r_col,
               calibration_by_group),
    ]


# ---------------------------------------------------------------------------
# Empirical (conditional) independence


def _g_statistic(table: np.ndarray) -> tuple[float, int, float]:
    """G statistic, dof and largest rate gap for a groups x levels table."""
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if table.shape[0] < 2 or table.shape[1] < 2:
        return 0.0, 0, 0.0
    statistic, _, dof, _ = stats.chi2_contingency(
        table, correction=False, lambda_="log-likelihood"
    )
    rates = table / table.sum(axis=1, keepdims=True)
    gap = float((rates.max(axis=0) - rates.min(axis=0)).max())
    return float(statistic), int(dof), gap


def _location_scale(samples: list[np.ndarray]) -> tuple[float, float, float]:
    """p-value of a location-or-scale difference, mean gap, std gap."""
    means = np.array([s.mean() for s in samples])
    stds = np.array([s.std() for s in samples])
    pooled = np.concatenate(samples)
    if np.ptp(pooled) <= FLAT_TOLERANCE * (1.0 + np.abs(pooled).max()):
        return 1.0, 0.0, 0.0
    location = stats.kruskal(*samples).pvalue
    scale = stats.levene(*samples, center="median").pvalue
    # Bonferroni over the two component tests
    p_value = min(1.0, 2.0 * min(location, scale))
    return float(p_value), _spread(means), _spread(stds)


def _split_by_group(
    values: np.ndarray, groups: np.ndarray, n_groups: int, minimum: int
) -> list[np.ndarray]:
    samples = [values[groups == g] for g in range(n_groups)]
    short = [g for g, s in enumerate(samples) if len(s) < minimum]
    if short:
        raise EmptyGroupError(
            f"Groups {short} have fewer than {minimum} samples"
        )
    return samples


def test_independence(
    data: pd.DataFrame,
    r_col: str,
    a_col: str,
    alpha: float | None = None,
    criterion: Criterion = Criterion.INDEPENDENCE,
) -> CriterionReport:
    """Test the prediction against the sensitive attribute, unconditionally.

    A categorical prediction gets a G-test of independence; a real one
    gets Kruskal-Wallis (location) and Brown-Forsythe (scale) tests
    combined by Bonferroni. Mean and standard-deviation gaps between
    groups are reported as the relaxed first-two-moment variants.

    Args:
        data: Samples
        r_col: Prediction column
        a_col: Sensitive attribute column
        alpha: Significance level (default from settings)
        criterion: Label for the report (Independence or Demographic
            Parity)

    Returns:
        Empirical report; undecidable if a group is (nearly) empty
    """
    alpha = alpha if alpha is not None else load_settings().alpha
    _require_columns(data, [r_col, a_col])

    def evaluate() -> CriterionReport:
        groups, labels = _group_codes(data[a_col])
        prediction = data[r_col]
        if _is_categorical(prediction):
            table = pd.crosstab(groups, prediction.astype(str)).reindex(
                range(len(labels)), fill_value=0
            ).to_numpy()
            if (table.sum(axis=1) == 0).any():
                raise EmptyGroupError(f"A group of '{a_col}' is empty")
            statistic, dof, gap = _g_statistic(table)
            p_value = 1.0 if dof == 0 else float(stats.chi2.sf(statistic, dof))
            return _empirical(
                criterion, {"max_rate_gap": gap}, p_value, alpha, r_col
            )

        samples = _split_by_group(
            prediction.to_numpy(dtype=float), groups, len(labels), 2
        )
        p_value, mean_gap, std_gap = _location_scale(samples)
        return _empirical(
            criterion,
            {"mean_gap": mean_gap, "std_gap": std_gap},
            p_value, alpha, r_col,
        )

    return _guard(criterion, alpha, r_col, evaluate)


def _strata(
    data: pd.DataFrame, cond_cols: Sequence[str], bins: int
) -> tuple[np.ndarray, list[str]]:
    """Stratum id per row plus the names of the real conditioners."""
    keys = []
    real_cols = []
    for col in cond_cols:
        series = data[col]
        if _is_categorical(series):
            keys.append(series.astype(str).to_numpy())
        else:
            real_cols.append(col)
            binned = pd.qcut(
                series.astype(float), q=bins, labels=False,
                duplicates="drop",
            )
            keys.append(np.asarray(binned, dtype=float))
    frame = pd.DataFrame({f"k{i}": key for i, key in enumerate(keys)})
    stratum = frame.groupby(list(frame.columns), sort=True,
                            dropna=False).ngroup()
    return stratum.to_numpy(), real_cols


def _residualize(values: np.ndarray, design: np.ndarray) -> np.ndarray:
    """Remove the least-squares linear trend (with intercept)."""
    if design.shape[1] == 0:
        return values
    columns = np.column_stack([np.ones(len(values)), design])
    coef, *_ = np.linalg.lstsq(columns, values, rcond=None)
    return values - columns @ coef


def test_cond_independence(
    data: pd.DataFrame,
    r_col: str,
    a_col: str,
    cond_cols: Sequence[str],
    alpha: float | None = None,
    bins: int | None = None,
    criterion: Criterion = Criterion.CONDITIONAL_INDEPENDENCE,
    subject: str | None = None,
) -> CriterionReport:
    """Test r_col independent of a_col given cond_cols.

    One entry point for every conditional criterion: Separation
    (R vs A given Y), Sufficiency (Y vs A given R), Conditional
    Independence (R vs A given X), Parity by Signal (given theta) and
    Parity by S (given S). ``criterion`` labels the report.

    Args:
        data: Samples
        r_col: Column tested against the sensitive attribute
        a_col: Sensitive attribute column
        cond_cols: Conditioning columns (non-empty)
        alpha: Significance level (default from settings)
        bins: Equal-frequency bins per real conditioner (default from
            settings)
        criterion: Criterion named in the report
        subject: Name reported as the audited subject (default r_col)

    Returns:
        Empirical report; undecidable when no stratum holds at least
        two populated groups

    Raises:
        ValueError: If cond_cols is empty or a column is missing
    """
    settings = load_settings()
    alpha = alpha if alpha is not None else settings.alpha
    bins = bins if bins is not None else settings.bins
    subject = subject or r_col
    if not cond_cols:
        raise ValueError("cond_cols must name at least one column")
    _require_columns(data, [r_col, a_col, *cond_cols])

    def evaluate() -> CriterionReport:
        groups, labels = _group_codes(data[a_col])
        k = len(labels)
        strata, real_cols = _strata(data, cond_cols, bins)
        prediction = data[r_col]
        categorical = _is_categorical(prediction)
        r_values = (
            prediction.astype(str).to_numpy() if categorical
            else prediction.to_numpy(dtype=float)
        )
        design = data[real_cols].to_numpy(dtype=float)

        g_parts: list[tuple[float, int]] = []
        p_values: list[float] = []
        gaps = {"max_rate_gap": 0.0} if categorical else {
            "mean_gap": 0.0, "std_gap": 0.0,
        }
        used = skipped = 0
        for stratum in np.unique(strata):
            rows = strata == stratum
            present = np.bincount(groups[rows], minlength=k)
            minimum = 1 if categorical else 2
            if (present >= minimum).sum() < 2:
                skipped += 1
                continue
            used += 1
            keep = rows & (present[groups] >= minimum)

            if categorical:
                table = pd.crosstab(groups[keep], r_values[keep]).to_numpy()
                statistic, dof, gap = _g_statistic(table)
                g_parts.append((statistic, dof))
                gaps["max_rate_gap"] = max(gaps["max_rate_gap"], gap)
                continue

            residual = _residualize(r_values[keep], design[keep])
            present_groups = np.unique(groups[keep])
            remap = np.searchsorted(present_groups, groups[keep])
            samples = _split_by_group(
                residual, remap, len(present_groups), 2
            )
            p_value, mean_gap, std_gap = _location_scale(samples)
            p_values.append(max(p_value, P_FLOOR))
            gaps["mean_gap"] = max(gaps["mean_gap"], mean_gap)
            gaps["std_gap"] = max(gaps["std_gap"], std_gap)

        if skipped:
            logger.warning(
                "Skipped strata without two populated groups",
                extra={"criterion": criterion.value, "skipped": skipped},
            )
        if used == 0:
            raise InsufficientStrataError(
                f"No stratum of {list(cond_cols)} holds two populated "
                f"groups of '{a_col}'"
            )

        if categorical:
            p_value = _pooled_p_value(g_parts)
        elif all(p >= 1.0 for p in p_values):
            p_value = 1.0
        else:
            p_value = float(
                stats.combine_pvalues(p_values, method="fisher").pvalue
            )
        logger.debug(
            "Conditional test",
            extra={"criterion": criterion.value, "strata": used,
                   "p_value": p_value},
        )
        return _empirical(criterion, gaps, p_value, alpha, subject)

    return _guard(criterion, alpha, subject, evaluate)


# ---------------------------------------------------------------------------
# Exact criteria


def exact_criteria(
    model: DiscreteModel,
    a: NodeId,
    r: NodeId,
    y: NodeId,
    s: NodeId | None = None,
    tol: float | None = None,
    size_cap: int | None = None,
) -> list[CriterionReport]:
    """Exact Independence, Separation, Sufficiency (and Parity by S).

    Args:
        model: Discrete model containing every named node
        a: Sensitive attribute
        r: Prediction
        y: Response
        s: Reference prediction for Parity by S (optional)
        tol: Cell-wise tolerance (default from settings)
        size_cap: Joint cell cap (default from settings)

    Returns:
        Exact reports in the order listed above

    Raises:
        SizeCapError: If the joint table exceeds the cell cap
    """
    tol = tol if tol is not None else load_settings().exact_tol
    model.dag.check(a, r, y, *(() if s is None else (s,)))
    joint = joint_distribution(model, size_cap)
    subject = model.dag.name(r)

    reports = [
        exact_report(Criterion.INDEPENDENCE,
                     independence_gap(joint, r, a), tol, subject),
        exact_report(Criterion.SEPARATION,
                     independence_gap(joint, r, a, [y]), tol, subject),
        exact_report(Criterion.SUFFICIENCY,
                     independence_gap(joint, y, a, [r]), tol, subject),
    ]
    if s is not None:
        reports.append(
            exact_report(Criterion.PARITY_BY_S,
                         independence_gap(joint, r, a, [s]), tol, subject)
        )
    return reports


# ---------------------------------------------------------------------------
# Incompatibility of Separation and Sufficiency

CARDINALITIES = list(itertools.product((2, 3), repeat=3))
FAMILIES = ("dirichlet", "separated", "sufficient")


@dataclass(frozen=True)
class TableCheck:
    """Criteria gaps of one joint table over (A, R, Y)."""

    separation_gap: float
    sufficiency_gap: float
    dependence_gap: float
    min_cell: float
    q_min: float

    def bound(self, tol: float) -> float:
        """Largest A-Y dependence gap allowed when both criteria hold."""
        return 4.0 * tol / self.q_min if self.q_min > 0 else float("inf")


def _batch_gaps(tables: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorized gaps for tables of shape (batch, |A|, |R|, |Y|)."""
    p_y = tables.sum(axis=(1, 2))
    p_r = tables.sum(axis=(1, 3))
    p_a = tables.sum(axis=(2, 3))
    p_ay = tables.sum(axis=2)
    p_ar = tables.sum(axis=3)
    p_ry = tables.sum(axis=1)

    with np.errstate(divide="ignore", invalid="ignore"):
        y_b = p_y[:, None, None, :]
        sep = np.abs(tables / y_b
                     - p_ay[:, :, None, :] * p_ry[:, None, :, :] / y_b**2)
        r_b = p_r[:, None, :, None]
        suf = np.abs(tables / r_b
                     - p_ar[:, :, :, None] * p_ry[:, None, :, :] / r_b**2)
        r_given_y = p_ry / p_y[:, None, :]
        y_given_r = p_ry / p_r[:, :, None]

    dependence = np.abs(p_ay - p_a[:, :, None] * p_y[:, None, :])
    axes = tuple(range(1, tables.ndim))
    return {
        "separation": np.nan_to_num(sep, nan=0.0).max(axis=axes),
        "sufficiency": np.nan_to_num(suf, nan=0.0).max(axis=axes),
        "dependence": dependence.max(axis=(1, 2)),
        "min_cell": tables.min(axis=axes),
        "q_min": np.minimum(
            np.nan_to_num(r_given_y, nan=0.0).min(axis=(1, 2)),
            np.nan_to_num(y_given_r, nan=0.0).min(axis=(1, 2)),
        ),
    }


def check_table(table: np.ndarray) -> TableCheck:
    """Separation, Sufficiency and A-Y dependence gaps of one table.

    Args:
        table: Probabilities indexed [a, r, y]

    Examples:
        >>> check_table(np.full((2, 2, 2), 1 / 8)).dependence_gap
        0.0
    """
    gaps = _batch_gaps(np.asarray(table, dtype=float)[None])
    return TableCheck(
        separation_gap=float(gaps["separation"][0]),
        sufficiency_gap=float(gaps["sufficiency"][0]),
        dependence_gap=float(gaps["dependence"][0]),
        min_cell=float(gaps["min_cell"][0]),
        q_min=float(gaps["q_min"][0]),
    )


def _draw_tables(
    rng: np.random.Generator,
    family: str,
    shape: tuple[int, int, int],
    size: int,
) -> np.ndarray:
    """Draw ``size`` joint tables of one family, shape (size, A, R, Y)."""
    n_a, n_r, n_y = shape
    match family:
        case "dirichlet":
            flat = rng.dirichlet(np.ones(n_a * n_r * n_y), size=size)
            return flat.reshape(size, n_a, n_r, n_y)
        case "separated":
            # P(a) P(y | a) P(r | y)
            p_a = rng.dirichlet(np.ones(n_a), size=size)
            y_a = rng.dirichlet(np.ones(n_y), size=(size, n_a))
            r_y = rng.dirichlet(np.ones(n_r), size=(size, n_y))
            return np.einsum("ba,bay,byr->bary", p_a, y_a, r_y)
        case "sufficient":
            # P(a) P(r | a) P(y | r)
            p_a = rng.dirichlet(np.ones(n_a), size=size)
            r_a = rng.dirichlet(np.ones(n_r), size=(size, n_a))
            y_r = rng.dirichlet(np.ones(n_y), size=(size, n_r))
            return np.einsum("ba,bar,bry->bary", p_a, r_a, y_r)
        case _:
            raise ValueError(f"Unknown table family: '{family}'")


@dataclass(frozen=True)
class IncompatibilityResult:
    """Outcome of ``incompatibility_search``.

    Attributes:
        counterexample: First table (indexed [a, r, y]) satisfying both
            criteria while A and Y stay dependent, or None
        counterexample_trial: Trial index of that table
        trials: Tables drawn
        degenerate: Tables rejected by the positivity floor
        both_hold: Positive tables satisfying both criteria at tol
        max_dependence_gap: Largest A-Y gap among those tables
        max_bound_ratio: Largest gap / derived bound among those tables
            (never above 1 when the bound holds)
    """

    counterexample: np.ndarray | None
    counterexample_trial: int | None
    trials: int
    degenerate: int
    both_hold: int
    max_dependence_gap: float
    max_bound_ratio: float

    def to_json_dict(self) -> dict[str, object]:
        return {
            "counterexample": (
                None if self.counterexample is None
                else self.counterexample.tolist()
            ),
            "counterexample_trial": self.counterexample_trial,
            "trials": self.trials,
            "degenerate": self.degenerate,
            "both_hold": self.both_hold,
            "max_dependence_gap": self.max_dependence_gap,
            "max_bound_ratio": self.max_bound_ratio,
        }


def incompatibility_search(
    trials: int,
    tol: float = 1e-6,
    seed: int = 0,
    dependence_threshold: float = 1e-3,
    structured: bool = False,
    batch_size: int = 10_000,
    workers: int = 1,
) -> IncompatibilityResult:
    """Search random (A, R, Y) tables for Separation + Sufficiency + A~Y.

    Tables are drawn in batches; batch b uses cardinalities
    ``CARDINALITIES[b % 8]`` (each of |A|, |R|, |Y| in {2, 3}), or with
    ``structured`` cycles through the table families first, and draws
    from its own generator seeded with (seed, b), so results do not depend on
    ``workers``. Tables with a cell below 10 * tol are rejected as
    degenerate. When both criteria hold within tol, the A-Y dependence
    gap is also checked against the bound 4 * tol / q_min, where q_min
    is the smallest P(r | y) or P(y | r).

    Args:
        trials: Number of tables (>= 1)
        tol: Cell-wise tolerance for both criteria
        seed: Base seed
        dependence_threshold: A-Y gap that makes a counterexample
        structured: Also draw tables that satisfy Separation or
            Sufficiency by construction
        batch_size: Tables per batch
        workers: Threads evaluating batches

    Returns:
        IncompatibilityResult; counterexample is None when none is found
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    threshold = dependence_threshold
    n_batches = -(-trials // batch_size)

    def run_batch(b: int) -> dict[str, object]:
        size = min(batch_size, trials - b * batch_size)
        if structured:
            family = FAMILIES[b % len(FAMILIES)]
            shape = CARDINALITIES[(b // len(FAMILIES)) % len(CARDINALITIES)]
        else:
            family = "dirichlet"
            shape = CARDINALITIES[b % len(CARDINALITIES)]
        rng = np.random.default_rng([seed, b])
        tables = _draw_tables(rng, family, shape, size)
        gaps = _batch_gaps(tables)

        positive = gaps["min_cell"] >= 10.0 * tol
        both = (positive & (gaps["separation"] <= tol)
                & (gaps["sufficiency"] <= tol))
        counter = both & (gaps["dependence"] > threshold)
        with np.errstate(divide="ignore"):
            bound = 4.0 * tol / gaps["q_min"]
        first = int(np.argmax(counter)) if counter.any() else None
        return {
            "degenerate": int((~positive).sum()),
            "both": int(both.sum()),
            "max_gap": float(gaps["dependence"][both].max())
            if both.any() else 0.0,
            "max_ratio": float((gaps["dependence"][both]
                                / bound[both]).max())
            if both.any() else 0.0,
            "first": None if first is None else (
                b * batch_size + first, tables[first]
            ),
        }

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_batch, range(n_batches)))
    else:
        results = [run_batch(b) for b in range(n_batches)]

    counterexample, trial = None, None
    for result in results:
        if result["first"] is not None:
            trial, counterexample = result["first"]
            break
    logger.info(
        "Incompatibility search finished",
        extra={"trials": trials, "batches": n_batches,
               "counterexample": trial},
    )
    return IncompatibilityResult(
        counterexample=counterexample,
        counterexample_trial=trial,
        trials=trials,
        degenerate=sum(r["degenerate"] for r in results),
        both_hold=sum(r["both"] for r in results),
        max_dependence_gap=max(r["max_gap"] for r in results),
        max_bound_ratio=max(r["max_ratio"] for r in results),
    )
