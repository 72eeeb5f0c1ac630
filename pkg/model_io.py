"""JSON model files, CSV datasets and result serialization.

Model files share one layout:

    {"nodes": [{"name": "A", "observed": true}, ...],
     "edges": [["A", "R"], ...],
     "domains": {"A": ["0", "1"], ...},              # discrete models
     "cpts": {"R": {"0": [0.9, 0.1], "1": [...]}},   # key: parent labels
     "gaussian": {"discrete_roots": {...}, "mechanisms": {...}}}

A file with neither ``domains`` nor ``gaussian`` is a bare graph. CPT and
mechanism keys are the comma-joined labels of the node's (discrete)
parents in node declaration order, "" for none.
"""

import itertools
import json
import logging
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from dag_core import Dag, build_dag
from discrete_model import DiscreteModel, JointTable
from errors import ModelError
from fairness_criteria import CriterionReport
from gaussian_model import DiscreteRoot, GaussianLinearModel, Mechanism

logger = logging.getLogger(__name__)

AnyModel = Dag | DiscreteModel | GaussianLinearModel


class NodeSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(min_length=1)
    observed: bool = True


class RootSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    labels: list[str]
    probs: list[float]


class MechanismSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    intercept: float = 0.0
    coefficients: dict[str, float] = Field(default_factory=dict)
    noise_variance: float = 1.0


class GaussianSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    discrete_roots: dict[str, RootSchema] = Field(default_factory=dict)
    mechanisms: dict[str, dict[str, MechanismSchema]]
    nondegenerate: list[str] = Field(default_factory=list)


class ModelSchema(BaseModel):
    """Graph plus optional discrete or Gaussian parameters."""

    model_config = ConfigDict(extra="forbid")

    nodes: list[NodeSchema]
    edges: list[tuple[str, str]] = Field(default_factory=list)
    domains: dict[str, list[str]] | None = None
    cpts: dict[str, dict[str, list[float]]] | None = None
    gaussian: GaussianSchema | None = None


def _parse(payload: object) -> ModelSchema:
    try:
        schema = ModelSchema.model_validate(payload)
    except ValidationError as error:
        raise ModelError(f"Invalid model file: {error}") from error
    if schema.gaussian is not None and (schema.domains or schema.cpts):
        raise ModelError("A model is either discrete or Gaussian, not both")
    if (schema.domains is None) != (schema.cpts is None):
        raise ModelError("Discrete models need both 'domains' and 'cpts'")
    return schema


def graph_from_schema(schema: ModelSchema) -> Dag:
    return build_dag(
        [(node.name, node.observed) for node in schema.nodes],
        [tuple(edge) for edge in schema.edges],
    )


def _cpt_array(
    dag: Dag, node: int, domains: dict[str, list[str]],
    rows: dict[str, list[float]],
) -> np.ndarray:
    """Dense CPT from rows keyed by comma-joined parent labels."""
    name = dag.name(node)
    parent_domains = [domains[dag.name(p)] for p in dag.parents(node)]
    card = len(domains[name])
    table = np.zeros(tuple(map(len, parent_domains)) + (card,))
    for index in np.ndindex(*table.shape[:-1]):
        key = ",".join(
            parent_domains[i][j] for i, j in enumerate(index)
        )
        if key not in rows:
            raise ModelError(f"CPT of '{name}' has no row for '{key}'")
        if len(rows[key]) != card:
            raise ModelError(
                f"CPT row '{key}' of '{name}' needs {card} probabilities"
            )
        table[index] = rows[key]
    extra = set(rows) - {
        ",".join(labels) for labels in itertools.product(*parent_domains)
    }
    if extra:
        raise ModelError(f"CPT of '{name}' has unknown rows {sorted(extra)}")
    return table


def _discrete(schema: ModelSchema, dag: Dag) -> DiscreteModel:
    domains = schema.domains or {}
    cpts = schema.cpts or {}
    missing = [
        dag.name(v) for v in dag.nodes
        if dag.name(v) not in domains or dag.name(v) not in cpts
    ]
    if missing:
        raise ModelError(f"Missing domain or CPT for: {', '.join(missing)}")
    return DiscreteModel(
        dag,
        tuple(tuple(domains[dag.name(v)]) for v in dag.nodes),
        tuple(_cpt_array(dag, v, domains, cpts[dag.name(v)])
              for v in dag.nodes),
    )


def _gaussian(schema: GaussianSchema, dag: Dag) -> GaussianLinearModel:
    roots = {
        dag.node_id(name): DiscreteRoot(tuple(law.labels), tuple(law.probs))
        for name, law in schema.discrete_roots.items()
    }
    mechanisms = {
        dag.node_id(name): {
            key: Mechanism(
                m.intercept,
                {dag.node_id(p): c for p, c in m.coefficients.items()},
                m.noise_variance,
            )
            for key, m in table.items()
        }
        for name, table in schema.mechanisms.items()
    }
    return GaussianLinearModel(
        dag, roots, mechanisms,
        frozenset(dag.node_id(n) for n in schema.nondegenerate),
    )


def model_from_dict(payload: object) -> AnyModel:
    """Build a graph, discrete model or Gaussian model from parsed JSON.

    Raises:
        ModelError: If the payload does not follow the model layout
        CycleError, DuplicateError, UnknownNodeError: From the graph
    """
    schema = _parse(payload)
    dag = graph_from_schema(schema)
    if schema.gaussian is not None:
        return _gaussian(schema.gaussian, dag)
    if schema.domains is not None:
        return _discrete(schema, dag)
    return dag


def _read_json(path: str | Path) -> object:
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as error:
        raise ModelError(f"{path} is not valid JSON: {error}") from error


def load_model(path: str | Path) -> AnyModel:
    """Read a model file (see module docstring for the layout)."""
    model = model_from_dict(_read_json(path))
    logger.debug("Loaded model", extra={"path": str(path),
                                        "kind": type(model).__name__})
    return model


def load_graph(path: str | Path) -> Dag:
    """Read only the graph part of a model file."""
    return graph_from_schema(_parse(_read_json(path)))


def load_payload(path: str | Path) -> dict[str, object]:
    """Read an intervention payload {"do": {...}, "target": node}."""
    payload = _read_json(path)
    valid = (
        isinstance(payload, dict)
        and isinstance(payload.get("do"), dict)
        and isinstance(payload.get("target"), str)
    )
    if not valid:
        raise ModelError(
            "Payload must look like {\"do\": {node: value}, "
            "\"target\": node}"
        )
    return payload


def normalize_dataset(
    df: pd.DataFrame,
    categorical: Sequence[str] = (),
) -> pd.DataFrame:
    """Type every column: declared categoricals, everything else real.

    Args:
        df: Raw frame (all columns as read)
        categorical: Columns to keep as category labels

    Returns:
        New frame with category and float columns

    Raises:
        ValueError: If a declared column is missing or a real column has
            a non-numeric entry

    Examples:
        >>> frame = normalize_dataset(raw, categorical=["A"])
        >>> frame["A"].dtype
        CategoricalDtype(categories=['a0', 'a1'], ordered=False, ...)
    """
    missing = [col for col in categorical if col not in df.columns]
    if missing:
        raise ValueError(
            f"Missing required columns: {', '.join(missing)}"
        )

    normalized = df.copy()
    for col in normalized.columns:
        if col in categorical:
            normalized[col] = normalized[col].astype(str).str.strip()
            normalized[col] = normalized[col].astype("category")
            continue
        try:
            normalized[col] = pd.to_numeric(normalized[col]).astype(float)
        except (TypeError, ValueError):
            raise ValueError(
                f"Column '{col}' has non-numeric values; declare it "
                f"categorical"
            ) from None
    return normalized


def load_dataset(
    path: str | Path,
    categorical: Sequence[str] = (),
) -> pd.DataFrame:
    """Read a CSV with a header row into a typed frame."""
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    if raw.empty:
        raise ValueError(f"{path} has no data rows")
    return normalize_dataset(raw, categorical)


def reports_to_json(reports: Iterable[CriterionReport]) -> str:
    """Reports as a JSON array in the fixed report layout."""
    return json.dumps([r.to_json_dict() for r in reports], indent=2)


def table_to_json(table: JointTable) -> str:
    """A probability table as {"variables": [...], "rows": [...]}."""
    return json.dumps(
        {"variables": list(table.names), "rows": table.to_records()},
        indent=2,
    )


def to_json(payload: object) -> str:
    return json.dumps(payload, indent=2)
