"""Command-line entry point: ``python fairdag_cli.py <subcommand> ...``.

Results go to standard output (JSON, except dsep's bare boolean and the
literal "none"/"unidentifiable" answers); logs and errors go to standard
error. Exit codes: 0 success, 1 invalid input, 2 when every outcome is
undecidable or the query is unidentifiable.
"""

import logging
import sys
from collections.abc import Sequence

import click

from causal_surgery import (
    Intervention,
    Unidentifiable,
    do_distribution,
    gaussian_do_moments,
)
from dag_core import is_d_separated
from discrete_model import DiscreteModel
from errors import FairdagError, ModelError
from fairness_criteria import (
    CriterionReport,
    Verdict,
    audit_binary,
    exact_criteria,
    incompatibility_search,
)
from gaussian_model import GaussianLinearModel
from model_io import (
    load_dataset,
    load_graph,
    load_model,
    load_payload,
    reports_to_json,
    table_to_json,
    to_json,
)
from scenarios import evaluate_scenario, parse_params, write_figure_csv
from settings import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_UNDECIDABLE = 2


def _names(values: Sequence[str]) -> list[str]:
    """Flatten repeated and comma-separated option values."""
    return [
        name.strip()
        for value in values
        for name in value.split(",")
        if name.strip()
    ]


def _assignments(values: Sequence[str]) -> dict[str, str]:
    parsed = {}
    for item in values:
        node, sep, value = item.partition("=")
        if not sep or not node.strip():
            raise click.BadParameter(
                f"expected NODE=VALUE, got '{item}'", param_hint="--do"
            )
        parsed[node.strip()] = value.strip()
    return parsed


def _report_exit(reports: Sequence[CriterionReport]) -> int:
    # exit 2 only when nothing at all could be decided
    if reports and all(r.verdict == Verdict.UNDECIDABLE for r in reports):
        return EXIT_UNDECIDABLE
    return EXIT_OK


def _discrete(path: str) -> DiscreteModel:
    model = load_model(path)
    if not isinstance(model, DiscreteModel):
        raise ModelError(f"{path} does not describe a discrete model")
    return model


@click.group()
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                      case_sensitive=False),
    default=None,
    help="Log threshold for stderr (default: FAIRDAG_LOG_LEVEL).",
)
def cli(log_level: str | None) -> None:
    """Causal-graph fairness toolkit."""
    configure_logging(log_level)


@cli.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--x", "x_name", required=True)
@click.option("--y", "y_name", required=True)
@click.option("--given", multiple=True,
              help="Conditioning nodes, repeated or comma-separated.")
def dsep(model_path: str, x_name: str, y_name: str,
         given: tuple[str, ...]) -> int:
    """Print true when GIVEN d-separates X from Y."""
    dag = load_graph(model_path)
    s = [dag.node_id(name) for name in _names(given)]
    separated = is_d_separated(dag, dag.node_id(x_name),
                               dag.node_id(y_name), s)
    click.echo("true" if separated else "false")
    return EXIT_OK


@cli.command()
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--a", "a_col", required=True)
@click.option("--r", "r_col", required=True)
@click.option("--y", "y_col", required=True)
@click.option("--alpha", type=click.FloatRange(0.0, 1.0, min_open=True,
                                               max_open=True))
@click.option("--categorical", multiple=True,
              help="Categorical columns; all others are parsed as reals.")
def audit(data_path: str, a_col: str, r_col: str, y_col: str,
          alpha: float | None, categorical: tuple[str, ...]) -> int:
    """Audit a binary prediction against a binary response."""
    data = load_dataset(data_path, _names(categorical))
    reports = audit_binary(data, a_col, r_col, y_col, alpha)
    click.echo(reports_to_json(reports))
    return _report_exit(reports)


@cli.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--a", "a_name", required=True)
@click.option("--r", "r_name", required=True)
@click.option("--y", "y_name", required=True)
@click.option("--s", "s_name", default=None,
              help="Reference prediction for Parity by S.")
@click.option("--tol", type=click.FloatRange(min=0.0), default=None)
def exact(model_path: str, a_name: str, r_name: str, y_name: str,
          s_name: str | None, tol: float | None) -> int:
    """Decide Independence, Separation and Sufficiency exactly."""
    model = _discrete(model_path)
    dag = model.dag
    reports = exact_criteria(
        model, dag.node_id(a_name), dag.node_id(r_name),
        dag.node_id(y_name),
        None if s_name is None else dag.node_id(s_name), tol,
    )
    click.echo(reports_to_json(reports))
    return _report_exit(reports)


@cli.command()
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--do", "do_items", multiple=True,
              help="Assignment NODE=VALUE; repeat for several nodes.")
@click.option("--target", default=None)
@click.option("--payload", "payload_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help='JSON {"do": {...}, "target": node} instead of flags.')
def intervene(model_path: str, do_items: tuple[str, ...],
              target: str | None, payload_path: str | None) -> int:
    """Print P(target | do(...)) or "unidentifiable"."""
    if payload_path is not None:
        if do_items or target:
            raise click.UsageError("--payload excludes --do and --target")
        payload = load_payload(payload_path)
        assignments = {k: str(v) for k, v in payload["do"].items()}
        target = payload["target"]
    else:
        if not do_items or not target:
            raise click.UsageError("--do and --target are required")
        assignments = _assignments(do_items)

    model = load_model(model_path)
    if not isinstance(model, DiscreteModel | GaussianLinearModel):
        raise ModelError(f"{model_path} has no parameters to intervene on")
    iv = Intervention.from_names(model.dag, assignments)
    node = model.dag.node_id(target)

    if isinstance(model, DiscreteModel):
        result = do_distribution(model, node, iv)
    else:
        result = gaussian_do_moments(model, node, iv)

    if isinstance(result, Unidentifiable):
        logger.info("Unidentifiable", extra={"reason": result.reason})
        click.echo("unidentifiable")
        return EXIT_UNDECIDABLE
    if isinstance(model, DiscreteModel):
        click.echo(table_to_json(result))
    else:
        click.echo(to_json([
            {"configuration": m.configuration, "mean": m.mean,
             "variance": m.variance}
            for m in result
        ]))
    return EXIT_OK


@cli.command()
@click.option("--id", "scenario_id", required=True,
              type=click.Choice(["1", "2", "2b", "3", "4"]))
@click.option("--n", default=100_000, show_default=True,
              type=click.IntRange(min=1_000))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--alpha", type=click.FloatRange(0.0, 1.0, min_open=True,
                                               max_open=True))
@click.option("--bins", type=click.IntRange(min=1), default=None)
@click.option("--cpt-seed", type=int, default=None,
              help="Draw Dirichlet CPTs (scenarios 2-4).")
@click.option("--biased-credit", is_flag=True,
              help="Scenario 1 with a biased credit rating.")
@click.option("--emit-figure", "figure_path", default=None,
              type=click.Path(dir_okay=False, writable=True),
              help="Write scenario-1 figure data to this CSV.")
def scenario(scenario_id: str, n: int, seed: int, alpha: float | None,
             bins: int | None, cpt_seed: int | None, biased_credit: bool,
             figure_path: str | None) -> int:
    """Reproduce a worked scenario and print its reports."""
    if scenario_id == "1":
        if cpt_seed is not None:
            raise click.UsageError("--cpt-seed applies to scenarios 2-4")
        params = parse_params("1", {"biased_credit": biased_credit})
    else:
        if biased_credit or figure_path:
            raise click.UsageError(
                "--biased-credit and --emit-figure apply to scenario 1"
            )
        params = parse_params(scenario_id, {"cpt_seed": cpt_seed})

    evaluation = evaluate_scenario(
        scenario_id, params, n=n, seed=seed, alpha=alpha, bins=bins,
        emit_figure=figure_path is not None,
    )
    if figure_path is not None:
        write_figure_csv(evaluation.figure_data, figure_path)
    click.echo(reports_to_json(evaluation.reports))
    return _report_exit(evaluation.reports)


@cli.command()
@click.option("--trials", default=100_000, show_default=True,
              type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--tol", default=1e-6, show_default=True,
              type=click.FloatRange(min=0.0, min_open=True))
@click.option("--threshold", default=1e-3, show_default=True,
              type=click.FloatRange(min=0.0),
              help="A-Y dependence gap that makes a counterexample.")
@click.option("--structured", is_flag=True,
              help="Also draw tables built to satisfy one criterion.")
@click.option("--workers", default=1, show_default=True,
              type=click.IntRange(min=1))
def incompat(trials: int, seed: int, tol: float, threshold: float,
             structured: bool, workers: int) -> int:
    """Search for a table with Separation, Sufficiency and A~Y.

    Prints "none" on its own line when the search comes up empty, then
    the search summary (counts and the largest bound ratio) as JSON.
    """
    result = incompatibility_search(
        trials, tol=tol, seed=seed, dependence_threshold=threshold,
        structured=structured, workers=workers,
    )
    if result.counterexample is None:
        click.echo("none")
    click.echo(to_json(result.to_json_dict()))
    return EXIT_OK


def run(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    try:
        result = cli.main(
            args=list(argv) if argv is not None else None,
            prog_name="fairdag",
            standalone_mode=False,
        )
    except click.ClickException as error:
        error.show()
        return EXIT_INVALID
    except click.Abort:
        click.echo("Aborted", err=True)
        return EXIT_INVALID
    except (FairdagError, ValueError, KeyError, OSError) as error:
        click.echo(f"Error: {error}", err=True)
        return EXIT_INVALID
    return result if isinstance(result, int) else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
