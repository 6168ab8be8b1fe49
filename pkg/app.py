import logging
from typing import Callable, Optional, Tuple

import click
from flask import Flask, jsonify, request

from api import sim_bridge
from core.assumption import check_assumption1
from core.config import DEFAULT_SEED, INVARIANT_SIZES, Study, StudyKind, load_config
from core.convergence import evaluate_acceptance, run_convergence, simulate
from core.grammar import parse
from core.invariants import Verdict, run_invariant_suite
from core.persistence import emit_csv, export_trajectory_csv, render_report

app = Flask(__name__)

logger = logging.getLogger(__name__)


def _respond(response):
    status = 200 if response.get("ok", False) else int(response.get("http_status", 400))
    return jsonify(response), status


# ---------------------------------------------------------------------------
# JSON routes


@app.post("/api/parse")
def api_parse():
    """Parse a polynomial and return its canonical form."""

    payload = request.get_json(silent=True) or {}
    return _respond(sim_bridge.parse_polynomial(payload.get("text")))


@app.post("/api/trajectory")
def api_trajectory():
    """Integrate the classical flow for a study configuration."""

    payload = request.get_json(silent=True) or {}
    return _respond(sim_bridge.trajectory(payload))


@app.post("/api/converge")
def api_converge():
    """Run an ℏ-convergence sweep; ``study`` may override the configured study kind."""

    payload = request.get_json(silent=True) or {}
    study = request.args.get("study") or payload.get("study")
    response = sim_bridge.converge(payload, study)
    logger.info("Converge request: study=%s ok=%s duration_ms=%.2f", study, response["ok"], response["duration_ms"])
    return _respond(response)


@app.post("/api/assumptions")
def api_assumptions():
    payload = request.get_json(silent=True) or {}
    return _respond(sim_bridge.assumptions(payload))


@app.get("/api/invariants")
def api_invariants():
    sizes = request.args.get("sizes")
    fault = request.args.get("fault", "").strip().lower() in {"1", "true", "yes"}
    response = sim_bridge.invariants(
        request.args.get("seed"),
        None if not sizes else [entry for entry in sizes.split(",") if entry.strip()],
        fault,
    )
    return _respond(response)


# ---------------------------------------------------------------------------
# Command line: flask --app app <command>


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def _parse_sizes(value: Optional[str]) -> Tuple[int, ...]:
    if not value:
        return INVARIANT_SIZES
    try:
        sizes = tuple(int(entry) for entry in value.replace(" ", ",").split(",") if entry)
    except ValueError as exc:
        raise click.BadParameter("sizes must be integers, e.g. 24,40,60") from exc
    if not sizes or any(m < 1 for m in sizes):
        raise click.BadParameter("sizes must be positive integers")
    return sizes


def _run_guarded(action: Callable[[], int]) -> None:
    """Run ``action`` and exit with its code, mapping backend errors to exit codes."""

    ctx = click.get_current_context()
    try:
        code = action()
    except Exception as exc:
        error = sim_bridge.classify_error(exc)
        if error is None:
            raise
        click.echo(f"error ({error.code}): {exc}", err=True)
        ctx.exit(error.exit_code)
    ctx.exit(code)


def _output(report, out: Optional[str]) -> None:
    if out:
        emit_csv(report, out)
    else:
        click.echo(render_report(report), nl=False)


@app.cli.command("check-invariants")
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@click.option("--sizes", default=None, help="Comma separated cutoffs, e.g. 24,40,60.")
@click.option("--fault-injection", is_flag=True, help="Perturb the ladder matrices by 1e-3.")
@click.option("--out", default=None, help="Write the ledger CSV here instead of stdout.")
@click.option("--verbose", is_flag=True)
def check_invariants_command(seed: int, sizes: Optional[str], fault_injection: bool, out: Optional[str], verbose: bool) -> None:
    """Run the invariant suite and print the ledger."""

    _configure_logging(verbose)
    size_values = _parse_sizes(sizes)

    def action() -> int:
        ledger = run_invariant_suite(seed, size_values, fault_injection)
        _output(ledger, out)
        for result in ledger.results:
            if result.verdict is Verdict.FAIL:
                click.echo(f"FAIL {result.name}: {result.max_residual:.3e} > {result.bound:.3e} {result.detail}", err=True)
        return sim_bridge.EXIT_OK if ledger.passed else sim_bridge.EXIT_FAILURE

    _run_guarded(action)


@app.cli.command("simulate")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--out", default=None, help="Trajectory CSV path.")
@click.option("--report", "report_path", default=None, help="Tracking report CSV path.")
@click.option("--verbose", is_flag=True)
def simulate_command(config_path: str, out: Optional[str], report_path: Optional[str], verbose: bool) -> None:
    """Integrate the classical flow and measure ⟨A_ℏ(t)⟩ against α(t)."""

    _configure_logging(verbose)

    def action() -> int:
        cfg = load_config(config_path)
        result = simulate(cfg)
        if out:
            export_trajectory_csv(result.trajectory, out)
        _output(result.report, report_path)
        return sim_bridge.EXIT_OK

    _run_guarded(action)


@app.cli.command("converge")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--study", "study_name", type=click.Choice([kind.value for kind in StudyKind]), default=None)
@click.option("--out", default=None, help="Report CSV path; stdout when omitted.")
@click.option("--verbose", is_flag=True)
def converge_command(config_path: str, study_name: Optional[str], out: Optional[str], verbose: bool) -> None:
    """Run an ℏ sweep, fit the rates and check them against the study threshold."""

    _configure_logging(verbose)

    def action() -> int:
        cfg = load_config(config_path)
        study = None
        if study_name is not None:
            base = cfg.study
            study = Study(StudyKind(study_name), base.observable, base.center, base.rescale, base.min_slope)
        report = run_convergence(cfg, study)
        _output(report, out)
        acceptance = evaluate_acceptance(report)
        for failure in acceptance.failures:
            click.echo(f"FAIL {failure}", err=True)
        return sim_bridge.EXIT_OK if acceptance.passed else sim_bridge.EXIT_FAILURE

    _run_guarded(action)


@app.cli.command("assumptions")
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--out", default=None, help="Report CSV path; stdout when omitted.")
@click.option("--verbose", is_flag=True)
def assumptions_command(config_path: str, out: Optional[str], verbose: bool) -> None:
    """Screen the lower bound and number-operator domination of H_ℏ."""

    _configure_logging(verbose)

    def action() -> int:
        cfg = load_config(config_path)
        report = check_assumption1(parse(cfg.hamiltonian), cfg.hbars, cfg.assumption_cutoffs)
        _output(report, out)
        click.echo(f"verdict {report.verdict.value} ({report.caveat})", err=True)
        return sim_bridge.EXIT_OK if report.passed else sim_bridge.EXIT_FAILURE

    _run_guarded(action)


if __name__ == "__main__":
    app.run(debug=True)
