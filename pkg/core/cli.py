"""CLI interface using Typer for modern command-line argument parsing."""

import os
from pathlib import Path
from typing import Any

import typer

from core import cli_setup as setup
from core import constants
from core.config import ExperimentConfig
from core.config_loader import ConfigLoader
from core.exceptions import ConfigurationError, OperaToolkitError, ValidationError

app = typer.Typer(
    name="opera",
    help="Online pairwise learning experiments and theory checks",
    add_completion=False,
    no_args_is_help=True,
    rich_markup_mode="rich",
)

_EXTRA_ARGS = {"allow_extra_args": True, "ignore_unknown_options": True}


def _get_cli_version() -> str:
    """Best-effort version string for CLI output.

    Prefers installed package metadata; falls back to constants.VERSION for
    editable/dev runs where metadata may be unavailable.
    """
    try:
        from importlib.metadata import version

        return version("opera-toolkit")
    except Exception:
        return getattr(constants, "VERSION", "unknown")


def _version_callback(value: bool) -> None:
    if value:
        typer.echo(f"opera {_get_cli_version()}")
        raise typer.Exit()


@app.callback()
def _main(
    version: bool = typer.Option(
        False,
        "--version",
        "-V",
        help="Show version and exit",
        callback=_version_callback,
        is_eager=True,
    ),
) -> None:
    """Global CLI options."""


def _fail(message: str, code: int) -> typer.Exit:
    typer.echo(f"Error: {message}", err=True)
    return typer.Exit(code=code)


def load_experiment(
    config_path: str,
    extra_args: list[str],
    output_dir: str | None = None,
    workers: int | None = None,
) -> ExperimentConfig:
    """Resolve file, environment and CLI values into a validated config.

    Exits with ``EXIT_INVALID_ARGUMENTS`` on any usage or config problem.
    """
    try:
        file_values = ConfigLoader.load_config(Path(config_path))
        cli_values: dict[str, Any] = ConfigLoader.parse_overrides(extra_args)
    except ValueError as e:
        raise _fail(str(e), constants.EXIT_INVALID_ARGUMENTS)
    if output_dir is not None:
        cli_values["output_dir"] = output_dir
    if workers is not None:
        cli_values["workers"] = workers
    merged = ConfigLoader.merge(file_values, ConfigLoader.load_env_overrides(), cli_values)
    merged.setdefault("workers", os.cpu_count() or 1)
    try:
        return ExperimentConfig.from_mapping(merged)
    except (ConfigurationError, ValidationError) as e:
        raise _fail(str(e), constants.EXIT_INVALID_ARGUMENTS)


def _outputs(cfg: ExperimentConfig, verbose: bool, quiet: bool) -> tuple[str, str]:
    """Prepare the output directory and logging; returns (directory, slug)."""
    outslug = setup.sanitize_outslug(cfg.output.name)
    try:
        output_dir = setup.prepare_output_dir(cfg.output.output_dir)
        setup.setup_logger(output_dir, outslug, verbose=verbose, quiet=quiet)
    except OSError as e:
        raise _fail(f"Cannot use output directory: {e}", constants.EXIT_GENERAL_ERROR)
    return output_dir, outslug


def _echo_summary(summary: dict[str, Any], quiet: bool) -> None:
    if quiet:
        return
    typer.echo(f"config digest: {summary['config_digest']}")
    for mode, medians in summary["medians_by_t"].items():
        if medians:
            t_last = max(medians)
            typer.echo(f"{mode}: median error at t={t_last}: {medians[t_last]:.6g}")
    fits = summary.get("rate_fits", {})
    for mode, fit in fits.items():
        if fit is not None:
            typer.echo(f"{mode}: fitted slope {fit['slope']:.4f}")
    if summary.get("bound_violation_fraction") is not None:
        typer.echo(f"thm1_bound violations: {summary['bound_violation_fraction']:.3f}")


@app.command(context_settings=_EXTRA_ARGS)
def run(
    ctx: typer.Context,
    config: str = typer.Argument(..., help="Config file (.yaml, .json or key = value text)"),
    output_dir: str | None = typer.Option(
        None, "--output-dir", help="Directory for results and logs"
    ),
    workers: int | None = typer.Option(
        None, "--workers", help="Parallel trials (default: logical cores)"
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging and progress"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Only errors"),
) -> None:
    """Run an experiment and write ``<name>_results.csv`` and ``<name>_summary.json``.

    Extra [bold]--key=value[/bold] arguments override config file values.

    [bold]Examples:[/bold]

        opera run experiment.cfg --theta=0.75 --n-trials=20
    """
    from core import runner, writers

    cfg = load_experiment(config, ctx.args, output_dir, workers)
    out, slug = _outputs(cfg, verbose, quiet)
    try:
        results = runner.run_experiment(cfg, progress=verbose)
        rows = [row for result in results for row in result.as_dicts()]
        writers.write_rows(rows, out + slug + "_results.csv")
        summary = runner.summarize(results, cfg)
        writers.write_json(summary, out + slug + "_summary.json")
    except (ConfigurationError, ValidationError) as e:
        raise _fail(str(e), constants.EXIT_INVALID_ARGUMENTS)
    except OperaToolkitError as e:
        raise _fail(str(e), constants.EXIT_GENERAL_ERROR)
    _echo_summary(summary, quiet)
    if not quiet:
        typer.echo(f"Results written to {out}{slug}_results.csv")


@app.command(context_settings=_EXTRA_ARGS)
def rates(
    ctx: typer.Context,
    config: str = typer.Argument(..., help="Config file with several horizons T"),
    t_min: int = typer.Option(
        constants.RATE_FIT_T_MIN, "--t-min", help="Smallest t used in the fit"
    ),
    output_dir: str | None = typer.Option(None, "--output-dir"),
    workers: int | None = typer.Option(None, "--workers"),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
    quiet: bool = typer.Option(False, "--quiet", "-q"),
) -> None:
    """Fit the empirical convergence rate over the configured horizons.

    With [bold]beta[/bold] set, the fitted slope is printed next to the rate
    predicted for that source condition.
    """
    from core import runner, writers

    cfg = load_experiment(config, ctx.args, output_dir, workers)
    out, slug = _outputs(cfg, verbose, quiet)
    try:
        results = runner.run_experiment(cfg, progress=verbose)
        writers.write_rows(
            [row for result in results for row in result.as_dicts()],
            out + slug + "_results.csv",
        )
        fit = runner.fit_rate(results, t_min, cfg.run.modes[0])
        summary = runner.summarize(results, cfg, t_min)
        writers.write_json(summary, out + slug + "_summary.json")
    except (ConfigurationError, ValidationError) as e:
        raise _fail(str(e), constants.EXIT_INVALID_ARGUMENTS)
    except OperaToolkitError as e:
        raise _fail(str(e), constants.EXIT_GENERAL_ERROR)
    typer.echo(
        f"slope {fit.slope:.4f} (intercept {fit.intercept:.4f}, residual {fit.residual:.3g}) "
        f"over t in [{fit.t_min}, {fit.t_max}]"
    )
    if "expected_slope" in summary:
        typer.echo(f"predicted slope {summary['expected_slope']:.4f}")


@app.command(context_settings=_EXTRA_ARGS)
def compare(
    ctx: typer.Context,
    config: str = typer.Argument(..., help="Config file listing an opera mode and pogd"),
    output_dir: str | None = typer.Option(None, "--output-dir"),
    workers: int | None = typer.Option(None, "--workers"),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
    quiet: bool = typer.Option(False, "--quiet", "-q"),
) -> None:
    """Run OPERA and projected OGD on the same seeds and pair their rows."""
    from core import runner, writers

    cfg = load_experiment(config, ctx.args, output_dir, workers)
    out, slug = _outputs(cfg, verbose, quiet)
    try:
        comparison = runner.compare_modes(cfg, progress=verbose)
        writers.write_rows(
            [row for result in comparison.results for row in result.as_dicts()],
            out + slug + "_results.csv",
        )
        writers.write_rows(
            [vars(row) for row in comparison.paired],
            out + slug + "_paired.csv",
            writers.PAIRED_COLUMNS,
        )
        writers.write_json(comparison.summary, out + slug + "_summary.json")
    except (ConfigurationError, ValidationError) as e:
        raise _fail(str(e), constants.EXIT_INVALID_ARGUMENTS)
    except OperaToolkitError as e:
        raise _fail(str(e), constants.EXIT_GENERAL_ERROR)
    _echo_summary(comparison.summary, quiet)
    if not quiet:
        typer.echo(f"{len(comparison.paired)} paired rows written to {out}{slug}_paired.csv")


@app.command()
def verify(
    suite: str = typer.Argument(..., help="Suite name, e.g. lemmas or equivalence"),
    theta: float | None = typer.Option(None, "--theta"),
    mu: float | None = typer.Option(None, "--mu"),
    tmax: int = typer.Option(5000, "--tmax", help="Largest t of the lemma sweeps"),
    T: int | None = typer.Option(None, "--T", help="Horizon of learner runs"),
    seed: int = typer.Option(0, "--seed"),
    trials: int | None = typer.Option(None, "--trials"),
    beta: float | None = typer.Option(None, "--beta"),
    delta: float | None = typer.Option(None, "--delta"),
    dim: int | None = typer.Option(None, "--dim"),
    m: int | None = typer.Option(None, "--m", help="Support size of grid measures"),
    output_dir: str | None = typer.Option(None, "--output-dir"),
    workers: int | None = typer.Option(None, "--workers"),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
    quiet: bool = typer.Option(False, "--quiet", "-q"),
) -> None:
    """Run a verification suite and write ``verify_<suite>.json``.

    Exit code 0 means zero violations, 1 means at least one violation.

    [bold]Examples:[/bold]

        opera verify lemmas --theta 0.75 --tmax 5000

        opera verify equivalence --T 300
    """
    from core import writers
    from theory.suites import SUITES, SuiteOptions, run_suite

    if suite not in SUITES:
        raise _fail(
            f"Unknown suite '{suite}'. Available: {', '.join(SUITES)}",
            constants.EXIT_INVALID_ARGUMENTS,
        )
    env_out = ConfigLoader.load_env_overrides().get("output_dir")
    outslug = "verify_" + setup.sanitize_outslug(suite)
    try:
        out = setup.prepare_output_dir(output_dir or env_out)
        setup.setup_logger(out, outslug, verbose=verbose, quiet=quiet)
    except OSError as e:
        raise _fail(f"Cannot use output directory: {e}", constants.EXIT_GENERAL_ERROR)

    options = SuiteOptions(
        theta=theta,
        mu=mu,
        t_max=tmax,
        T=T,
        seed=seed,
        trials=trials,
        beta=beta,
        delta=delta,
        dim=dim,
        m=m,
        workers=workers or os.cpu_count() or 1,
    )
    try:
        report = run_suite(suite, options)
        report_path = out + outslug + ".json"
        writers.write_json(report.as_dict(), report_path)
    except (ConfigurationError, ValidationError) as e:
        raise _fail(str(e), constants.EXIT_INVALID_ARGUMENTS)
    except OperaToolkitError as e:
        raise _fail(str(e), constants.EXIT_GENERAL_ERROR)

    if not quiet:
        typer.echo(
            f"{suite}: {report.n_cases} cases, {report.n_violations} violations, "
            f"worst margin {report.worst_margin:.3g}"
        )
        if "max_deviation" in report.details:
            typer.echo(f"max deviation {report.details['max_deviation']:.3g}")
        typer.echo(f"Report written to {report_path}")
    if not report.passed:
        typer.echo(f"Verification failed, see {report_path}", err=True)
        raise typer.Exit(code=constants.EXIT_GENERAL_ERROR)


@app.command()
def report(
    results_dir: str = typer.Argument(..., help="Directory holding *_results.csv files"),
    t_min: int = typer.Option(constants.RATE_FIT_T_MIN, "--t-min"),
    output_dir: str | None = typer.Option(
        None, "--output-dir", help="Where to write the report (default: RESULTS_DIR)"
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
    quiet: bool = typer.Option(False, "--quiet", "-q"),
) -> None:
    """Consolidate a results directory into a summary JSON and a text table."""
    from core import reporting, writers

    try:
        files = reporting.find_result_files(Path(results_dir))
    except ValidationError as e:
        raise _fail(str(e), constants.EXIT_INVALID_ARGUMENTS)
    try:
        out = setup.prepare_output_dir(output_dir or results_dir)
        setup.setup_logger(out, "report", verbose=verbose, quiet=quiet)
        summary, paired = reporting.consolidate(Path(results_dir), t_min)
        writers.write_json(summary, out + reporting.REPORT_SUMMARY)
        table = reporting.format_fit_table(summary) + "\n" + reporting.format_paired_table(paired)
        reporting.write_table(table, Path(out + reporting.REPORT_TABLE))
    except (OperaToolkitError, OSError) as e:
        raise _fail(str(e), constants.EXIT_GENERAL_ERROR)
    if not quiet:
        typer.echo(table, nl=False)
        typer.echo(f"Consolidated {len(files)} file(s) into {out}{reporting.REPORT_SUMMARY}")


def cli() -> None:
    """Entry point for CLI - calls Typer app."""
    app()


if __name__ == "__main__":
    cli()
