"""
CLI interface for canaryaudit using Click framework
"""

import json
import logging
import math
from typing import Any, Dict, List, NoReturn, Optional, Sequence

import click
import numpy as np

from . import __version__
from .ci import bernstein1, matrix_bound, wilson1
from .config import (
    AuditConfig,
    ExperimentSpec,
    output_directory,
    parse_ci,
    parse_float_list,
)
from .exceptions import ConfigError, OrderExceedsDimensionError
from .harness import (
    SWEEP_COLUMNS,
    audit,
    bias_variance_decomposition,
    run_sweep,
    trial_canaries,
)
from .logger import setup_logger
from .mechanism import epsilon_closed_form, epsilon_of_sigma, sigma_for_epsilon
from .models import AuditReport, MomentVector
from .utils import (
    ensure_directory,
    read_stat_matrix,
    write_canaries,
    write_json,
    write_rows,
    write_stat_matrix,
)

NEIGHBORHOOD_CHOICE = click.Choice(["add_remove", "replace_one"])


@click.group(
    context_settings=dict(help_option_names=["-h", "--help"]),
    help="""Black-box differential privacy auditing with many canaries.

Runs randomized audits of a mechanism, computes confidence bounds on
exchangeable test statistics and reports an empirical lower bound on
epsilon that holds with probability 1 - beta.""",
)
@click.version_option(version=__version__, prog_name="canaryaudit")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose output")
@click.pass_context
def main(ctx: click.Context, verbose: bool) -> None:
    """Command group - see help text for details."""
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose


def _command_logger(ctx: click.Context) -> logging.Logger:
    verbose = bool(ctx.obj and ctx.obj.get("verbose"))
    logger = setup_logger(level="DEBUG" if verbose else None)
    if verbose:
        logger.debug("Verbose logging enabled")
    return logger


def _audit_options(command: Any) -> Any:
    """Flags shared by the commands that build an AuditConfig."""
    options = [
        click.option(
            "--config", "config_file", default=None, help="Path to key=value config file"
        ),
        click.option("--n", type=int, default=None, help="Number of trials (default: 1024)"),
        click.option(
            "--K", "k", type=int, default=None, help="Training canaries per trial (default: 32)"
        ),
        click.option("--m", type=int, default=None, help="Null canaries per trial (default: K)"),
        click.option("--d", type=int, default=None, help="Dimension (default: 1000)"),
        click.option(
            "--eps", "epsilon", type=float, default=None, help="Claimed epsilon (default: 1)"
        ),
        click.option("--delta", type=float, default=None, help="Claimed delta (default: 1e-5)"),
        click.option(
            "--beta", type=float, default=None, help="Failure probability (default: 0.05)"
        ),
        click.option(
            "--sigma", type=float, default=None, help="Noise scale, overrides calibration"
        ),
        click.option(
            "--ci", default=None, help="Interval: bernstein|wilson + 1|2|4 (default: wilson2)"
        ),
        click.option(
            "--neighborhood",
            type=NEIGHBORHOOD_CHOICE,
            default=None,
            help="Neighboring relation (default: add_remove)",
        ),
        click.option(
            "--tau",
            type=float,
            default=None,
            help="Fixed rejection threshold (default: tuned on holdout trials)",
        ),
        click.option("--tau-grid", default=None, help="Comma-separated thresholds to tune over"),
        click.option("--seed", type=int, default=None, help="Master seed (default: 0)"),
        click.option(
            "--workers",
            type=int,
            default=None,
            help="Concurrent trials (env: CANARYAUDIT_WORKERS)",
        ),
        click.option(
            "--both-directions/--one-direction",
            default=None,
            help="Also audit the swapped condition with complement rejection sets",
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _config_overrides(
    ci: Optional[str], tau_grid: Optional[str], **flags: Any
) -> Dict[str, Any]:
    overrides = dict(flags)
    if ci is not None:
        overrides["ci_method"], overrides["ci_order"] = parse_ci(ci)
    if tau_grid is not None:
        try:
            overrides["tau_grid"] = parse_float_list(tau_grid)
        except ValueError as e:
            raise ConfigError("tau_grid", f"cannot parse {tau_grid!r}") from e
    return overrides


def _load_and_validate_config(
    config_file: Optional[str], logger: logging.Logger, **flags: Any
) -> AuditConfig:
    """Load and validate configuration."""
    try:
        config = AuditConfig.from_file(config_file, **_config_overrides(**flags))
    except (ConfigError, OrderExceedsDimensionError) as e:
        logger.error(f"Configuration error: {e}")
        raise click.UsageError(str(e))

    logger.debug("Configuration loaded:")
    for key, value in config.to_dict().items():
        logger.debug(f"  {key}: {value}")

    return config


def _format_eps(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.6f}"


def _write_artifacts(
    report: AuditReport,
    config: AuditConfig,
    out: str,
    dump_canaries: bool,
    logger: logging.Logger,
) -> None:
    """Write report.json, the statistics matrices and optionally the canaries."""
    out_dir = ensure_directory(out)
    write_json(out_dir / "report.json", report.to_dict())
    if report.stats_alt is not None and report.stats_null is not None:
        write_stat_matrix(out_dir / "stats_alt.csv", report.stats_alt)
        write_stat_matrix(out_dir / "stats_null.csv", report.stats_null)
    if dump_canaries:
        canaries = trial_canaries(config, 0)
        path = out_dir / "canaries_trial0.csv"
        write_canaries(path, canaries.training, canaries.null)
    logger.info(f"Artifacts written to: {out_dir}")


@main.command("audit")
@_audit_options
@click.option(
    "--out",
    default=None,
    help="Output directory (default: from the config file, else audit_out)",
)
@click.option("--fail-on-violation", is_flag=True, help="Exit 1 when eps_hat exceeds the claimed epsilon")
@click.option("--dump-canaries", is_flag=True, help="Write the first trial's canaries as CSV")
@click.pass_context
def audit_command(
    ctx: click.Context,
    config_file: Optional[str],
    out: Optional[str],
    fail_on_violation: bool,
    dump_canaries: bool,
    **flags: Any,
) -> None:
    """Run one audit and write report.json, stats_alt.csv and stats_null.csv."""
    logger = _command_logger(ctx)
    config = _load_and_validate_config(config_file, logger, **flags)
    out = out or output_directory(config_file) or "audit_out"

    try:
        report = audit(config)
        _write_artifacts(report, config, out, dump_canaries, logger)
    except Exception as e:
        _handle_error(e, logger)

    eps_text = _format_eps(report.eps_hat)
    click.echo(f"eps_hat = {eps_text} (claimed epsilon = {config.epsilon:g})")
    click.echo(f"guarantee: {report.guarantee}")
    if fail_on_violation and report.violates(config.epsilon):
        logger.warning(f"eps_hat {eps_text} exceeds claimed epsilon {config.epsilon:g}")
        ctx.exit(1)


@main.command("sweep")
@click.argument("spec_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", default=None, help="Output directory (default: from the spec file, else results)")
@click.option("--repeats", type=int, default=None, help="Repetitions per sweep point")
@click.option("--workers", type=int, default=None, help="Concurrent trials (env: CANARYAUDIT_WORKERS)")
@click.pass_context
def sweep_command(
    ctx: click.Context,
    spec_file: str,
    out_dir: Optional[str],
    repeats: Optional[int],
    workers: Optional[int],
) -> None:
    """Audit every point of an experiment grid and write results.csv."""
    logger = _command_logger(ctx)
    try:
        spec = ExperimentSpec.from_file(
            spec_file, out_dir=out_dir, repeats=repeats, workers=workers
        )
    except (ConfigError, OrderExceedsDimensionError) as e:
        logger.error(f"Configuration error: {e}")
        raise click.UsageError(str(e))

    try:
        rows = run_sweep(spec)
        path = ensure_directory(spec.out_dir) / "results.csv"
        write_rows(path, rows, SWEEP_COLUMNS)
    except Exception as e:
        _handle_error(e, logger)

    logger.info(f"{len(rows)} rows written")
    click.echo(str(path))


@main.command("decompose")
@_audit_options
@click.option("--k-values", default="1,4,16,64", help="Comma-separated canary counts")
@click.option("--orders", default="2,4", help="Comma-separated interval orders above 1")
@click.option("--repeats", type=int, default=10, help="Number of seeds")
@click.option("--out", default=None, help="Write the table as JSON to this file")
@click.pass_context
def decompose_command(
    ctx: click.Context,
    config_file: Optional[str],
    k_values: str,
    orders: str,
    repeats: int,
    out: Optional[str],
    **flags: Any,
) -> None:
    """Split the empirical epsilon into bias and variance deltas over K."""
    logger = _command_logger(ctx)
    config = _load_and_validate_config(config_file, logger, **flags)
    try:
        ks = _parse_ints("k-values", k_values)
        order_list = _parse_ints("orders", orders)
    except ConfigError as e:
        raise click.UsageError(str(e))

    try:
        rows = bias_variance_decomposition(
            config,
            ks,
            order_list,
            seeds=range(config.seed, config.seed + repeats),
        )
    except Exception as e:
        _handle_error(e, logger)

    payload = {"ci_method": config.ci_method, "rows": [row.to_dict() for row in rows]}
    if out:
        write_json(out, payload)
        logger.info(f"Decomposition written to: {out}")
    click.echo(json.dumps(payload, indent=2))


@main.command("calibrate")
@click.option("--eps", "epsilon", type=float, default=None, help="Target epsilon")
@click.option("--sigma", type=float, default=None, help="Noise scale to convert instead")
@click.option("--delta", type=float, default=1e-5, help="Target delta (default: 1e-5)")
@click.pass_context
def calibrate_command(
    ctx: click.Context,
    epsilon: Optional[float],
    sigma: Optional[float],
    delta: float,
) -> None:
    """Print the Gaussian noise scale for (eps, delta), or the epsilon of a sigma."""
    logger = _command_logger(ctx)
    if (epsilon is None) == (sigma is None):
        raise click.UsageError("pass exactly one of --eps or --sigma")

    try:
        if epsilon is not None:
            sigma = sigma_for_epsilon(epsilon, delta)
        result = {
            "sigma": sigma,
            "delta": delta,
            "epsilon": epsilon_of_sigma(sigma, delta),
            "epsilon_closed_form": epsilon_closed_form(sigma, delta),
        }
        if epsilon is not None:
            result["target_epsilon"] = epsilon
    except Exception as e:
        _handle_error(e, logger)

    click.echo(json.dumps(result, indent=2))


@main.command("ci")
@click.argument("stats_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("--ci", "ci_name", default="wilson2", help="Interval: bernstein|wilson + 1|2|4")
@click.option("--beta", type=float, default=0.05, help="One-sided failure probability")
@click.pass_context
def ci_command(ctx: click.Context, stats_csv: str, ci_name: str, beta: float) -> None:
    """
    Compute a confidence interval on the mean of a saved statistics matrix.

    The bounds in report.json use beta/2 per side, so pass --beta 0.025 to
    reproduce an audit run at beta=0.05.
    """
    logger = _command_logger(ctx)
    try:
        method, order = parse_ci(ci_name)
    except ConfigError as e:
        raise click.UsageError(str(e))

    try:
        matrix = read_stat_matrix(stats_csv)
        bound = matrix_bound(matrix, method, order, beta)
    except Exception as e:
        _handle_error(e, logger)

    click.echo(bound.to_json())


@main.command("widths")
@click.option("--n", "n_values", default="30,100,1000", help="Comma-separated sample sizes")
@click.option("--beta", "beta_values", default="0.01,0.05", help="Comma-separated failure probabilities")
@click.pass_context
def widths_command(ctx: click.Context, n_values: str, beta_values: str) -> None:
    """Print first-order Bernstein and Wilson interval widths as CSV."""
    logger = _command_logger(ctx)
    try:
        ns = _parse_ints("n", n_values)
        betas = list(parse_float_list(beta_values))
    except (ConfigError, ValueError) as e:
        raise click.UsageError(str(e))

    try:
        lines = _width_table(ns, betas)
    except Exception as e:
        _handle_error(e, logger)

    for line in lines:
        click.echo(line)


def _width_table(ns: Sequence[int], betas: Sequence[float]) -> List[str]:
    lines = ["mu1,n,beta,bernstein1_width,wilson1_width"]
    for mu1 in np.round(np.linspace(0.05, 0.95, 19), 2):
        for n in ns:
            for beta in betas:
                moments = MomentVector(
                    mu_hat={1: float(mu1)}, per_trial=np.empty((n, 1))
                )
                b = bernstein1(moments, n, beta)
                w = wilson1(moments, n, 1, beta)
                lines.append(f"{mu1:g},{n},{beta:g},{b.width:.10f},{w.width:.10f}")
    return lines


def _parse_ints(field: str, text: str) -> List[int]:
    try:
        values = [int(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise ConfigError(field, f"cannot parse {text!r}") from e
    if not values:
        raise ConfigError(field, "expected at least one value")
    return values


def _handle_error(e: Exception, logger: logging.Logger) -> NoReturn:
    """Handle and log errors."""
    error_msg = f"Error: {e}"
    logger.error(error_msg)
    logger.debug("Full traceback:", exc_info=True)
    # Also output to stderr for CLI visibility
    click.echo(error_msg, err=True)
    raise click.Abort()
