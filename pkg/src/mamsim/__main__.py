import sys

import click

from mamsim.errors import ConfigurationError, SimError
from mamsim.redist.types import Method, Strategy

EXIT_CONFIG = 2
EXIT_PROTOCOL = 3


def _raw_config(path: str | None) -> dict:
    if not path:
        return {}
    from mamsim.common import load_config
    try:
        return load_config(path)
    except (FileNotFoundError, ValueError) as e:
        click.secho(f"[config] {e}", fg="red")
        sys.exit(EXIT_CONFIG)


def _report_violations(violations) -> None:
    for v in violations:
        click.secho(f"[config] {v}", fg="red")


@click.group(help="mamsim: virtual-time simulator of malleable data redistribution")
@click.option("--log-level", default="WARNING", show_default=True, help="loguru level for diagnostics")
@click.option("-v", "--verbose", is_flag=True, help="Shortcut for --log-level DEBUG")
def cli(log_level: str, verbose: bool):
    from mamsim.common import setup_logging
    setup_logging("DEBUG" if verbose else log_level)


@cli.command()
@click.option("--config", "config_path", default=None, help="Path to an experiment YAML")
@click.option("--ns", type=int, default=None, help="Source rank count (needs --nd)")
@click.option("--nd", type=int, default=None, help="Drain rank count (needs --ns)")
@click.option("--method", type=click.Choice([m.value for m in Method]), default=None)
@click.option("--strategy", type=click.Choice([s.value for s in Strategy]), default=None)
@click.option("--n", "n_elements", type=int, default=None, help="Elements to redistribute")
@click.option("--repeats", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--workers", type=int, default=None, help="Parallel worker processes")
@click.option("--trace", "trace_dir", default=None, help="Directory for per-run trace files")
@click.option("--out", "report", default=None, help="CSV report path (default: stdout)")
@click.option("--jsonl", default=None, help="Line-delimited JSON report path")
@click.option("--db", default=None, help="SQLite file to store every run")
@click.option("--allow-identity", is_flag=True, help="Admit ns = nd pairs")
@click.option("--include-threading-in-min", is_flag=True, help="Count RMA threading runs in the blocking-total minimum")
@click.option("--collective-blocks-background", is_flag=True,
              help="The application's sync collective waits for the background stream")
def run(config_path, ns, nd, method, strategy, n_elements, repeats, seed, workers, trace_dir, report, jsonl, db,
        allow_identity, include_threading_in_min, collective_blocks_background):
    """Run one reconfiguration or the whole (ns, nd) x method x strategy matrix."""
    from mamsim.common import normalize_path
    from mamsim.config import validate_config, ExperimentConfig
    from mamsim.scripts.matrix import run_matrix

    raw = _raw_config(config_path)
    if (ns is None) != (nd is None):
        click.secho("[run] --ns and --nd go together", fg="red")
        sys.exit(EXIT_CONFIG)
    if ns is not None:
        raw["pairs"] = [[ns, nd]]
    if method:
        raw["methods"] = [method]
    if strategy:
        raw["strategies"] = [strategy]
    if method and strategy:
        # an explicit combination must be eligible
        raw["skip_ineligible"] = False
    for key, val in (("repeats", repeats), ("seed", seed), ("workers", workers)):
        if val is not None:
            raw[key] = val
    if allow_identity:
        raw["allow_identity"] = True
    if include_threading_in_min:
        raw["include_threading_in_min"] = True
    if n_elements is not None:
        raw.setdefault("data", {})["n_elements"] = n_elements
    if collective_blocks_background:
        raw.setdefault("runtime", {})["collective_blocks_background"] = True
    for key, val in (("report", report), ("jsonl", jsonl), ("trace_dir", trace_dir), ("db", db)):
        if val:
            raw.setdefault("output", {})[key] = normalize_path(val)

    violations = validate_config(raw)
    if violations:
        _report_violations(violations)
        sys.exit(EXIT_CONFIG)
    cfg = ExperimentConfig.model_validate(raw)

    try:
        result = run_matrix(cfg)
    except ConfigurationError as e:
        click.secho(f"[run] {e}", fg="red")
        sys.exit(EXIT_CONFIG)
    except SimError as e:
        click.secho(f"[run] {e}", fg="red")
        sys.exit(EXIT_PROTOCOL)

    if not cfg.output.report:
        click.echo(result.report.to_csv(), nl=False)
    else:
        click.secho(f"[run] {len(result.records)} runs, report at {cfg.output.report}", fg="green")


@cli.command()
@click.option("--config", "config_path", required=True, help="Path to an experiment YAML")
def validate(config_path: str):
    """Check an experiment config without running it."""
    from mamsim.config import validate_config

    violations = validate_config(_raw_config(config_path))
    if violations:
        _report_violations(violations)
        sys.exit(EXIT_CONFIG)
    click.secho("[config] OK", fg="green")


@cli.command()
@click.option("--config", "config_path", default=None, help="Path to an experiment YAML")
@click.option("--p", "ranks", type=int, default=1, show_default=True, help="Rank count")
def baseline(config_path, ranks: int):
    """Virtual time of the application without any reconfiguration."""
    from mamsim.app import simulate_baseline
    from mamsim.config import validate_config, ExperimentConfig

    raw = _raw_config(config_path)
    violations = validate_config(raw)
    if violations:
        _report_violations(violations)
        sys.exit(EXIT_CONFIG)
    if ranks < 1:
        click.secho(f"[baseline] --p must be >= 1 (got {ranks})", fg="red")
        sys.exit(EXIT_CONFIG)
    cfg = ExperimentConfig.model_validate(raw)
    click.echo(repr(simulate_baseline(cfg.app, cfg.cost, ranks)))


if __name__ == "__main__":
    cli()
