"""Operator CLI: serve, agent, problem management, local measurement, seeding.

Exit codes: 0 success, 1 user error, 2 internal error. Machine-readable
output is JSON on stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import json
import logging
import signal
import sys
from pathlib import Path

import click

from . import __version__
from .agent.service import AgentService, HttpAgentLoop
from .config import Config, ConfigError, load_config
from .domain import ResourceLimits
from .measurement import (
    FixedThermal,
    MeasurementHarness,
    SyntheticSensor,
    read_trace_csv,
    replay_harness,
    write_trace_csv,
)
from .measurement.harness import PrepPolicy
from .packages import PackageValidationError, validate_problem_package
from .storage import Conflict, Store


class UserError(Exception):
    """Operator mistake: bad flags, bad config, bad package."""


def _echo_json(data) -> None:
    click.echo(json.dumps(data, sort_keys=True, indent=2))


def _load(config_path: str | None) -> Config:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        raise UserError(f"config error: {exc}")


@click.group()
@click.version_option(version=__version__, prog_name="cmb")
@click.option("-v", "--verbose", is_flag=True, help="Debug logging to stderr.")
def cli(verbose: bool) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def serve(config_path: str | None) -> None:
    """Run the API service and broker."""
    import uvicorn

    config = _load(config_path)
    from .service.runtime import JudgeService

    service = JudgeService(config)
    service.start()
    click.echo(
        f"serving on http://{config.server.listen_host}:{config.server.listen_port}",
        err=True,
    )
    try:
        uvicorn.run(
            service.app,
            host=config.server.listen_host,
            port=config.server.listen_port,
            log_level="warning",
        )
    except SystemExit as exc:  # uvicorn raises on bind failure
        raise UserError(
            f"cannot listen on {config.server.listen_host}:{config.server.listen_port}"
        ) from exc
    finally:
        service.stop()


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--broker", "broker_url", required=True, help="Broker endpoint, e.g. http://host:8765")
def agent(config_path: str | None, broker_url: str) -> None:
    """Run a backend agent against a broker endpoint."""
    config = _load(config_path)
    acfg = config.agent
    sensor = config.sensor.build()
    thermal = config.thermal.build()
    policy = config.measurement.prep_policy()
    period = config.measurement.sampling_period_seconds

    def harness_factory(executor):
        from .measurement import ReplaySensor

        if isinstance(sensor, ReplaySensor):
            # replay deployments are deterministic: every run integrates the
            # recorded trace over its full span
            return replay_harness(sensor.trace, executor=executor, policy=policy)
        return MeasurementHarness(
            sensor, thermal, policy, executor=executor, sampling_period=period
        )

    service = AgentService(
        acfg.id,
        config.server.agent_token,
        config.toolchains,
        harness_factory,
        acfg.scratch_root,
        sandbox_user=acfg.sandbox_user,
        checker_timeout=acfg.checker_timeout_seconds,
    )
    loop = HttpAgentLoop(
        broker_url,
        service,
        heartbeat_period=acfg.heartbeat_period_seconds,
        poll_period=acfg.poll_period_seconds,
        register_attempts=acfg.register_attempts,
    )
    signal.signal(signal.SIGTERM, lambda *_: loop.stop())
    click.echo(f"agent {acfg.id} connecting to {broker_url}", err=True)
    try:
        loop.run()
    except KeyboardInterrupt:
        loop.stop()
    except RuntimeError as exc:
        raise UserError(str(exc))


@cli.group()
def problem() -> None:
    """Install and inspect problem packages."""


@problem.command("add")
@click.argument("package_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--force", is_flag=True, help="Replace an already-installed problem id.")
def problem_add(package_dir: str, config_path: str | None, force: bool) -> None:
    config = _load(config_path)
    try:
        parsed = validate_problem_package(package_dir)
    except PackageValidationError as exc:
        for error in exc.errors:
            click.echo(f"error: {error}", err=True)
        raise UserError(f"package {package_dir} failed validation ({len(exc.errors)} problems)")
    store = Store(config.server.store_path)
    try:
        installed = store.install_problem(parsed, Path(package_dir), replace=force)
    except Conflict as exc:
        raise UserError(f"{exc} (use --force to replace)")
    finally:
        store.close()
    _echo_json(
        {
            "installed": installed.id,
            "title": installed.title,
            "test_cases": len(installed.test_cases),
            "published": installed.published,
        }
    )


@problem.command("list")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
def problem_list(config_path: str | None) -> None:
    config = _load(config_path)
    store = Store(config.server.store_path)
    try:
        problems = store.list_problems(published_only=False)
    finally:
        store.close()
    _echo_json(
        {
            "problems": [
                {
                    "id": p.id,
                    "title": p.title,
                    "published": p.published,
                    "checker_mode": p.checker.mode.value,
                    "test_cases": len(p.test_cases),
                }
                for p in problems
            ]
        }
    )


@cli.command()
@click.option("--trace", "trace_path", type=click.Path(exists=True), default=None,
              help="Replay a recorded trace CSV (deterministic).")
@click.option("--synthetic", "synthetic_watts", type=float, default=None,
              help="Constant-power synthetic sensor at this many watts.")
@click.option("--sampling-period", type=float, default=0.01, show_default=True)
@click.option("--time-limit", type=float, default=300.0, show_default=True)
@click.option("--dump-trace", "dump_path", type=click.Path(), default=None,
              help="Write the captured power trace as CSV.")
@click.option("--plot", "plot_path", type=click.Path(), default=None,
              help="Render the power trace to an image file.")
@click.argument("command", nargs=-1, type=click.UNPROCESSED, required=True)
def measure(
    trace_path: str | None,
    synthetic_watts: float | None,
    sampling_period: float,
    time_limit: float,
    dump_path: str | None,
    plot_path: str | None,
    command: tuple[str, ...],
) -> None:
    """Measure one command locally and print a JSON report.

    Example: cmb measure --synthetic 3.0 -- sleep 1
    """
    if (trace_path is None) == (synthetic_watts is None):
        raise UserError("exactly one of --trace or --synthetic is required")
    if trace_path is not None:
        try:
            trace = read_trace_csv(trace_path)
        except Exception as exc:
            raise UserError(f"malformed trace {trace_path}: {exc}")
        harness = replay_harness(trace)
    else:
        if synthetic_watts < 0:
            raise UserError("--synthetic watts must be >= 0")
        harness = MeasurementHarness(
            SyntheticSensor({"synthetic": synthetic_watts}),
            FixedThermal(55.0),
            PrepPolicy(cache_mode="simulate"),
            sampling_period=sampling_period,
        )
    limits = ResourceLimits(time_limit=time_limit, memory_limit=4096, output_limit=64 * 1024 * 1024)
    from .process import SandboxSetupError

    try:
        run = harness.run_measured(list(command), limits=limits)
    except SandboxSetupError as exc:
        raise UserError(str(exc))
    m = run.measurement
    if run.stdout:
        sys.stderr.buffer.write(run.stdout)
        sys.stderr.buffer.flush()
    if dump_path:
        write_trace_csv(run.trace, dump_path)
        click.echo(f"trace written to {dump_path}", err=True)
    if plot_path:
        from .measurement.plotting import plot_trace

        plot_trace(run.trace, plot_path, window=(m.t_start, m.t_end), title=" ".join(command))
        click.echo(f"figure written to {plot_path}", err=True)
    report = {
        "wall_time": m.wall_time,
        "energy_per_rail": dict(m.energy_per_rail),
        "energy_total": m.energy_total,
        "edp": m.edp,
        "prep": {
            "cache_cleared": m.prep.cache_cleared,
            "warmup_reached": m.prep.warmup_reached,
            "start_temp": m.prep.start_temp,
            "warmup_duration": m.prep.warmup_duration,
        },
        "exit_status": run.exit_status,
        "flags": sorted(run.outcome.flags),
    }
    _echo_json(report)


@cli.command("seed-demo")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--force", is_flag=True, help="Wipe a non-empty store first.")
def seed_demo_cmd(config_path: str | None, force: bool) -> None:
    """Install demo problems, users, a group, and sample submissions."""
    from .demo import seed_demo

    config = _load(config_path)
    store = Store(config.server.store_path)
    try:
        summary = seed_demo(store, force=force)
    except Conflict as exc:
        raise UserError(f"{exc} (use --force)")
    finally:
        store.close()
    _echo_json(summary)


def main() -> None:
    try:
        cli(standalone_mode=False)
    except UserError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
    except KeyboardInterrupt:
        sys.exit(130)
    except Exception as exc:  # internal fault
        logging.getLogger("cmb").exception("internal error")
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()
