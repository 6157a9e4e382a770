"""Judging one submission end to end on the execution node."""

from __future__ import annotations

import logging
import math
import shutil
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

from .. import checker as checkers
from ..domain import (
    CheckerMode,
    MeasurementResult,
    Problem,
    SubmissionResult,
    Verdict,
)
from ..measurement import MeasurementHarness
from ..measurement.harness import Executor
from ..process import SandboxSetupError
from .sandbox import SandboxedExecutor, SandboxSpec
from .toolchain import ToolchainConfig, full_compile

log = logging.getLogger(__name__)

HarnessFactory = Callable[[Executor], MeasurementHarness]


class JudgeFault(RuntimeError):
    """Judge-side failure (not the submission's fault)."""


@dataclass
class JobWorkspace:
    """Scratch layout for one job: job-<id>/{src,build,io}; deleted afterward."""

    root: Path
    src: Path
    build: Path
    io: Path

    @classmethod
    def create(cls, scratch_root: str | Path, job_id: int) -> "JobWorkspace":
        root = Path(scratch_root) / f"job-{job_id}"
        if root.exists():
            shutil.rmtree(root)
        dirs = {name: root / name for name in ("src", "build", "io")}
        for d in dirs.values():
            d.mkdir(parents=True)
        return cls(root=root, **dirs)

    def destroy(self) -> None:
        shutil.rmtree(self.root, ignore_errors=True)


def _check_case(
    problem: Problem,
    case_index: int,
    stdout: bytes,
    workspace: JobWorkspace,
    checker_path: Optional[Path],
    checker_timeout: float,
) -> checkers.CheckOutcome:
    case = problem.test_cases[case_index]
    cfg = problem.checker
    if cfg.mode is CheckerMode.exact:
        return checkers.check_exact(case.expected_output, stdout)
    if cfg.mode is CheckerMode.float_tokens:
        return checkers.check_float_tokens(
            case.expected_output, stdout, cfg.abs_tol or 0.0, cfg.rel_tol or 0.0
        )
    if checker_path is None:
        raise JudgeFault("external checker artifact missing")
    base = workspace.io / f"case-{case_index}"
    in_path = base.with_suffix(".in")
    exp_path = base.with_suffix(".exp")
    act_path = base.with_suffix(".act")
    in_path.write_bytes(case.input)
    exp_path.write_bytes(case.expected_output)
    act_path.write_bytes(stdout)
    return checkers.check_external(
        checker_path, in_path, exp_path, act_path, timeout=checker_timeout
    )


def judge_submission(
    source: bytes,
    problem: Problem,
    toolchain: ToolchainConfig,
    *,
    job_id: int,
    scratch_root: str | Path,
    harness_factory: HarnessFactory,
    sandbox_user: Optional[str] = None,
    checker_path: Optional[Path] = None,
    checker_timeout: float = checkers.DEFAULT_CHECKER_TIMEOUT,
) -> SubmissionResult:
    """Compile, then measure and check every test case in order.

    The first non-accepted test case finalizes the verdict; an accepted
    submission reports times and energies summed over all test cases with EDP
    recomputed from the totals.
    """
    try:
        workspace = JobWorkspace.create(scratch_root, job_id)
    except OSError as exc:
        return SubmissionResult(Verdict.judge_error, compile_log=f"scratch setup failed: {exc}")
    try:
        return _judge_in_workspace(
            source,
            problem,
            toolchain,
            workspace,
            harness_factory,
            sandbox_user,
            checker_path,
            checker_timeout,
        )
    except (JudgeFault, SandboxSetupError) as exc:
        log.warning("job %s judge fault: %s", job_id, exc)
        return SubmissionResult(Verdict.judge_error, compile_log=str(exc))
    except Exception as exc:
        log.exception("job %s unexpected judge failure", job_id)
        return SubmissionResult(Verdict.judge_error, compile_log=f"internal error: {exc}")
    finally:
        workspace.destroy()


def _judge_in_workspace(
    source: bytes,
    problem: Problem,
    toolchain: ToolchainConfig,
    workspace: JobWorkspace,
    harness_factory: HarnessFactory,
    sandbox_user: Optional[str],
    checker_path: Optional[Path],
    checker_timeout: float,
) -> SubmissionResult:
    (workspace.src / f"submission{toolchain.source_suffix}").write_bytes(source)
    try:
        artifact, report = full_compile(source, toolchain, workspace.build)
    except TimeoutError as exc:
        return SubmissionResult(Verdict.judge_error, compile_log=str(exc))
    if artifact is None:
        return SubmissionResult(Verdict.compile_error, compile_log=report.diagnostics)

    spec = SandboxSpec(
        workdir=workspace.io, user=sandbox_user, env_allowlist=toolchain.env_allowlist
    )
    harness = harness_factory(SandboxedExecutor(spec))
    argv = toolchain.run_argv(artifact)
    limits = problem.limits

    measurements: list[MeasurementResult] = []
    goodness: Optional[float] = None
    for case in problem.test_cases:
        run = harness.run_measured(argv, stdin=case.input, limits=limits)
        outcome = run.outcome
        if outcome.timed_out:
            return SubmissionResult(
                Verdict.time_limit, compile_log=report.diagnostics, failed_test_index=case.index
            )
        if outcome.output_exceeded:
            return SubmissionResult(
                Verdict.output_limit, compile_log=report.diagnostics, failed_test_index=case.index
            )
        if outcome.crashed or outcome.exit_status != 0:
            return SubmissionResult(
                Verdict.runtime_error, compile_log=report.diagnostics, failed_test_index=case.index
            )
        check = _check_case(
            problem, case.index, outcome.stdout, workspace, checker_path, checker_timeout
        )
        if check.verdict is Verdict.judge_error:
            return SubmissionResult(
                Verdict.judge_error, compile_log=f"checker failed: {check.detail}"
            )
        if check.verdict is not Verdict.accepted:
            return SubmissionResult(
                Verdict.wrong_answer, compile_log=report.diagnostics, failed_test_index=case.index
            )
        measurements.append(run.measurement)
        goodness = check.goodness  # last accepted case wins

    return SubmissionResult(
        Verdict.accepted,
        measurement=_aggregate(measurements),
        goodness=goodness,
        compile_log=report.diagnostics,
    )


def _aggregate(measurements: list[MeasurementResult]) -> MeasurementResult:
    """Sum times and energies across cases; EDP recomputed from the totals.

    The aggregate lives on a synthetic zero-based timeline (the per-case
    timestamps belong to different windows, and re-basing keeps the
    wall_time == t_end - t_start identity exact). Prep event timestamps are
    dropped for the same reason; the warm-up outcome of the first case is
    kept.
    """
    assert measurements
    wall_total = math.fsum(m.wall_time for m in measurements)
    rails = list(measurements[0].energy_per_rail)
    per_rail = {
        rail: math.fsum(m.energy_per_rail[rail] for m in measurements) for rail in rails
    }
    energy_total = math.fsum(per_rail.values())
    prep = replace(measurements[0].prep, started_at=None, finished_at=None)
    return MeasurementResult(
        wall_time=wall_total,
        energy_total=energy_total,
        energy_per_rail=per_rail,
        edp=energy_total * wall_total,
        t_start=0.0,
        t_end=wall_total,
        prep=prep,
    )
