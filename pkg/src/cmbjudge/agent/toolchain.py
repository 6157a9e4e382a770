"""Toolchain configuration and the two compilation stages.

The quick stage runs on the API server before enqueueing so users get fast
feedback on broken sources; the full stage runs on the execution node and
produces the artifact that is actually measured.
"""

from __future__ import annotations

import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

COMPILE_TIMEOUT = 60.0

DIAGNOSTIC_CAP = 64 * 1024


class ToolchainError(ValueError):
    pass


@dataclass(frozen=True)
class ToolchainConfig:
    id: str
    compile_command: tuple[str, ...]  # placeholders: {source}, {output}
    run_command: tuple[str, ...]  # placeholder: {artifact}
    env_allowlist: frozenset[str] = frozenset({"PATH", "HOME", "LANG"})
    check_command: Optional[tuple[str, ...]] = None  # placeholder: {source}
    source_suffix: str = ".c"

    def __post_init__(self) -> None:
        if not self.id:
            raise ToolchainError("toolchain id must be non-empty")
        for name, template, required in (
            ("compile_command", self.compile_command, ("{source}", "{output}")),
            ("run_command", self.run_command, ("{artifact}",)),
        ):
            for placeholder in required:
                count = sum(arg.count(placeholder) for arg in template)
                if count != 1:
                    raise ToolchainError(
                        f"{name} must contain {placeholder} exactly once (found {count})"
                    )
        if self.check_command is not None:
            count = sum(arg.count("{source}") for arg in self.check_command)
            if count != 1:
                raise ToolchainError("check_command must contain {source} exactly once")

    def compile_argv(self, source: Path, output: Path) -> list[str]:
        return [
            arg.replace("{source}", str(source)).replace("{output}", str(output))
            for arg in self.compile_command
        ]

    def check_argv(self, source: Path, discard_output: Path) -> list[str]:
        if self.check_command is not None:
            return [arg.replace("{source}", str(source)) for arg in self.check_command]
        return self.compile_argv(source, discard_output)

    def run_argv(self, artifact: Path) -> list[str]:
        return [arg.replace("{artifact}", str(artifact)) for arg in self.run_command]


DEFAULT_C_TOOLCHAIN = ToolchainConfig(
    id="c-gcc",
    compile_command=("gcc", "-O2", "-std=c11", "-Wall", "{source}", "-o", "{output}", "-lm"),
    check_command=("gcc", "-std=c11", "-fsyntax-only", "{source}"),
    run_command=("{artifact}",),
    source_suffix=".c",
)


@dataclass(frozen=True)
class CompileReport:
    ok: bool
    diagnostics: str = ""


def _run_compiler(argv: Sequence[str], cwd: Path) -> CompileReport:
    try:
        proc = subprocess.run(
            list(argv),
            cwd=str(cwd),
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            timeout=COMPILE_TIMEOUT,
        )
    except subprocess.TimeoutExpired:
        raise TimeoutError(f"compiler exceeded {COMPILE_TIMEOUT:.0f}s")
    except OSError as exc:
        raise ToolchainError(f"compiler unavailable: {exc}")
    text = proc.stdout.decode("utf-8", errors="replace")[:DIAGNOSTIC_CAP]
    return CompileReport(ok=proc.returncode == 0, diagnostics=text)


def quick_compile(source: bytes, toolchain: ToolchainConfig) -> CompileReport:
    """Syntax/semantic check only; nothing is kept."""
    with tempfile.TemporaryDirectory(prefix="quickc-") as tmp:
        tmpdir = Path(tmp)
        src_name = f"submission{toolchain.source_suffix}"
        (tmpdir / src_name).write_bytes(source)
        # relative paths keep scratch directories out of user-facing diagnostics
        argv = toolchain.check_argv(Path(src_name), Path("discard"))
        return _run_compiler(argv, tmpdir)


def full_compile(
    source: bytes, toolchain: ToolchainConfig, build_dir: str | Path
) -> tuple[Optional[Path], CompileReport]:
    """Produce an executable artifact in build_dir, or diagnostics."""
    build_dir = Path(build_dir)
    build_dir.mkdir(parents=True, exist_ok=True)
    src_name = f"submission{toolchain.source_suffix}"
    (build_dir / src_name).write_bytes(source)
    artifact = build_dir / "artifact"
    report = _run_compiler(
        toolchain.compile_argv(Path(src_name), Path("artifact")), build_dir
    )
    if not report.ok:
        return None, report
    if not artifact.exists():
        return None, CompileReport(ok=False, diagnostics="compiler produced no artifact")
    artifact.chmod(0o755)
    return artifact, report
