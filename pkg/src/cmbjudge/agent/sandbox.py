"""Sandboxed execution of compiled submissions.

Each run happens in the job's io/ directory with a minimal environment and
rlimits; when a sandbox user is configured (and we have the privilege to
switch), the child drops to that uid/gid.
"""

from __future__ import annotations

import os
import pwd
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from ..domain import ResourceLimits
from ..process import RunOutcome, SandboxSetupError, run_limited

BASE_ENV = {"PATH": "/usr/bin:/bin", "LANG": "C.UTF-8"}


@dataclass(frozen=True)
class SandboxSpec:
    workdir: Path
    user: Optional[str] = None  # unprivileged account to run as
    env_allowlist: frozenset[str] = frozenset()

    def resolve_ids(self) -> tuple[Optional[int], Optional[int]]:
        if not self.user:
            return None, None
        if os.geteuid() != 0:
            raise SandboxSetupError(
                f"sandbox user {self.user!r} configured but not running as root"
            )
        try:
            entry = pwd.getpwnam(self.user)
        except KeyError:
            raise SandboxSetupError(f"sandbox user {self.user!r} does not exist")
        return entry.pw_uid, entry.pw_gid


def build_env(allowlist: frozenset[str]) -> dict[str, str]:
    env = dict(BASE_ENV)
    for name in allowlist:
        if name in os.environ:
            env[name] = os.environ[name]
    return env


def execute_sandboxed(
    argv: Sequence[str], stdin: bytes, limits: ResourceLimits, spec: SandboxSpec
) -> RunOutcome:
    uid, gid = spec.resolve_ids()
    if uid is not None:
        # the dropped-privilege child still needs to traverse and write here
        os.chmod(spec.workdir, 0o777)
    return run_limited(
        argv,
        stdin,
        time_limit=limits.time_limit,
        memory_limit_mib=limits.memory_limit,
        output_limit_bytes=limits.output_limit,
        cwd=str(spec.workdir),
        env=build_env(spec.env_allowlist),
        uid=uid,
        gid=gid,
    )


class SandboxedExecutor:
    """measurement.Executor adapter running inside one job's sandbox."""

    def __init__(self, spec: SandboxSpec):
        self.spec = spec

    def execute(self, argv: Sequence[str], stdin: bytes, limits: ResourceLimits) -> RunOutcome:
        return execute_sandboxed(argv, stdin, limits, self.spec)
