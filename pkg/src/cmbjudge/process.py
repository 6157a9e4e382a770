"""Run one untrusted command with resource limits and capped output capture."""

from __future__ import annotations

import math
import os
import resource
import signal
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

STDERR_CAP = 64 * 1024

FLAG_TIME_LIMIT = "time_limit"
FLAG_OUTPUT_LIMIT = "output_limit"
FLAG_CRASHED = "crashed"


class SandboxSetupError(RuntimeError):
    """The process could not be started under the requested confinement."""


@dataclass(frozen=True)
class RunOutcome:
    stdout: bytes
    stderr: bytes
    exit_status: int
    wall_time: float
    flags: frozenset[str]

    @property
    def timed_out(self) -> bool:
        return FLAG_TIME_LIMIT in self.flags

    @property
    def output_exceeded(self) -> bool:
        return FLAG_OUTPUT_LIMIT in self.flags

    @property
    def crashed(self) -> bool:
        return FLAG_CRASHED in self.flags

    @property
    def ok(self) -> bool:
        return self.exit_status == 0 and not self.flags


def _capped_reader(stream, cap: int, chunks: list[bytes], exceeded: threading.Event):
    total = 0
    while True:
        chunk = stream.read(65536)
        if not chunk:
            break
        if total < cap:
            keep = chunk[: cap - total]
            chunks.append(keep)
        total += len(chunk)
        if total > cap:
            exceeded.set()
            # keep draining so the child is not blocked on a full pipe
    stream.close()


def run_limited(
    argv: Sequence[str],
    stdin: bytes = b"",
    *,
    time_limit: Optional[float] = None,
    memory_limit_mib: Optional[int] = None,
    output_limit_bytes: Optional[int] = None,
    cwd: Optional[str] = None,
    env: Optional[Mapping[str, str]] = None,
    uid: Optional[int] = None,
    gid: Optional[int] = None,
) -> RunOutcome:
    """Execute argv and capture stdout up to output_limit_bytes.

    The wall clock is the authority for the time limit; RLIMIT_CPU is set one
    second above it purely as a backstop. Killing on wall expiry guarantees
    the reported wall_time is >= the limit whenever the time_limit flag is set.
    """
    if time_limit is not None and time_limit <= 0:
        raise ValueError("time_limit must be > 0")

    def preexec() -> None:
        os.setsid()
        if time_limit is not None:
            cpu = int(math.ceil(time_limit)) + 1
            resource.setrlimit(resource.RLIMIT_CPU, (cpu, cpu + 1))
        if memory_limit_mib is not None:
            as_bytes = memory_limit_mib * 1024 * 1024
            resource.setrlimit(resource.RLIMIT_AS, (as_bytes, as_bytes))
        if output_limit_bytes is not None:
            # also bounds scratch files the program writes
            resource.setrlimit(
                resource.RLIMIT_FSIZE, (output_limit_bytes, output_limit_bytes)
            )
        resource.setrlimit(resource.RLIMIT_CORE, (0, 0))
        if gid is not None:
            os.setgroups([gid])
            os.setgid(gid)
        if uid is not None:
            os.setuid(uid)

    started = time.monotonic()
    try:
        proc = subprocess.Popen(
            list(argv),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            cwd=cwd,
            env=dict(env) if env is not None else None,
            preexec_fn=preexec,
        )
    except (OSError, ValueError) as exc:
        raise SandboxSetupError(f"cannot start {argv[0]!r}: {exc}") from exc

    out_cap = output_limit_bytes if output_limit_bytes is not None else 16 * 1024 * 1024
    out_chunks: list[bytes] = []
    err_chunks: list[bytes] = []
    out_exceeded = threading.Event()
    err_exceeded = threading.Event()
    readers = [
        threading.Thread(
            target=_capped_reader, args=(proc.stdout, out_cap, out_chunks, out_exceeded)
        ),
        threading.Thread(
            target=_capped_reader, args=(proc.stderr, STDERR_CAP, err_chunks, err_exceeded)
        ),
    ]
    for r in readers:
        r.daemon = True
        r.start()

    def feed_stdin() -> None:
        try:
            if stdin:
                proc.stdin.write(stdin)
        except (BrokenPipeError, OSError):
            pass
        finally:
            try:
                proc.stdin.close()
            except OSError:
                pass

    feeder = threading.Thread(target=feed_stdin, daemon=True)
    feeder.start()

    flags: set[str] = set()

    def kill_group() -> None:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            proc.kill()

    deadline = None if time_limit is None else started + time_limit
    timed_out = False
    while True:
        if output_limit_bytes is not None and out_exceeded.is_set():
            kill_group()
            proc.wait()
            break
        if deadline is not None and time.monotonic() >= deadline:
            timed_out = True
            kill_group()
            proc.wait()
            break
        wait_slice = 0.05
        if deadline is not None:
            wait_slice = min(wait_slice, max(deadline - time.monotonic(), 0.001))
        try:
            proc.wait(timeout=wait_slice)
            break
        except subprocess.TimeoutExpired:
            continue

    wall = time.monotonic() - started
    feeder.join(timeout=1.0)
    for r in readers:
        r.join()

    exit_status = proc.returncode
    if timed_out:
        flags.add(FLAG_TIME_LIMIT)
        if time_limit is not None:
            wall = max(wall, time_limit)
    if output_limit_bytes is not None and out_exceeded.is_set():
        flags.add(FLAG_OUTPUT_LIMIT)
    if exit_status < 0 and not flags:
        flags.add(FLAG_CRASHED)

    return RunOutcome(
        stdout=b"".join(out_chunks),
        stderr=b"".join(err_chunks),
        exit_status=exit_status,
        wall_time=wall,
        flags=frozenset(flags),
    )
