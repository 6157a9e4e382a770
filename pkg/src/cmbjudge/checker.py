"""Output checking: exact, float-tolerant, and external-program modes."""

from __future__ import annotations

import re
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .domain import Verdict

DEFAULT_CHECKER_TIMEOUT = 30.0

# A decimal number: optional sign, digits with optional fraction, optional
# exponent. Deliberately narrower than float(): "inf", "nan" and "1_0" are
# treated as plain strings.
_DECIMAL_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?\Z")

_GOODNESS_RE = re.compile(r"goodness:\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*\Z")


@dataclass(frozen=True)
class CheckOutcome:
    verdict: Verdict
    goodness: Optional[float] = None
    detail: str = ""

    @property
    def accepted(self) -> bool:
        return self.verdict is Verdict.accepted


def _decode(blob: bytes) -> str:
    return blob.decode("utf-8", errors="replace")


def canonicalize_lines(blob: bytes) -> list[str]:
    """Strip trailing whitespace per line and drop trailing blank lines."""
    lines = [line.rstrip() for line in _decode(blob).split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    return lines


def check_exact(expected: bytes, actual: bytes) -> CheckOutcome:
    exp = canonicalize_lines(expected)
    act = canonicalize_lines(actual)
    for i, (e, a) in enumerate(zip(exp, act)):
        if e != a:
            return CheckOutcome(
                Verdict.wrong_answer, detail=f"line {i + 1}: expected {e!r}, got {a!r}"
            )
    if len(exp) != len(act):
        which = "missing" if len(act) < len(exp) else "extra"
        return CheckOutcome(
            Verdict.wrong_answer,
            detail=f"line {min(len(exp), len(act)) + 1}: {which} output line",
        )
    return CheckOutcome(Verdict.accepted)


def parse_decimal(token: str) -> Optional[float]:
    if _DECIMAL_RE.fullmatch(token):
        return float(token)
    return None


def tokens_match(expected: str, actual: str, abs_tol: float, rel_tol: float) -> bool:
    e = parse_decimal(expected)
    a = parse_decimal(actual)
    if e is None or a is None:
        return expected == actual
    # Equality short-circuit keeps overflow-to-inf pairs comparable (their
    # difference is NaN, which would fail the tolerance test).
    if a == e:
        return True
    return abs(a - e) <= max(abs_tol, rel_tol * abs(e))


def check_float_tokens(
    expected: bytes, actual: bytes, abs_tol: float, rel_tol: float
) -> CheckOutcome:
    if abs_tol < 0 or rel_tol < 0:
        raise ValueError("tolerances must be >= 0")
    exp_tokens = _decode(expected).split()
    act_tokens = _decode(actual).split()
    if len(exp_tokens) != len(act_tokens):
        return CheckOutcome(
            Verdict.wrong_answer,
            detail=f"token count mismatch: expected {len(exp_tokens)}, got {len(act_tokens)}",
        )
    for i, (e, a) in enumerate(zip(exp_tokens, act_tokens)):
        if not tokens_match(e, a, abs_tol, rel_tol):
            return CheckOutcome(
                Verdict.wrong_answer, detail=f"token {i + 1}: expected {e!r}, got {a!r}"
            )
    return CheckOutcome(Verdict.accepted)


def check_external(
    checker: str | Path,
    input_path: str | Path,
    expected_path: str | Path,
    actual_path: str | Path,
    *,
    timeout: float = DEFAULT_CHECKER_TIMEOUT,
) -> CheckOutcome:
    """Invoke `checker <input> <expected> <actual>`.

    Exit 0 is accepted, exit 1 wrong answer, anything else (crash, timeout,
    unexpected code) a judge error. An accepted checker may report a goodness
    value as its first stdout line: `goodness: <decimal>`.
    """
    argv = [str(checker), str(input_path), str(expected_path), str(actual_path)]
    try:
        proc = subprocess.run(
            argv, stdout=subprocess.PIPE, stderr=subprocess.PIPE, timeout=timeout
        )
    except subprocess.TimeoutExpired:
        return CheckOutcome(Verdict.judge_error, detail=f"checker timed out after {timeout}s")
    except OSError as exc:
        return CheckOutcome(Verdict.judge_error, detail=f"checker failed to start: {exc}")

    stdout = proc.stdout.decode("utf-8", errors="replace")
    first_line = stdout.splitlines()[0].strip() if stdout.splitlines() else ""
    if proc.returncode == 0:
        goodness = None
        m = _GOODNESS_RE.fullmatch(first_line)
        if m:
            goodness = float(m.group(1))
        return CheckOutcome(Verdict.accepted, goodness=goodness, detail=first_line)
    if proc.returncode == 1:
        detail = first_line or proc.stderr.decode("utf-8", errors="replace").strip()
        return CheckOutcome(Verdict.wrong_answer, detail=detail)
    return CheckOutcome(
        Verdict.judge_error,
        detail=f"checker exited with unexpected status {proc.returncode}",
    )
