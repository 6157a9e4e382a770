"""Problem packages: validation of the on-disk layout and checker builds.

Layout:
    manifest.json   id, title, limits, checker config, optional goodness_label
    statement.md    problem statement (rendered by clients)
    tests/NN.in     test case input, NN contiguous from 0
    tests/NN.out    expected output for NN.in
    checker/        optional sources for an external checker, built at install
"""

from __future__ import annotations

import json
import re
import shutil
import subprocess
from pathlib import Path
from typing import Any

from .domain import CheckerConfig, CheckerMode, DomainError, Problem, TestCase

CHECKER_BUILD_TIMEOUT = 60.0

_CASE_RE = re.compile(r"(\d+)\.(in|out)\Z")


class PackageValidationError(ValueError):
    """Carries every violation found, not just the first."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


def _load_manifest(root: Path, errors: list[str]) -> dict[str, Any]:
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        errors.append("manifest.json missing")
        return {}
    try:
        data = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        errors.append(f"manifest.json unreadable: {exc}")
        return {}
    if not isinstance(data, dict):
        errors.append("manifest.json must hold a JSON object")
        return {}
    return data


def _collect_cases(root: Path, errors: list[str]) -> list[TestCase]:
    tests_dir = root / "tests"
    if not tests_dir.is_dir():
        errors.append("tests/ directory missing")
        return []
    inputs: dict[int, Path] = {}
    outputs: dict[int, Path] = {}
    for path in tests_dir.iterdir():
        m = _CASE_RE.fullmatch(path.name)
        if not m:
            continue
        idx = int(m.group(1))
        (inputs if m.group(2) == "in" else outputs)[idx] = path
    for idx in sorted(set(inputs) - set(outputs)):
        errors.append(f"tests/{inputs[idx].name} has no matching .out file")
    for idx in sorted(set(outputs) - set(inputs)):
        errors.append(f"tests/{outputs[idx].name} has no matching .in file")
    indices = sorted(set(inputs) & set(outputs))
    if not indices:
        errors.append("test_cases empty")
        return []
    if indices != list(range(len(indices))):
        errors.append(f"test case indices must be contiguous from 0, got {indices}")
        return []
    return [
        TestCase(i, inputs[i].read_bytes(), outputs[i].read_bytes()) for i in indices
    ]


def _checker_config(manifest: dict[str, Any], root: Path, errors: list[str]) -> CheckerConfig | None:
    raw = manifest.get("checker")
    if not isinstance(raw, dict) or "mode" not in raw:
        errors.append("manifest field 'checker.mode' missing")
        return None
    try:
        mode = CheckerMode(raw["mode"])
    except ValueError:
        errors.append(f"unknown checker mode {raw['mode']!r}")
        return None

    abs_tol = raw.get("abs_tol")
    rel_tol = raw.get("rel_tol")
    checker_ref = raw.get("checker_ref")
    if mode is not CheckerMode.float_tokens and (abs_tol is not None or rel_tol is not None):
        errors.append("tolerance present without float mode")
        return None
    if mode is CheckerMode.float_tokens:
        if abs_tol is None and rel_tol is None:
            errors.append("float_tokens checker needs abs_tol and/or rel_tol")
            return None
        abs_tol = float(abs_tol if abs_tol is not None else 0.0)
        rel_tol = float(rel_tol if rel_tol is not None else 0.0)
    if mode is CheckerMode.external:
        if not checker_ref:
            errors.append("external checker needs checker_ref")
            return None
        if not (root / "checker" / str(checker_ref)).is_file():
            errors.append(f"checker/{checker_ref} missing")
            return None
    elif checker_ref:
        errors.append("checker_ref present without external mode")
        return None
    try:
        return CheckerConfig(mode=mode, abs_tol=abs_tol, rel_tol=rel_tol, checker_ref=checker_ref)
    except DomainError as exc:
        errors.append(str(exc))
        return None


def validate_problem_package(package_root: str | Path) -> Problem:
    """Validate a package directory and return the Problem it describes.

    Pure over the directory's bytes. Raises PackageValidationError listing
    every violation found.
    """
    root = Path(package_root)
    errors: list[str] = []
    if not root.is_dir():
        raise PackageValidationError([f"{root} is not a directory"])

    manifest = _load_manifest(root, errors)

    fields: dict[str, Any] = {}
    for name, conv in (("id", str), ("title", str)):
        if not manifest.get(name):
            errors.append(f"manifest field {name!r} missing")
        else:
            fields[name] = conv(manifest[name])
    for name in ("time_limit", "memory_limit", "output_limit"):
        value = manifest.get(name)
        if value is None:
            errors.append(f"manifest field {name!r} missing")
            continue
        try:
            value = float(value) if name == "time_limit" else int(value)
        except (TypeError, ValueError):
            errors.append(f"manifest field {name!r} must be a number")
            continue
        if value <= 0:
            errors.append(f"manifest field {name!r} must be > 0")
        else:
            fields[name] = value

    statement_path = root / "statement.md"
    if statement_path.is_file():
        fields["statement"] = statement_path.read_text(encoding="utf-8")
    else:
        errors.append("statement.md missing")

    checker = _checker_config(manifest, root, errors) if manifest else None
    cases = _collect_cases(root, errors)

    goodness_label = manifest.get("goodness_label")
    if goodness_label is not None and (checker is None or checker.mode is not CheckerMode.external):
        errors.append("goodness_label present without an external checker")
        goodness_label = None

    if errors:
        raise PackageValidationError(errors)
    assert checker is not None
    try:
        return Problem(
            id=fields["id"],
            title=fields["title"],
            statement=fields["statement"],
            input_spec=str(manifest.get("input_spec", "")),
            output_spec=str(manifest.get("output_spec", "")),
            time_limit=fields["time_limit"],
            memory_limit=fields["memory_limit"],
            output_limit=fields["output_limit"],
            checker=checker,
            test_cases=tuple(cases),
            goodness_label=goodness_label,
            published=bool(manifest.get("published", True)),
        )
    except DomainError as exc:
        raise PackageValidationError([str(exc)]) from exc


def build_checker_artifact(package_root: str | Path, checker_ref: str, dest_dir: str | Path) -> Path:
    """Build (or copy) the external checker into dest_dir; returns artifact path.

    C/C++ sources are compiled; scripts are copied with the exec bit set.
    """
    src = Path(package_root) / "checker" / checker_ref
    if not src.is_file():
        raise FileNotFoundError(f"checker source {src} missing")
    dest_dir = Path(dest_dir)
    dest_dir.mkdir(parents=True, exist_ok=True)

    suffix = src.suffix.lower()
    if suffix in (".c", ".cc", ".cpp", ".cxx"):
        compiler = "cc" if suffix == ".c" else "c++"
        artifact = dest_dir / src.stem
        proc = subprocess.run(
            [compiler, "-O2", str(src), "-o", str(artifact), "-lm"],
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
            timeout=CHECKER_BUILD_TIMEOUT,
        )
        if proc.returncode != 0:
            raise RuntimeError(
                f"checker build failed:\n{proc.stdout.decode(errors='replace')}"
            )
    else:
        artifact = dest_dir / src.name
        shutil.copyfile(src, artifact)
    artifact.chmod(0o755)
    return artifact
