import itertools
import math
import os
import stat
import sys
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmbjudge.checker import (
    check_exact,
    check_external,
    check_float_tokens,
    parse_decimal,
    tokens_match,
)
from cmbjudge.domain import Verdict

TOUR_CHECKER = (
    Path(__file__).resolve().parents[1]
    / "src/cmbjudge/demo/problems/unit-tour/checker/tour_check.py"
)


def brute_force_token_compare(expected: str, actual: str, abs_tol: float, rel_tol: float) -> bool:
    """Independent oracle: straightforward per-token comparison."""
    e_toks = expected.split()
    a_toks = actual.split()
    if len(e_toks) != len(a_toks):
        return False
    for e, a in zip(e_toks, a_toks):
        ev, av = parse_decimal(e), parse_decimal(a)
        if ev is None or av is None:
            if e != a:
                return False
        elif av != ev and not (abs(av - ev) <= max(abs_tol, rel_tol * abs(ev))):
            return False
    return True


class TestCheckExact:
    def test_identity(self):
        assert check_exact(b"42\n", b"42\n").accepted

    def test_trailing_whitespace_canonicalized(self):
        assert check_exact(b"42\n", b"42 \n").accepted
        assert check_exact(b"a b\n\n\n", b"a b").accepted
        assert check_exact(b"a\r\n", b"a\n").accepted

    def test_differing_line_reported(self):
        out = check_exact(b"42\n", b"43\n")
        assert out.verdict is Verdict.wrong_answer
        assert out.detail.startswith("line 1")

    def test_missing_line(self):
        out = check_exact(b"1\n2\n", b"1\n")
        assert out.verdict is Verdict.wrong_answer
        assert "line 2" in out.detail

    def test_interior_whitespace_significant(self):
        assert check_exact(b"a b\n", b"a  b\n").verdict is Verdict.wrong_answer


class TestCheckFloatTokens:
    def test_within_rel_tol(self):
        assert check_float_tokens(b"3.141593", b"3.1415929", 0.0, 1e-6).accepted

    def test_outside_tol(self):
        out = check_float_tokens(b"1000", b"1001", 0.0, 1e-6)
        assert out.verdict is Verdict.wrong_answer

    def test_mixed_tokens(self):
        assert check_float_tokens(b"abc 1.0", b"abc 1.0000004", 0.0, 1e-6).accepted
        assert brute_force_token_compare("abc 1.0", "abc 1.0000004", 0.0, 1e-6)

    def test_token_count_mismatch_regardless_of_tolerance(self):
        out = check_float_tokens(b"1 2", b"1 2 3", 1e9, 1e9)
        assert out.verdict is Verdict.wrong_answer
        assert "token count" in out.detail

    def test_non_numeric_requires_string_equality(self):
        assert check_float_tokens(b"nan", b"nan", 0.0, 0.0).accepted
        assert check_float_tokens(b"inf", b"-inf", 1e9, 1e9).verdict is Verdict.wrong_answer

    def test_abs_tol_path(self):
        assert check_float_tokens(b"10", b"10.4", 0.5, 0.0).accepted
        assert check_float_tokens(b"10", b"10.6", 0.5, 0.0).verdict is Verdict.wrong_answer

    def test_negative_tolerance_rejected(self):
        with pytest.raises(ValueError):
            check_float_tokens(b"1", b"1", -1.0, 0.0)


def test_parse_decimal_is_strict():
    assert parse_decimal("3.25") == 3.25
    assert parse_decimal("-1e-3") == -0.001
    assert parse_decimal(".5") == 0.5
    assert parse_decimal("1_0") is None
    assert parse_decimal("inf") is None
    assert parse_decimal("nan") is None
    assert parse_decimal("0x10") is None
    assert parse_decimal("") is None


def test_overflowing_literals_compare_equal():
    assert tokens_match("1e400", "1e400", 0.0, 0.0)


_token = st.one_of(
    st.integers(-1000, 1000).map(str),
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False).map(repr),
    st.sampled_from(["abc", "x", "YES", "no", "1.2.3", "--"]),
)
_document = st.lists(_token, min_size=0, max_size=30).map(" ".join)


@given(_document)
@settings(max_examples=300, deadline=None)
def test_exact_accept_implies_float_accept(doc):
    # subsumption with perturbation-free pairs, arbitrary tolerances
    for abs_tol, rel_tol in [(0.0, 0.0), (1e-6, 0.0), (0.0, 1e-6), (0.5, 0.1)]:
        if check_exact(doc.encode(), doc.encode()).accepted:
            assert check_float_tokens(doc.encode(), doc.encode(), abs_tol, rel_tol).accepted


@given(_document, _document)
@settings(max_examples=300, deadline=None)
def test_float_checker_agrees_with_brute_force(expected, actual):
    for abs_tol, rel_tol in [(0.0, 0.0), (1e-9, 1e-9), (0.25, 0.0)]:
        got = check_float_tokens(expected.encode(), actual.encode(), abs_tol, rel_tol).accepted
        want = brute_force_token_compare(expected, actual, abs_tol, rel_tol)
        assert got == want


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=32), max_size=10))
@settings(max_examples=300, deadline=None)
def test_zero_tolerance_means_value_equality(values):
    doc = " ".join(repr(v) for v in values)
    reformatted = " ".join(f"{v:.17g}" for v in values)
    got = check_float_tokens(doc.encode(), reformatted.encode(), 0.0, 0.0).accepted
    want = all(float(repr(v)) == float(f"{v:.17g}") for v in values)
    assert got == want


class TestCheckExternal:
    def unit_square(self, tmp_path):
        inp = tmp_path / "in.txt"
        inp.write_text("4\n0 0\n0 1\n1 1\n1 0\n")
        exp = tmp_path / "exp.txt"
        exp.write_text("0 1 2 3\n")
        return inp, exp

    def test_valid_tour_accepted_with_goodness(self, tmp_path):
        inp, exp = self.unit_square(tmp_path)
        act = tmp_path / "act.txt"
        act.write_text("0 1 2 3\n")
        out = check_external(TOUR_CHECKER, inp, exp, act)
        assert out.verdict is Verdict.accepted
        assert out.goodness == pytest.approx(4.0, rel=1e-12)

        # brute force over all distinct tours of 4 cities confirms 4.0 is a
        # realizable tour length (and the minimum)
        coords = [(0, 0), (0, 1), (1, 1), (1, 0)]

        def tour_len(perm):
            return sum(
                math.dist(coords[a], coords[b])
                for a, b in zip(perm, perm[1:] + perm[:1])
            )

        lengths = {round(tour_len([0, *rest]), 9) for rest in itertools.permutations([1, 2, 3])}
        assert len(lengths) == 2  # 3 distinct tours, two lengths by symmetry
        assert 4.0 in lengths
        assert min(lengths) == 4.0

    def test_city_skipped_rejected(self, tmp_path):
        inp, exp = self.unit_square(tmp_path)
        act = tmp_path / "act.txt"
        act.write_text("0 1 2 2\n")
        out = check_external(TOUR_CHECKER, inp, exp, act)
        assert out.verdict is Verdict.wrong_answer

    def test_unexpected_exit_code_is_judge_error(self, tmp_path):
        checker = tmp_path / "weird.py"
        checker.write_text("#!/usr/bin/env python3\nimport sys; sys.exit(42)\n")
        checker.chmod(checker.stat().st_mode | stat.S_IXUSR)
        files = [tmp_path / n for n in ("i", "e", "a")]
        for f in files:
            f.write_text("")
        out = check_external(checker, *files)
        assert out.verdict is Verdict.judge_error
        assert "42" in out.detail

    def test_timeout_is_judge_error(self, tmp_path):
        checker = tmp_path / "slow.py"
        checker.write_text("#!/usr/bin/env python3\nimport time; time.sleep(60)\n")
        checker.chmod(0o755)
        files = [tmp_path / n for n in ("i", "e", "a")]
        for f in files:
            f.write_text("")
        out = check_external(checker, *files, timeout=0.3)
        assert out.verdict is Verdict.judge_error
        assert "timed out" in out.detail

    def test_missing_checker_is_judge_error(self, tmp_path):
        files = [tmp_path / n for n in ("i", "e", "a")]
        for f in files:
            f.write_text("")
        out = check_external(tmp_path / "nope", *files)
        assert out.verdict is Verdict.judge_error


def test_default_python_is_available_for_script_checkers():
    # script checkers run via shebang; the interpreter must resolve
    assert os.access(sys.executable, os.X_OK)
