"""Every acceptance criterion at its stated tolerance, one status line each.

Run standalone (``python tests/test_acceptance.py``) or under pytest, where the
lines are also collected into the terminal summary.
"""
import filecmp
import sys

import pytest

from symplab import io
from symplab.acceptance import CRITERIA, run_criterion
from symplab.cli import EXIT_OK, main

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = {}


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA], ids=lambda n: f"criterion{n:02d}")
def test_criterion(number):
    result = run_criterion(number)
    line = result.line()
    ACCEPTANCE_LINES[number] = line
    print(line)
    for c in result.checks:
        if not c.passed:
            print(f"    failed check {c.name}: expected {c.expected}, observed {c.observed}, tol {c.tolerance}")
    assert result.error is None, result.error
    assert result.passed, line


def test_verify_rerun_is_byte_identical(tmp_path, capsys):
    for name in ("first", "second"):
        assert main(["verify", "--only", "normal-form", "--only", "gates-topology",
                     "--output", str(tmp_path / name)]) == EXIT_OK
    a, b = (tmp_path / n / "verify" for n in ("first", "second"))
    assert filecmp.cmp(a / io.MANIFEST, b / io.MANIFEST, shallow=False)
    assert filecmp.cmp(a / "results.jsonl", b / "results.jsonl", shallow=False)


if __name__ == "__main__":
    failed = 0
    for number, *_ in CRITERIA:
        r = run_criterion(number)
        print(r.line())
        failed += not r.passed
    sys.exit(1 if failed else 0)
