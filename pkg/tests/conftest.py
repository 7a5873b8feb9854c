import re

import pytest

_CRITERIA = {}


@pytest.fixture
def criterion():
    """Record the outcome of an acceptance check under its criterion id."""

    def record(cid, ok, detail=""):
        prev = _CRITERIA.get(cid)
        if prev is not None:
            ok = ok and prev[0]
            detail = f"{prev[1]}; {detail}" if detail else prev[1]
        _CRITERIA[cid] = (bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: (int(re.match(r"\d+", c).group()), c)):
        ok, detail = _CRITERIA[cid]
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {detail}")
