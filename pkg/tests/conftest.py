"""Shared fixtures.  The `gate` fixture records acceptance verdicts and
replays them after the run, where pytest's capture cannot swallow them."""

import pytest

_gate_lines = []


@pytest.fixture
def gate():
    def _report(cid: int, ok: bool, detail: str):
        line = f"[criterion {cid}] {'PASS' if ok else 'FAIL'}: {detail}"
        _gate_lines.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _gate_lines:
        terminalreporter.section("acceptance gate")
        for line in sorted(_gate_lines):
            terminalreporter.write_line(line)
