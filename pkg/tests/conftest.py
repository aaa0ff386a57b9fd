"""Collects acceptance outcomes and prints one line per criterion at the end."""

from __future__ import annotations

from collections import defaultdict

_titles: dict[int, str] = {}
_outcomes: dict[int, list[str]] = defaultdict(list)
_criterion_of: dict[str, int] = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _titles.setdefault(number, title)
            _criterion_of[item.nodeid] = number


def pytest_runtest_logreport(report):
    number = _criterion_of.get(report.nodeid)
    if number is None:
        return
    if report.when == "call" or report.outcome in ("failed", "skipped"):
        _outcomes[number].append("skipped" if report.skipped else report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _titles:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_titles):
        got = _outcomes.get(number, [])
        if not got:
            verdict = "NOT RUN"
        elif "failed" in got:
            verdict = "FAIL"
        elif all(o == "skipped" for o in got):
            verdict = "SKIPPED"
        else:
            verdict = "PASS"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {_titles[number]}  ({len(got)} checks)")
