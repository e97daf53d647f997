"""Shared pytest hooks: per-criterion summary lines for the acceptance suite."""

import re

_CRITERION = re.compile(r"test_acceptance\.py::(?:\w+::)?test_c(\d{2})")

ACCEPTANCE_LABELS = {
    1: "torus norm quadrature invariance",
    2: "cube enumeration, biorthogonality, calibrated membership",
    3: "partition of unity and lifting error",
    4: "factorized forward passes and complexity accounting",
    5: "constructive error decreases under budget doubling",
    6: "nested aggregation costs more than parallel",
    7: "projected GD matches least squares deterministically",
    8: "generalization trend and bound values",
    9: "scaling-fit exponent recovery",
    10: "gradients match central differences",
}

_RANK = {"PASS": 0, "SKIP": 1, "FAIL": 2}
_results: dict[int, str] = {}


def _record(num: int, status: str) -> None:
    current = _results.get(num, "PASS")
    if _RANK[status] > _RANK[current]:
        _results[num] = status
    else:
        _results.setdefault(num, current)


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if not match:
        return
    num = int(match.group(1))
    if report.failed:
        _record(num, "FAIL")
    elif report.skipped:
        _record(num, "SKIP")
    elif report.when == "call":
        _record(num, "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_results):
        label = ACCEPTANCE_LABELS.get(num, "?")
        terminalreporter.write_line(
            f"ACCEPTANCE {num:2d} ({label}): {_results[num]}"
        )
