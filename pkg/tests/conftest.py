from __future__ import annotations

import pytest

from ehrshare.crypto import DeterministicRng, KeyPair


@pytest.fixture
def rng():
    return DeterministicRng(1234)


@pytest.fixture
def keypair(rng):
    return KeyPair.generate(rng)


ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    ACCEPTANCE_RESULTS.append((name, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{outcome}  {name}")
