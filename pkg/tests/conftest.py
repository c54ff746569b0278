import os

import pytest
from hypothesis import HealthCheck, settings

from qotml.linkmodel import Channel, ChannelPlan, Link, Payload, Scenario

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def make_plan(specs, cut=0):
    """Plan from (payload, THz, dBm) tuples; ``cut`` indexes into ``specs``."""
    return ChannelPlan(tuple(Channel.from_payload(p, f, pw, is_cut=(i == cut))
                             for i, (p, f, pw) in enumerate(specs)))


@pytest.fixture
def span80_link():
    return Link.homogeneous(1, 80.0, 0.2)


@pytest.fixture
def single35_plan():
    return make_plan([(Payload.QPSK_100G, 193.5, 0.0)])


@pytest.fixture
def comb5_plan():
    return make_plan([(Payload.QPSK_100G, 193.5 + 0.05 * k, 0.0) for k in range(-2, 3)], cut=2)


@pytest.fixture
def small_scenario(span80_link, comb5_plan):
    return Scenario(span80_link, comb5_plan, 0)


# one status line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


@pytest.fixture
def report_criterion():
    def record(criterion, passed, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
