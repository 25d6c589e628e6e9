import numpy as np
import pytest

from llmsocial import core
from llmsocial.core import EventLog, append_event, make_event


def build_log(*events):
    """Events as ``(kind, ts, payload_dict)`` tuples."""
    log = EventLog()
    for kind, ts, payload in events:
        append_event(log, make_event(kind, ts, **payload))
    return log


def agents(*ids, ts=0, backstory=None):
    return [(core.AGENT_CREATED, ts, {"agent_id": a, "display_name": a, "backstory": backstory}) for a in ids]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one verdict line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
