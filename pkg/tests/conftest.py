import json
from importlib import resources

import pytest
from hypothesis import HealthCheck, settings

from tmbench.tag_core import TagSystem

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def worked():
    """The three worked 2-tag examples: name -> (system, init)."""
    raw = json.loads(resources.files("tmbench.assets").joinpath("worked_examples.json").read_text("utf-8"))
    return {k: (TagSystem.build(v["m"], v["alphabet"], v["rules"]), tuple(v["init"])) for k, v in raw.items()}


@pytest.fixture(scope="session")
def divergent_system():
    rules = {"A": "C", "B": "E C E C", "C": "B B B A", "D": "D B B", "E": "A E E E"}
    return TagSystem.build(2, "ABCDE", {k: v.split() for k, v in rules.items()}), ("B", "D", "D")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS.values():
            terminalreporter.write_line(line)
