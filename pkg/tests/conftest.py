import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "roughpipe", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("roughpipe")


@pytest.fixture(scope="session")
def oracles():
    return json.loads((Path(__file__).parent / "oracles.json").read_text())


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        for line in ACCEPTANCE_LINES[k]:
            terminalreporter.write_line(line)
