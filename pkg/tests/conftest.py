import time

import pytest

from qdcavity import scenarios
from qdcavity.dynamics import SystemConfig
from qdcavity.scenarios import ScenarioSpec


class RunCache:
    """Dissipative scenario results shared across test modules, with wall times."""

    def __init__(self):
        self._runs = {}

    def get(self, pump, kappa, theta=0.0):
        key = (float(pump), float(kappa), float(theta))
        if key not in self._runs:
            spec = ScenarioSpec("dissipative", SystemConfig(pump=pump, kappa=kappa, theta=theta))
            start = time.perf_counter()
            result = scenarios.run_scenario(spec, with_steady_state=True)
            self._runs[key] = (result, time.perf_counter() - start)
        return self._runs[key]

    def result(self, pump, kappa, theta=0.0):
        return self.get(pump, kappa, theta)[0]


@pytest.fixture(scope="session")
def dissipative_runs():
    return RunCache()


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
