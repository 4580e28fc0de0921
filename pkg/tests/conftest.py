import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from schrobpx.bpx import build_ladder, bpx_preconditioner
from schrobpx.fem import assemble, manufactured
from schrobpx.mesh import build_hierarchy

settings.register_profile("ci", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class Level:
    def __init__(self, d, J, solution=None):
        self.hierarchy = build_hierarchy(d, 2, J)
        self.mesh = self.hierarchy[J]
        self.exact = manufactured(solution or ("trig_log" if d == 2 else "sine"), d)
        self.problem = assemble(self.exact, self.mesh)
        self.ladder = build_ladder(self.hierarchy)
        self.fp = bpx_preconditioner(self.hierarchy, ladder=self.ladder)
        self.A, self.b = self.problem.A, self.problem.b


@pytest.fixture(scope="session")
def level_factory():
    cache = {}

    def make(d, J, solution=None):
        key = (d, J, solution)
        if key not in cache:
            cache[key] = Level(d, J, solution)
        return cache[key]

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
