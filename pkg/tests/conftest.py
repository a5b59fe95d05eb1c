import sys

import pytest

from mapcomp.geometry import MapClass

from helpers import line, synth


@pytest.fixture
def three_lane():
    return synth(lane_count=3, seed=7, curvature=0.01, crossings=2, dash=1.0)


@pytest.fixture
def toy_elements():
    return [
        line("a", MapClass.BOUNDARY, [[-10, 5], [10, 5]]),
        line("b", MapClass.CENTERLINE, [[-10, 0], [0, 0.2], [10, 0]]),
        line("p", MapClass.PED_CROSSING, [[1, -3], [4, -3], [4, 3], [1, 3]]),
    ]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for msg in mod.RESULTS:
        terminalreporter.write_line(msg)
