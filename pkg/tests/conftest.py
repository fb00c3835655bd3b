import sys
from pathlib import Path

import pytest

from sirwave.bracket import build_bracket
from sirwave.grid import Grid
from sirwave.iteration import build_kernels, cross_iterate
from sirwave.model import parameters_from_mapping, parse_key_values, wave_frame

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"


def load_config(name):
    return parameters_from_mapping(parse_key_values((CONFIGS / name).read_text()))


@pytest.fixture(scope="session")
def demo():
    p, M = load_config("demo.cfg")
    return p, wave_frame(p, M)


@pytest.fixture(scope="session")
def reference():
    p, M = load_config("reference.cfg")
    return p, M


@pytest.fixture(scope="session")
def wave_grid():
    return Grid(-160.0, 320.0 / 4095, 4096)


@pytest.fixture(scope="session")
def demo_kernels(demo, wave_grid):
    p, wp = demo
    return build_kernels(p, wp, wave_grid)


@pytest.fixture(scope="session")
def demo_bracket(demo, wave_grid, demo_kernels):
    p, wp = demo
    return build_bracket(p, wp, wave_grid, demo_kernels)


@pytest.fixture(scope="session")
def demo_wave(demo, demo_kernels, demo_bracket):
    p, wp = demo
    return cross_iterate(demo_bracket.upper, demo_bracket.lower, demo_kernels, p, wp, tol=1e-10)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
