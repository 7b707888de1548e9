import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from rbbm.bayes_net import NetParams  # noqa: E402
from rbbm.beam_model import BeamParams  # noqa: E402

settings.register_profile("rbbm", max_examples=60, deadline=None)
settings.load_profile("rbbm")

# reference generative configuration: p, sigma_m, pi3, pi4, z_max
REF_NET = NetParams(p=0.8, sigma_m=0.15, pi3=0.2, pi4=0.02, z_max=10.0)
REF_Z_STAR = 5.0


@pytest.fixture
def ref_net():
    return REF_NET


@pytest.fixture
def ref_beam():
    return REF_NET.beam_params(REF_Z_STAR)


@pytest.fixture
def occl_env_params():
    # p = 0.8 as the object-appearance probability, so p' follows from u = z*/z_max
    return NetParams(0.8, 0.15, 0.0, 0.0, 10.0).beam_params(REF_Z_STAR)


@pytest.fixture
def occl_params():
    # p = 0.8 applied directly as p' with the random and max-range weights off
    return BeamParams(sigma_m=0.15, p_prime=0.8, pi3=0.0, pi4=0.0, z_max=10.0)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number")
    config._criteria = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    n, title = mark.args
    ok = call.excinfo is None
    prev = item.config._criteria.get(n, (title, True))
    item.config._criteria[n] = (title, prev[1] and ok)


def pytest_terminal_summary(terminalreporter, config):
    if not config._criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(config._criteria):
        title, ok = config._criteria[n]
        terminalreporter.write_line(f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}")
