import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pevo.calculus import Transform
from pevo.config import preset_config
from pevo.grid import Grid
from pevo.pipeline import select_constants
from pevo.problems import make_preset

settings.register_profile("pevo", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("pevo")

L_DEFAULT = 10.0


@pytest.fixture(scope="session")
def kdv_cfg():
    return preset_config("kdv3")


@pytest.fixture(scope="session")
def kdv():
    return make_preset("kdv3")


@pytest.fixture(scope="session")
def grid128():
    return Grid(L_DEFAULT, 128)


@pytest.fixture(scope="session")
def grid256():
    return Grid(L_DEFAULT, 256)


@pytest.fixture(scope="session")
def sel128(kdv, grid128):
    return select_constants(kdv, grid128)


@pytest.fixture(scope="session")
def sel256(kdv, grid256):
    return select_constants(kdv, grid256)


@pytest.fixture(scope="session")
def transform128(kdv, sel128, grid128):
    return Transform(sel128.cfg, grid128, kdv.sign_ap)


@pytest.fixture(scope="session")
def transform256(kdv, sel256, grid256):
    return Transform(sel256.cfg, grid256, kdv.sign_ap)


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


# -- acceptance summary ---------------------------------------------------------------

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
