import numpy as np
import pytest

from beamguide import simulate


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def scene0():
    """Seed-0 anechoic scene: 2 sources, 4 mics, 0 dB SIR, 4 s at 8 kHz."""
    return simulate.render_scene(simulate.default_scene(seed=0))


def random_psd(rng, c, rank=None):
    rank = rank or c + 2
    a = rng.standard_normal((c, rank)) + 1j * rng.standard_normal((c, rank))
    return a @ a.conj().T / rank


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# -- acceptance reporting -----------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and rep.passed):
        return
    number, title = marker.args
    passed, _ = _CRITERIA.get(number, (True, title))
    _CRITERIA[number] = (passed and rep.passed, title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, title = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {title}")
