import numpy as np
import pytest

from boltzclass.core import Prng
from boltzclass.data import Dataset
from boltzclass.rbm import Rbm

# Original class frequencies per dataset, paper class labels 1..K.
EGGS_COUNTS = {"1": 500, "2": 83, "3": 286, "4": 103, "5": 835, "6": 435, "7": 254,
               "8": 379, "9": 9816}
LARVAE_COUNTS = {"1": 246, "2": 1352}
PROTOZOA_COUNTS = {"1": 868, "2": 659, "3": 1783, "4": 1931, "5": 3297, "6": 309, "7": 28525}


def count_fixture(counts: dict, dim: int = 4, seed: int = 0) -> Dataset:
    """Dataset with the given class counts and small random features."""
    rng = np.random.default_rng(seed)
    names = list(counts)
    y = np.concatenate([np.full(n, i) for i, n in enumerate(counts.values())])
    return Dataset(rng.uniform(size=(y.size, dim)), y, names)


def random_rbm(m: int, n: int, seed: int, scale: float = 1.0) -> Rbm:
    rng = np.random.default_rng(seed)
    return Rbm(rng.normal(0, scale, (m, n)), rng.normal(0, scale, m), rng.normal(0, scale, n))


@pytest.fixture
def rng():
    return Prng(1234)


# --- acceptance reporting ---------------------------------------------------------------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        number, title = marker.args
        _ACCEPTANCE[number] = (title, rep.passed, getattr(item, "_acceptance_detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        suffix = f" -- {detail}" if detail else ""
        terminalreporter.write_line(f"[{status}] {number}. {title}{suffix}")
