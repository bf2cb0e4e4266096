import sys
from pathlib import Path

import numpy as np
import pytest

from pandenoise.synthetic import lowrank_scene

# fixture generators in scripts/ double as test oracles
sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "scripts"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def scene_64():
    """64x64x20 rank-4 cube with its band-mean PAN."""
    return lowrank_scene(64, 64, 20, rank=4, seed=0)


_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """``with criterion(n, title) as note:`` records one PASS/FAIL line for criterion ``n``."""
    from contextlib import contextmanager

    results = request.config.stash[_ACCEPTANCE]

    @contextmanager
    def _run(number, title):
        details = []
        try:
            yield details.append
        except BaseException:
            results[number] = ("FAIL", title, details)
            raise
        results[number] = ("PASS", title, details)

    return _run


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        status, title, details = results[n]
        extra = f"  [{'; '.join(details)}]" if details else ""
        terminalreporter.write_line(f"criterion {n}: {status}  {title}{extra}")
