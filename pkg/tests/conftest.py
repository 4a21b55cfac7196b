from __future__ import annotations

import os

# must precede the first numba import so thread-count tests can go above one
os.environ.setdefault("NUMBA_NUM_THREADS", "8")

import numpy as np  # noqa: E402
import pytest  # noqa: E402
from hypothesis import settings  # noqa: E402

from fene_closure import _kernels  # noqa: E402
from fene_closure.model import ModelParams  # noqa: E402
from fene_closure.rng import RngStream  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _single_thread():
    _kernels.set_threads(1)
    yield
    _kernels.set_threads(1)


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    prev = _kernels.backend_name()
    mod = _kernels.use(request.param)
    yield mod
    _kernels.use(prev)


@pytest.fixture
def fene():
    return ModelParams(b=49.0, we=1.0, eps=1.0, force_model="fene")


@pytest.fixture
def fenep():
    return ModelParams(b=49.0, we=1.0, eps=1.0, force_model="fenep")


@pytest.fixture
def rng():
    return RngStream(20240611)


def se_of_mean(values) -> float:
    v = np.asarray(values, dtype=float)
    return float(v.std(ddof=1) / np.sqrt(v.size))


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one summary line per acceptance criterion."""

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
