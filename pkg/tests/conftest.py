import numpy as np
import pytest
from hypothesis import strategies as st

from aifcai import _accel
from aifcai.model import build_pomdp


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run a test once per kernel backend."""
    if request.param == "numba" and not _accel.HAS_NUMBA:
        pytest.skip("numba not installed")
    monkeypatch.setattr(_accel, "USE_NUMBA", request.param == "numba")
    return request.param


@st.composite
def simplex(draw, n=None, min_n=2, max_n=6, allow_zeros=False):
    """A probability vector; entries bounded away from 0 unless ``allow_zeros``."""
    if n is None:
        n = draw(st.integers(min_n, max_n))
    lo = 0.0 if allow_zeros else 1e-3
    w = draw(st.lists(st.floats(lo, 1.0), min_size=n, max_size=n))
    w = np.array(w)
    if w.sum() == 0:
        w[0] = 1.0
    return w / w.sum()


@st.composite
def seeds(draw):
    return draw(st.integers(0, 2**31 - 1))


def random_model(rng, S=3, A=2, O=3, H=2, mdp=False):
    T = rng.dirichlet(np.ones(S), size=(A, S))
    Om = np.eye(S) if mdp else rng.dirichlet(np.ones(O), size=S)
    return build_pomdp(T, Om, rng.dirichlet(np.ones(S)), H)


def swap_model(H=2):
    T = np.array([[[0.0, 1.0], [1.0, 0.0]]])
    return build_pomdp(T, np.eye(2), [1.0, 0.0], H)


# acceptance criteria report one line each at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
