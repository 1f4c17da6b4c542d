import numpy as np
import pytest
from hypothesis import strategies as st

from placesim import _pykernels
from placesim.cluster import make_scenario
from placesim.kernels import compiled_available

BACKENDS = [pytest.param(_pykernels, id="python")]
if compiled_available():
    from placesim import _ckernels

    BACKENDS.append(pytest.param(_ckernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def random_scenario(rng, n, m, cap=(20, 20), demand=(1, 10), edge_p=0.3):
    dem = rng.integers(demand[0], demand[1] + 1, size=(n, 2)).tolist()
    edges = [(a, b, int(rng.integers(1, 10)))
             for a in range(n) for b in range(a + 1, n) if rng.random() < edge_p]
    return make_scenario("rand", [cap] * m, dem, edges)


@st.composite
def scenario_and_assignment(draw, max_containers=10, max_machines=5):
    """A random small scenario and an arbitrary (possibly overloaded) assignment."""
    n = draw(st.integers(1, max_containers))
    m = draw(st.integers(1, max_machines))
    caps = draw(st.lists(st.tuples(st.integers(10, 30), st.integers(10, 30)), min_size=m, max_size=m))
    dem = draw(st.lists(st.tuples(st.integers(1, 10), st.integers(1, 10)), min_size=n, max_size=n))
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    wts = draw(st.lists(st.integers(0, 9), min_size=len(pairs), max_size=len(pairs)))
    edges = [(a, b, w) for (a, b), keep, w in zip(pairs, mask, wts) if keep]
    assign = draw(st.lists(st.integers(0, m - 1), min_size=n, max_size=n))
    return make_scenario("hyp", caps, dem, edges), np.array(assign, dtype=np.int64)


# acceptance criteria outcomes, reported at the end of the session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")
