import numpy as np
import pytest

from varexp import _kernels
from varexp.mesh import Rect, build_mesh

BACKENDS = _kernels.available_backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    prev = _kernels.set_backend(request.param)
    yield request.param
    _kernels.set_backend(prev)


@pytest.fixture(scope="session")
def square():
    return Rect(-1.0, 1.0, -1.0, 1.0)


@pytest.fixture(scope="session")
def mesh6(square):
    return build_mesh(square, 6, 6)


@pytest.fixture(scope="session")
def mesh16(square):
    return build_mesh(square, 16, 16)


def random_interior(mesh, rng, scale=1.0):
    v = scale * rng.standard_normal(mesh.n_vertices)
    v[mesh.boundary_mask] = 0.0
    return v


# acceptance criteria: one PASS/FAIL line each in the terminal summary
_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    n, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    ok = rep.passed and _CRITERIA.get(n, (None, True))[1]
    if rep.skipped:
        ok = False
        detail = detail or "skipped"
    _CRITERIA[n] = (title, ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
