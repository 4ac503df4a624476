import pytest

from carnoteig import GroupSpec, build_form, build_grid

H1 = GroupSpec.heisenberg(1)

_FORMS = {}


def heis_form(n, s=0.5, **kw):
    """Cached H^1 form on (-1, 1)^3; forms are immutable so sharing is safe."""
    key = (n, s, tuple(sorted(kw.items())))
    if key not in _FORMS:
        grid, mask = build_grid(H1, (-1.0, 1.0), n)
        _FORMS[key] = build_form(grid, mask, s, **kw)
    return _FORMS[key]


@pytest.fixture(scope="session")
def h1():
    return H1


@pytest.fixture(scope="session")
def form8():
    return heis_form(8)


ACCEPTANCE = {}


@pytest.fixture
def record():
    def _record(criterion, passed, detail=""):
        line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE[criterion] = line
        print(line)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
