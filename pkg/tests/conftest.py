import pytest

from dualifs.maps import IFS

THREE_MAPS = ["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"]

# filled by the acceptance tests, printed once at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def three():
    """Two maps fixing 0 with different curvature, one fixing 1."""
    return IFS.from_sources(THREE_MAPS)


@pytest.fixture(scope="session")
def thirds():
    return IFS.from_sources(["x/3", "x/3 + 2/3"])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
