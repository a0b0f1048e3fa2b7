import numpy as np
import pytest

from springpair.potentials import LJCluster, V1Surface, V2Surface


@pytest.fixture
def rng():
    return np.random.default_rng(20241015)


@pytest.fixture
def v1():
    return V1Surface()


@pytest.fixture
def v2():
    return V2Surface()


@pytest.fixture
def lj7():
    return LJCluster(7)


# --- acceptance reporting: one line per criterion in the terminal summary ---

_CRITERIA = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _CRITERIA.append((props["criterion"], report.outcome, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, outcome, detail in sorted(_CRITERIA, key=lambda c: str(c[0]).zfill(4)):
        verdict = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"criterion {number}: {verdict}  {detail}")


@pytest.fixture
def criterion(request, record_property):
    """Tag a test with its criterion number; call ``.detail(text)`` to attach a summary."""
    marker = request.node.get_closest_marker("criterion")
    record_property("criterion", marker.args[0] if marker else request.node.name)

    class _Detail:
        def detail(self, text):
            record_property("detail", text)
            print(f"criterion {marker.args[0] if marker else '?'}: {text}")

    return _Detail()
