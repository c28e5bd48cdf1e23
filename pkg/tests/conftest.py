import numpy as np
import pytest

from ropelab import _backend, _fallback

try:
    from ropelab import _kernels
except ImportError:
    _kernels = None

KERNEL_NAMES = ("splitmix64_fill", "splitmix64_raw", "rope_rotate", "causal_softmax_entropy")


@pytest.fixture(params=["cython", "python"])
def backend(request, monkeypatch):
    """Run the test once per kernel implementation."""
    if request.param == "cython":
        if _kernels is None:
            pytest.skip("compiled kernels not built")
        impl = _kernels
    else:
        impl = _fallback
    for name in KERNEL_NAMES:
        monkeypatch.setattr(_backend, name, getattr(impl, name))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


ACCEPTANCE_RESULTS = []


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion; the outcome is printed at session end."""
    entry = {"name": request.node.name, "detail": ""}
    ACCEPTANCE_RESULTS.append(entry)

    def note(detail):
        entry["detail"] = detail

    yield note
    rep = getattr(request.node, "rep_call", None)
    entry["passed"] = bool(rep and rep.passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for entry in ACCEPTANCE_RESULTS:
        status = "PASS" if entry.get("passed") else "FAIL"
        line = f"{status}  {entry['name']}"
        if entry["detail"]:
            line += f"  ({entry['detail']})"
        terminalreporter.write_line(line)
