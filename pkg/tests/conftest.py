import numpy as np
import pytest

from anisoframe.dilation import validate_expansive

MATRICES = {
    "scalar2": [[2.0]],
    "diag23": [[2.0, 0.0], [0.0, 3.0]],
    "swap": [[0.0, 2.0], [1.0, 0.0]],
}


@pytest.fixture(params=sorted(MATRICES))
def matrix(request):
    return validate_expansive(np.array(MATRICES[request.param]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one verdict line per acceptance criterion; printed immediately
    and again in the terminal summary."""
    store = request.config.stash.setdefault(ACCEPTANCE_KEY, {})
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        store[number] = line
        with capman.global_and_fixture_disabled():
            print("\n" + line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(ACCEPTANCE_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(store):
        terminalreporter.write_line(store[n])
