import pytest

_RESULTS = pytest.StashKey[dict]()
N_CRITERIA = 8


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def acceptance(request):
    """Record one criterion: ``acceptance(n, passed, detail)``."""
    results = request.config.stash[_RESULTS]

    def record(n: int, passed: bool, detail: str):
        results[n] = (bool(passed), detail)
        print(f"ACCEPTANCE {n}: {'PASS' if passed else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, N_CRITERIA + 1):
        if n in results:
            ok, detail = results[n]
            terminalreporter.write_line(f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} {detail}")
        else:
            terminalreporter.write_line(f"ACCEPTANCE {n}: FAIL (not run or errored)")
