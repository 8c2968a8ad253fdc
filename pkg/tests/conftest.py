import numpy as np
import pytest

from qrx import constellation_for_mean_photon


@pytest.fixture
def qam16():
    """16-QAM at a mean photon number of 2."""
    return constellation_for_mean_photon(4, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# -- acceptance reporting ----------------------------------------------------------

_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request, capsys):
    """``verdict(n, ok, detail)`` prints one PASS/FAIL line and records it for the summary."""
    lines = request.config.stash[_VERDICTS]

    def emit(n, ok, detail, label=None):
        line = f"criterion {n:>2}: {label or ('PASS' if ok else 'FAIL')}  {detail}"
        lines.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
