import time

import numpy as np
import pytest

from nanocasimir import electrostatics as E
from nanocasimir import geometry as G
from nanocasimir import materials as M
from nanocasimir import pfa

SWEEP = np.arange(221) * 5e-9  # 0 .. 1100 nm, 220 intervals
SI = (M.PAPER_SILICON, M.PAPER_SILICON)
PC = (M.PERFECT_CONDUCTOR, M.PERFECT_CONDUCTOR)

_RESULTS = []


def report(number, ok, detail):
    """Record one acceptance line; printed in the terminal summary."""
    _RESULTS.append((number, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_RESULTS, key=lambda r: (r[0], r[2])):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def tcell():
    return G.make_t_cell()


@pytest.fixture(scope="session")
def silicon_curve(tcell):
    t0 = time.perf_counter()
    curve = pfa.pfa_curve(tcell, SWEEP, SI)
    return curve, time.perf_counter() - t0


@pytest.fixture(scope="session")
def pc_curve(tcell):
    return pfa.pfa_curve(tcell, SWEEP, PC)


@pytest.fixture(scope="session")
def tcell_beta(tcell):
    """Electrostatic beta(d) of the default cell at the production spacing."""
    d = np.arange(52, 99) * 10e-9  # 520 .. 980 nm
    return E.beta_of_d(tcell, d, spacing=5e-9, workers=4)
