import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from netdefense.graph import build_network, erdos_renyi  # noqa: E402


@pytest.fixture
def k2():
    return build_network([(0, 1)], 2)


@pytest.fixture
def path3():
    return build_network([(0, 1), (1, 2)], 3)


def random_graphs(count, n_range=(3, 8), c_range=(1.5, 3.0), seed=0, connected=False):
    rng = np.random.default_rng(seed)
    out = []
    attempt = 0
    while len(out) < count:
        attempt += 1
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        c = float(rng.uniform(*c_range))
        net = erdos_renyi(n, min(c, n - 1), seed=int(rng.integers(2**31)))
        if connected and not net.is_connected:
            continue
        out.append(net)
    return out


# criterion number -> (passed, detail), filled in by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
