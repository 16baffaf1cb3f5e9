import numpy as np
import pytest

from psum_embed.norms import make_lq_norm

SHIPPED_SPECS = [(2.0, None), (3.0, None), (1.5, None), (1.5, "weighted")]


def shipped_oracles(n):
    out = []
    for q, w in SHIPPED_SPECS:
        weights = None if w is None else np.linspace(1.0, 2.5, n)
        out.append(make_lq_norm(n, q, weights))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
