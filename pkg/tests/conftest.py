import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def walsh_oracle(m):
    """Dense kernel from the bit-pairing definition, one entry at a time."""
    n = 1 << m
    k = np.empty((n, n), dtype=np.int64)
    for u in range(n):
        for x in range(n):
            e = sum(((x >> i) & 1) * ((u >> (m - 1 - i)) & 1) for i in range(m))
            k[u, x] = -1 if e % 2 else 1
    return k


def pytest_configure(config):
    config._criteria = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; call before asserting so failures are reported too."""
    lines = request.config._criteria

    def record(label: str, ok: bool, detail: str = "") -> bool:
        lines.append(f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else ""))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    if config._criteria:
        terminalreporter.section("acceptance criteria")
        for line in config._criteria:
            terminalreporter.write_line(line)
