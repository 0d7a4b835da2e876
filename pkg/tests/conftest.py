import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lklab.loewner import load_flow
from lklab.paths import PiecewisePath

settings.register_profile(
    "lk", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("lk")

SHIPPED = ("koebe", "quadratic", "mixed")


def shipped_flow(name):
    from lklab.cli import resolve_flow

    return load_flow(resolve_flow(name))


@pytest.fixture(scope="session", params=SHIPPED)
def flow(request):
    return shipped_flow(request.param)


@pytest.fixture(scope="session")
def ward_mc():
    """The expensive GUE run, shared by every test that needs it."""
    import time

    from lklab.freeprob import gue_sample_cov

    t0 = time.perf_counter()
    out = gue_sample_cov(300, 2000, 6, seed=42)
    out.meta["elapsed"] = time.perf_counter() - t0
    return out


def random_path(rng, T, nknots=5, scale=1.0, real=False):
    inner = np.sort(rng.uniform(0.0, T, nknots - 2))
    knots = np.concatenate([[0.0], inner, [T]])
    vals = rng.normal(size=nknots) * scale
    if not real:
        vals = vals + 1j * rng.normal(size=nknots) * scale
    vals[0] = 0.0
    return PiecewisePath(knots, vals)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def accept():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} {name} {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
