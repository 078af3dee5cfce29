import time
from contextlib import contextmanager

import pytest

from axisym_fbp.solver import bundled_configs, minimize

# criterion number -> (title, passed, seconds, detail); filled by test_acceptance
CRITERIA: dict[int, tuple[str, bool, float, str]] = {}


@pytest.fixture(scope="session")
def tube_bubble_solves():
    """tube_bubble at 128 and 256 nodes per side, solved once per session.

    Maps n -> (config, result); "seconds" holds the combined solve time.
    """
    base = bundled_configs()["tube_bubble"]
    t0 = time.perf_counter()
    out = {n: (base.with_resolution(n), minimize(base.with_resolution(n))) for n in (128, 256)}
    out["seconds"] = time.perf_counter() - t0
    return out


@pytest.fixture
def criterion():
    """Context manager that times one acceptance criterion and records the outcome."""

    @contextmanager
    def run(number, title, budget, extra_seconds=0.0):
        notes = []
        t0 = time.perf_counter()
        try:
            yield notes
        except BaseException as exc:
            CRITERIA[number] = (title, False, time.perf_counter() - t0 + extra_seconds,
                                f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
            raise
        elapsed = time.perf_counter() - t0 + extra_seconds
        ok = elapsed < budget
        detail = "; ".join(notes) if ok else f"runtime {elapsed:.1f} s over the {budget:g} s budget"
        CRITERIA[number] = (title, ok, elapsed, detail)
        assert ok, detail

    return run


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        title, ok, secs, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'} ({secs:.1f} s) {title}: {detail}")
