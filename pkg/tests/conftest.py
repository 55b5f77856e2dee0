import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def record(criterion: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def battery():
    """The seed-42 phantom battery and its single-worker slice results."""
    from fatseg.phantom import suite
    from fatseg.pipeline import PipelineConfig, run_slices

    cases = suite(42, 15.0)
    cfg = PipelineConfig()
    methods = ("ransac", "mad", "loop", "fusion")
    results = [run_slices(vol, cfg, 1, methods) for vol, _ in cases]
    return {"cases": cases, "config": cfg, "methods": methods, "results": results}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
