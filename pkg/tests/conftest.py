import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the summary is printed at the end of the run."""
    def record(name: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((name, bool(passed), detail))
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_DESK_RUNS: dict = {}


@pytest.fixture(scope="session")
def desk_runs():
    """Desk-scale reference runs (N=4096, 200 trials), computed once per session.

    ``desk_runs(bits)`` returns (config, sim table, se table).
    """
    from gturbo import harness

    def get(bits):
        if bits not in _DESK_RUNS:
            cfg = harness.ExperimentConfig(n=4096, alpha=0.7, snr_db=50.0, bits=bits, rho=0.4,
                                           varsigma_x=2.5, trials=200, t_max=50)
            sim = harness.simulation_table(cfg, harness.run_simulation(cfg))
            se, _ = harness.se_table(cfg)
            _DESK_RUNS[bits] = (cfg, sim, se)
        return _DESK_RUNS[bits]
    return get
