import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def sim_records():
    from thermaug.labeling import label_records
    from thermaug.sim import SimConfig, generate_rico_like

    return label_records(generate_rico_like(SimConfig(seed=1)))


@pytest.fixture(scope="session")
def sim_split(sim_records):
    from thermaug.dataio import split_by_phase

    return split_by_phase(sim_records, 0.2, 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        title, ok, detail = mod.RESULTS[n]
        terminalreporter.line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
