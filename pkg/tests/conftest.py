import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def k_small():
    from neuroslam.geometry import CameraIntrinsics

    return CameraIntrinsics(100.0, 100.0, 50.0, 50.0, 0.5, 101, 101)


@pytest.fixture(scope="session")
def k_render():
    from neuroslam.pipeline.synth import default_intrinsics

    return default_intrinsics()


@pytest.fixture(scope="session")
def texture():
    from neuroslam.pipeline.synth import PlaneTexture

    return PlaneTexture(0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
