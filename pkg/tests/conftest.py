import time

import numpy as np
import pytest

from sharedsteer.authority import SwitchingConfig
from sharedsteer.sim import ScenarioConfig, run_scenario
from sharedsteer.vehicle import VehicleParams, build_continuous, discretize

LAMBDA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
OA_GRID = (0.0, 0.25, 0.5, 0.75)


@pytest.fixture(scope="session")
def default_params():
    return VehicleParams()


@pytest.fixture(scope="session")
def default_dyn(default_params):
    return discretize(build_continuous(default_params), 0.02)


def _sweep(kind, grid, driver_kind):
    t0 = time.perf_counter()
    results = {}
    for lam_a in grid:
        cfg = ScenarioConfig(kind=kind, lambda_a=lam_a, driver_kind=driver_kind)
        results[lam_a] = run_scenario(cfg)
    return results, time.perf_counter() - t0


@pytest.fixture(scope="session")
def pf_sweep_adaptive():
    """Path-following runs over the authority grid; (results, elapsed seconds)."""
    return _sweep("path_following", LAMBDA_GRID, "adaptive")


@pytest.fixture(scope="session")
def pf_sweep_conventional():
    return _sweep("path_following", LAMBDA_GRID, "conventional")


@pytest.fixture(scope="session")
def oa_sweep_adaptive():
    return _sweep("obstacle_avoidance", OA_GRID, "adaptive")


@pytest.fixture(scope="session")
def oa_conventional_half():
    cfg = ScenarioConfig(kind="obstacle_avoidance", lambda_a=0.5, driver_kind="conventional")
    return run_scenario(cfg)


@pytest.fixture(scope="session")
def combined_run():
    """Combined scenario with the default switching detector; (cfg, trace, metrics)."""
    cfg = ScenarioConfig(kind="combined", switching=SwitchingConfig())
    trace, metrics = run_scenario(cfg)
    return cfg, trace, metrics


def rms(values):
    return float(np.sqrt(np.mean(np.square(values))))
