"""Shared fixtures: velocity grids, collision plans, analytic Gaussians."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from boltz_sldg.collision import build_collision_plan
from boltz_sldg.velocity import VelocityGrid

settings.register_profile(
    "suite",
    derandomize=True,
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20250822)


@pytest.fixture(scope="session")
def grid16() -> VelocityGrid:
    return VelocityGrid(7.0, 16)


@pytest.fixture(scope="session")
def grid32() -> VelocityGrid:
    return VelocityGrid(7.0, 32)


@pytest.fixture(scope="session")
def plan16(grid16):
    return build_collision_plan(grid16)


@pytest.fixture(scope="session")
def plan32(grid32):
    return build_collision_plan(grid32)


@pytest.fixture(scope="session")
def gauss():
    """Analytic Maxwellian slice rho/(2 pi T) exp(-|v - u|^2 / (2T))."""

    def make(grid: VelocityGrid, rho: float, u1: float, u2: float, temp: float):
        vx = grid.points[:, None]
        vy = grid.points[None, :]
        w2 = (vx - u1) ** 2 + (vy - u2) ** 2
        return rho / (2.0 * np.pi * temp) * np.exp(-w2 / (2.0 * temp))

    return make
