"""Shared fixtures: presets and cached solves reused across test modules."""

import numpy as np
import pytest

from memscat import assemble_system, preset_scene, solve


@pytest.fixture(scope="session")
def far_scene():
    return preset_scene("far")


@pytest.fixture(scope="session")
def moderate_scene():
    return preset_scene("moderate")


@pytest.fixture(scope="session")
def close_scene():
    return preset_scene("close")


@pytest.fixture(scope="session")
def touching_scene():
    return preset_scene("touching")


@pytest.fixture(scope="session")
def far_solution(far_scene):
    op, rhs = assemble_system(far_scene, 12)
    return solve(op, rhs)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260815)
