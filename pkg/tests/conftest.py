import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # expose tests/oracles.py

from voicebridge.config import load_config
from voicebridge.robot_core.kinematics import (
    JointSpec,
    KinematicChain,
    load_chain,
)
from voicebridge.robot_core.simulator import load_scenario

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture(scope="session")
def default_chain():
    return load_chain(REPO_ROOT / "configs" / "chain.toml")


@pytest.fixture(scope="session")
def default_scenario():
    return load_scenario(REPO_ROOT / "configs" / "scenario.toml")


@pytest.fixture(scope="session")
def default_config():
    return load_config(REPO_ROOT / "config.toml")


def make_joint(
    name: str,
    axis,
    translation,
    limit=(-3.1, 3.1),
    velocity_limit: float = 1.5,
    acceleration_limit: float = 4.0,
) -> JointSpec:
    return JointSpec(
        name=name,
        axis=np.asarray(axis, dtype=float),
        translation=np.asarray(translation, dtype=float),
        rotation=np.array([1.0, 0.0, 0.0, 0.0]),
        limit_min=limit[0],
        limit_max=limit[1],
        velocity_limit=velocity_limit,
        acceleration_limit=acceleration_limit,
    )


@pytest.fixture
def single_joint_chain():
    """One z-axis joint at the origin carrying a shaft of length L along +x."""
    length = 0.5
    return KinematicChain(
        joints=(make_joint("j1", [0, 0, 1], [0, 0, 0]),),
        shaft_base=np.array([0.0, 0.0, 0.0]),
        shaft_tip=np.array([length, 0.0, 0.0]),
    )
