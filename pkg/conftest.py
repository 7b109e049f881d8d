"""
Shared pytest fixtures: small cameras, seeded randomness and rendered scenes.
"""
import numpy as np
import pytest

from rigidflow.models import Intrinsics, ObjectSpec, PlaneSpec, SceneConfig, StereoRig
from rigidflow.services import synth
from rigidflow.services.geometry import pose_from_6dof


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def small_k():
    """8×8 camera with the principal point at the image center."""
    return Intrinsics(8.0, 8.0, 3.5, 3.5, 8, 8)


@pytest.fixture
def small_rig(small_k):
    return StereoRig(small_k, 0.5)


def wall_config(camera_motion=(0.1, -0.05, -0.8, 0.0, 0.0, 0.0), width=64, height=32):
    """A single fronto-parallel wall at 20 m; depth is affine in the pixel grid."""
    k = synth.default_intrinsics(width, height)
    return SceneConfig(
        intrinsics=k,
        baseline=0.54,
        camera_motion=pose_from_6dof(camera_motion),
        planes=[PlaneSpec(np.array([0.0, 0.0, 1.0]), 20.0, texture_seed=1)],
        texture_frequency=0.5,
        seed=3,
    )


def street_config(object_motion=(2.5, 0.0, 0.0, 0.0, 0.0, 0.0), seed=4):
    """128×64 wall + ground plane with one rectangle at 8 m."""
    k = synth.default_intrinsics(128, 64)
    return SceneConfig(
        intrinsics=k,
        baseline=0.54,
        camera_motion=pose_from_6dof([0.05, 0.0, -1.0, 0.0, 0.01, 0.0]),
        planes=[
            PlaneSpec(np.array([0.0, 0.0, 1.0]), 20.0, texture_seed=1),
            PlaneSpec(np.array([0.0, 1.0, 0.0]), 1.6, texture_seed=2),
        ],
        objects=[ObjectSpec((40, 12, 76, 40), 8.0, pose_from_6dof(object_motion), texture_seed=10)],
        texture_frequency=0.6,
        seed=seed,
    )


@pytest.fixture(scope='session')
def wall_sample():
    return synth.render(wall_config())


@pytest.fixture(scope='session')
def moving_sample():
    return synth.render(street_config())


@pytest.fixture(scope='session')
def static_sample():
    return synth.render(street_config(object_motion=(0.0,) * 6))
