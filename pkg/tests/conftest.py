import pathlib

import numpy as np
import pytest

from core.camera import Camera
from core.face_model import FaceModelAsset, FaceParams, make_synthetic_asset
from core.rasterizer import RenderConfig
from core.sequence import SequenceSpec


@pytest.fixture(scope="session")
def asset() -> FaceModelAsset:
    return make_synthetic_asset(seed=7, n_v=400, n_beta=4, n_psi=6)


@pytest.fixture(scope="session")
def camera() -> Camera:
    return Camera.default(64, 64)


@pytest.fixture(scope="session")
def render_config() -> RenderConfig:
    return RenderConfig()


@pytest.fixture
def target(asset: FaceModelAsset) -> FaceParams:
    """A moderate pose and expression that keeps the face toward the camera."""
    theta = np.zeros(asset.pose_dim)
    theta[0:3] = (0.05, 0.12, 0.0)
    theta[3:6] = (0.04, 0.0, 0.02)
    theta[6] = 0.25
    psi = np.linspace(-1.0, 1.0, asset.n_psi)
    beta = np.full(asset.n_beta, 0.5)
    return FaceParams(beta, psi, theta)


@pytest.fixture
def spec(asset: FaceModelAsset, target: FaceParams) -> SequenceSpec:
    return SequenceSpec(asset, target, 5, seed=3)


@pytest.fixture
def out_dir(tmp_path: pathlib.Path) -> pathlib.Path:
    path = tmp_path / "out"
    path.mkdir()
    return path
