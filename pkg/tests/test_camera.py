import numpy as np
import pytest

from core.camera import Camera, project, project_points
from core.errors import DomainError


def _camera(**overrides) -> Camera:
    values = dict(
        fx=100.0,
        fy=100.0,
        cx=64.0,
        cy=64.0,
        rotation=np.eye(3),
        translation=np.zeros(3),
        width=128,
        height=128,
    )
    values.update(overrides)
    return Camera(**values)


def test_point_on_axis_projects_to_principal_point():
    uv, z = project(_camera(), (0.0, 0.0, 1.0))
    assert np.array_equal(uv, [64.0, 64.0])
    assert z == 1.0


def test_linear_projection():
    uv, z = project(_camera(), (0.1, 0.0, 1.0))
    assert uv == pytest.approx([74.0, 64.0])
    assert z == 1.0


def test_doubling_depth_halves_offset():
    camera = _camera()
    uv1, _ = project(camera, (0.1, -0.05, 1.0))
    uv2, _ = project(camera, (0.1, -0.05, 2.0))
    centre = np.array([64.0, 64.0])
    assert np.allclose(uv2 - centre, (uv1 - centre) / 2)


def test_points_behind_near_plane_are_rejected():
    with pytest.raises(DomainError):
        project(_camera(), (0.0, 0.0, -1.0))
    with pytest.raises(DomainError):
        project(_camera(), (0.0, 0.0, 0.01), near=0.05)


def test_camera_validation():
    with pytest.raises(DomainError):
        _camera(fx=0.0)
    with pytest.raises(DomainError):
        _camera(width=4)
    with pytest.raises(DomainError):
        _camera(rotation=np.diag([1.0, 1.0, 2.0]))


def test_default_camera_frames_the_head(asset):
    camera = Camera.default(128, 128)
    uv, z = project_points(camera, asset.template_vertices)
    assert np.all(z > 0.8)
    height = uv[:, 1].max() - uv[:, 1].min()
    assert 0.4 * 128 < height < 0.8 * 128
    # image y points down: the silhouette top comes from the upper half of the head
    top, bottom = np.argmin(uv[:, 1]), np.argmax(uv[:, 1])
    assert uv[top, 1] < camera.cy < uv[bottom, 1]
    assert asset.template_vertices[top, 1] > 0 > asset.template_vertices[bottom, 1]


def test_scaled_camera_halves_pixels():
    camera = _camera()
    half = camera.scaled(0.5)
    assert half.size == (64, 64)
    uv, _ = project(camera, (0.1, 0.2, 1.5))
    uv_half, _ = project(half, (0.1, 0.2, 1.5))
    assert np.allclose(uv_half, uv / 2)


def test_json_round_trip():
    camera = Camera.default(96, 64)
    again = Camera.from_json(camera.to_json())
    assert again.size == camera.size
    assert np.array_equal(again.rotation, camera.rotation)
    assert again.fx == camera.fx
