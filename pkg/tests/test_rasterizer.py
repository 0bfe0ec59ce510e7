import numpy as np
import pytest

from core.camera import Camera, project_points
from core.errors import DomainError
from core.face_model import FaceParams, Mesh, evaluate_model
from core.rasterizer import RenderConfig, rasterize, rasterize_visibility

import core.constants as c


def _camera(size: int = 64, focal: float = 80.0) -> Camera:
    return Camera(
        fx=focal,
        fy=focal,
        cx=size / 2,
        cy=size / 2,
        rotation=np.eye(3),
        translation=np.zeros(3),
        width=size,
        height=size,
    )


def _mesh(vertices, triangles) -> Mesh:
    return Mesh(np.array(vertices, dtype=np.float64), np.array(triangles, dtype=np.int64))


SQUARE = [[-0.25, -0.25, 1.0], [0.25, -0.25, 1.0], [0.25, 0.25, 1.0], [-0.25, 0.25, 1.0]]


def test_mesh_behind_camera_renders_pure_background(render_config):
    mesh = _mesh([[0, 0, -1.0], [1, 0, -1.0], [0, 1, -1.0]], [[0, 1, 2]])
    frame, depth, visibility = rasterize(mesh, _camera(), render_config)
    assert not visibility.covered.any()
    assert np.all(depth == np.float32(c.BACKGROUND_DEPTH))
    assert np.all(frame == np.array(c.BACKGROUND_COLOR, dtype=np.uint8))


def test_large_triangle_covers_centre_pixel(render_config):
    mesh = _mesh([[-1, -1, 1.0], [1, -1, 1.0], [0, 1, 1.0]], [[0, 1, 2]])
    visibility = rasterize_visibility(mesh, _camera(), render_config)
    assert visibility.triangle_ids[32, 32] == 0
    assert visibility.barycentrics[32, 32].sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(visibility.barycentrics[32, 32] >= 0)
    assert visibility.depth[32, 32] == pytest.approx(1.0)


def test_nearer_triangle_wins(render_config):
    far = [[-1, -1, 1.5], [1, -1, 1.5], [0, 1, 1.5]]
    near = [[-1, -1, 1.0], [1, -1, 1.0], [0, 1, 1.0]]
    mesh = _mesh(far + near, [[0, 1, 2], [3, 4, 5]])
    visibility = rasterize_visibility(mesh, _camera(), render_config)
    covered = visibility.covered
    assert covered.any()
    assert np.all(visibility.triangle_ids[covered] == 1)


def test_exact_depth_ties_go_to_the_lower_id(render_config):
    tri = [[-1, -1, 1.0], [1, -1, 1.0], [0, 1, 1.0]]
    mesh = _mesh(tri + tri, [[3, 4, 5], [0, 1, 2]])
    visibility = rasterize_visibility(mesh, _camera(), render_config)
    assert np.all(visibility.triangle_ids[visibility.covered] == 0)


def test_shared_edge_paints_each_pixel_once(render_config):
    camera = _camera()
    both = rasterize_visibility(_mesh(SQUARE, [[0, 1, 2], [0, 2, 3]]), camera, render_config)
    first = rasterize_visibility(_mesh(SQUARE, [[0, 1, 2]]), camera, render_config)
    second = rasterize_visibility(_mesh(SQUARE, [[0, 2, 3]]), camera, render_config)

    # the diagonal passes through pixel centres, the fill rule gives each to one side
    assert not np.any(first.covered & second.covered)
    assert np.array_equal(first.covered | second.covered, both.covered)
    assert both.covered.sum() == 40 * 40
    assert both.covered[12:52, 12:52].all()


def test_shared_edge_with_opposite_winding(render_config):
    camera = _camera()
    first = rasterize_visibility(_mesh(SQUARE, [[0, 2, 1]]), camera, render_config)
    second = rasterize_visibility(_mesh(SQUARE, [[0, 2, 3]]), camera, render_config)
    assert not np.any(first.covered & second.covered)
    assert (first.covered | second.covered).sum() == 40 * 40


def test_fragments_beyond_far_plane_are_dropped():
    config = RenderConfig()
    mesh = _mesh([[-1, -1, 1.95], [1, -1, 1.95], [0, 1, 1.95]], [[0, 1, 2]])
    assert not rasterize_visibility(mesh, _camera(), config).covered.any()


def test_triangles_touching_near_plane_are_culled(render_config):
    mesh = _mesh([[-1, -1, 1.0], [1, -1, 1.0], [0, 0.1, 0.01]], [[0, 1, 2]])
    assert not rasterize_visibility(mesh, _camera(), render_config).covered.any()


def test_stored_surface_points_reproject_to_pixel_centres(asset, target, render_config):
    camera = Camera.default(96, 96)
    mesh = evaluate_model(asset, target)
    visibility = rasterize_visibility(mesh, camera, render_config)
    covered = visibility.covered
    assert covered.sum() > 500

    tris = mesh.triangles[visibility.triangle_ids[covered]]
    bary = visibility.barycentrics[covered]
    assert np.all(bary >= 0)
    assert np.allclose(bary.sum(axis=1), 1.0, atol=1e-6)

    points = np.einsum("pi,pic->pc", bary, mesh.vertices[tris])
    uv, z = project_points(camera, points)
    rows, cols = np.nonzero(covered)
    centres = np.stack([cols + 0.5, rows + 0.5], axis=1)
    assert np.abs(uv - centres).max() < 0.51
    assert np.allclose(z, visibility.depth[covered], rtol=1e-6, atol=0)


def test_half_resolution_halves_covered_box(render_config):
    mesh = _mesh([[-0.2, -0.1, 1.2], [0.3, -0.2, 1.2], [0.05, 0.3, 1.1]], [[0, 1, 2]])
    camera = _camera(128, 160.0)
    full = rasterize_visibility(mesh, camera, render_config).covered
    half = rasterize_visibility(mesh, camera.scaled(0.5), render_config).covered

    def box(mask):
        rows, cols = np.nonzero(mask)
        return np.array([cols.min(), rows.min(), cols.max(), rows.max()])

    assert np.all(np.abs(box(full) / 2 - box(half)) <= 1)


def test_shading_paints_face_and_keeps_background(asset, render_config):
    camera = Camera.default(64, 64)
    mesh = evaluate_model(asset, FaceParams.zeros(asset))
    frame, depth, visibility = rasterize(mesh, camera, render_config)
    assert frame.dtype == np.uint8 and frame.shape == (64, 64, 3)
    assert depth.dtype == np.float32
    background = ~visibility.covered
    assert np.all(frame[background] == np.array(c.BACKGROUND_COLOR, dtype=np.uint8))
    assert np.all(depth[visibility.covered] < c.FAR_CLIP)


def test_background_image_must_match_frame(asset):
    config = RenderConfig(background=np.zeros((32, 32, 3), np.uint8))
    mesh = evaluate_model(asset, FaceParams.zeros(asset))
    with pytest.raises(DomainError):
        rasterize(mesh, Camera.default(64, 64), config)


def test_render_config_validation():
    with pytest.raises(DomainError):
        RenderConfig(near=1.0, far=0.5)
    with pytest.raises(DomainError):
        RenderConfig(background_depth=1.0)
