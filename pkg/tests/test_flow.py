import numpy as np
import pytest

from core.camera import Camera
from core.errors import ValidationError
from core.face_model import FaceParams, Mesh, Region, evaluate_model
from core.flow import FlowField, compute_decomposed_flows, compute_flow, region_masks
from core.rasterizer import rasterize_visibility
from core.sequence import SequenceSpec, generate_sequence

import core.constants as c


def _camera(size: int = 128, focal: float = 150.0) -> Camera:
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


TRIANGLE = np.array([[-0.3, -0.3, 1.0], [0.35, -0.25, 1.0], [0.0, 0.3, 1.0]])
TRIS = np.array([[0, 1, 2]])


def _pixel_centres(mask: np.ndarray) -> np.ndarray:
    rows, cols = np.nonzero(mask)
    return np.stack([cols + 0.5, rows + 0.5], axis=1)


def test_identical_meshes_give_exactly_zero_flow(asset, target, camera, render_config):
    mesh = evaluate_model(asset, target)
    visibility = rasterize_visibility(mesh, camera, render_config)
    flow = compute_flow(mesh, mesh, camera, visibility)
    assert np.all(flow.uv == 0)
    assert flow.valid.all()


def test_fronto_parallel_translation(render_config):
    camera = _camera()
    source = Mesh(TRIANGLE, TRIS)
    moved = Mesh(TRIANGLE + [0.01, -0.02, 0.0], TRIS)
    visibility = rasterize_visibility(source, camera, render_config)
    flow = compute_flow(source, moved, camera, visibility)

    covered = visibility.covered
    assert np.allclose(flow.u[covered], 150.0 * 0.01, atol=1e-3)
    assert np.allclose(flow.v[covered], 150.0 * -0.02, atol=1e-3)
    assert np.all(flow.uv[~covered] == 0)


def test_motion_toward_camera_scales_about_principal_point(render_config):
    camera = _camera()
    source = Mesh(TRIANGLE, TRIS)
    closer = Mesh(TRIANGLE * [1.0, 1.0, 0.9], TRIS)
    visibility = rasterize_visibility(source, camera, render_config)
    flow = compute_flow(source, closer, camera, visibility)

    covered = visibility.covered
    p = _pixel_centres(covered) - 64.0
    expected = p / 0.9 - p
    assert np.abs(flow.uv[covered] - expected).max() < 1e-3


def test_in_plane_rotation_is_tangential(render_config):
    camera = _camera()
    angle = 0.05
    rotation = np.array(
        [[np.cos(angle), -np.sin(angle), 0.0], [np.sin(angle), np.cos(angle), 0.0], [0, 0, 1]]
    )
    source = Mesh(TRIANGLE, TRIS)
    rotated = Mesh(TRIANGLE @ rotation.T, TRIS)
    visibility = rasterize_visibility(source, camera, render_config)
    flow = compute_flow(source, rotated, camera, visibility)

    covered = visibility.covered
    p = _pixel_centres(covered) - 64.0
    expected = p @ rotation[:2, :2].T - p
    assert np.abs(flow.uv[covered] - expected).max() < 1e-3
    # magnitude grows with the distance from the principal point
    radius = np.linalg.norm(p, axis=1)
    magnitude = np.linalg.norm(flow.uv[covered], axis=1)
    assert np.allclose(magnitude, 2 * np.sin(angle / 2) * radius, atol=1e-3)


def test_occlusion_against_target_depth(render_config):
    camera = _camera()
    source = Mesh(TRIANGLE, TRIS)
    visibility = rasterize_visibility(source, camera, render_config)
    covered = visibility.covered

    hidden = compute_flow(source, source, camera, visibility, np.full((128, 128), 0.5))
    assert np.array_equal(hidden.occlusion, covered)

    shown = compute_flow(source, source, camera, visibility, visibility.depth, 1e-3)
    assert not shown.occlusion.any()

    gone = Mesh(TRIANGLE + [5.0, 0.0, 0.0], TRIS)
    outside = compute_flow(source, gone, camera, visibility, visibility.depth, 1e-3)
    assert np.array_equal(outside.occlusion, covered)


def test_topology_and_size_mismatch(asset, camera, render_config):
    mesh = evaluate_model(asset, FaceParams.zeros(asset))
    visibility = rasterize_visibility(mesh, camera, render_config)
    other = Mesh(mesh.vertices, mesh.triangles[:, [0, 2, 1]])
    with pytest.raises(ValidationError):
        compute_flow(mesh, other, camera, visibility)
    with pytest.raises(ValidationError):
        compute_flow(mesh, mesh, camera.scaled(0.5), visibility)


def test_decomposition_identity_is_bitwise(spec, camera, render_config):
    for sample in generate_sequence(spec):
        facial, head, expression = compute_decomposed_flows(sample, camera, render_config)
        assert np.array_equal(expression.uv, facial.uv - head.uv)
        assert np.array_equal(facial.valid, head.valid)
        assert np.array_equal(facial.valid, expression.valid)


def test_background_is_stationary(spec, camera, render_config):
    sample = generate_sequence(spec)[1]
    visibility = rasterize_visibility(sample.source, camera, render_config)
    for flow in compute_decomposed_flows(sample, camera, render_config, visibility):
        assert np.all(flow.uv[~visibility.covered] == 0)
        assert flow.valid.all()


def test_rigid_sequence_has_no_expression_flow(asset, target, camera, render_config):
    rigid = FaceParams(target.beta, np.zeros(asset.n_psi), target.theta)
    for sample in generate_sequence(SequenceSpec(asset, rigid, 5)):
        facial, head, expression = compute_decomposed_flows(sample, camera, render_config)
        assert np.all(expression.uv == 0)
        assert np.abs(facial.uv).max() > 0


def test_still_head_has_no_head_flow(asset, target, camera, render_config):
    still = FaceParams(target.beta, target.psi, np.zeros(asset.pose_dim))
    for sample in generate_sequence(SequenceSpec(asset, still, 5)):
        facial, head, expression = compute_decomposed_flows(sample, camera, render_config)
        assert np.all(head.uv == 0)
        assert np.array_equal(expression.uv, facial.uv)


def test_small_motion_is_linear(asset, render_config):
    camera = Camera.default(128, 128)
    theta = np.zeros(asset.pose_dim)
    theta[0:3] = (0.04, 0.06, 0.0)
    theta[6] = 0.08
    target = FaceParams(np.zeros(asset.n_beta), np.full(asset.n_psi, 0.4), theta)

    source = evaluate_model(asset, target.scaled(0.0, 0.0))
    visibility = rasterize_visibility(source, camera, render_config)
    covered = visibility.covered

    def mean_magnitude(factor: float) -> float:
        moved = evaluate_model(asset, target.scaled(factor, factor))
        flow = compute_flow(source, moved, camera, visibility)
        return float(flow.magnitude()[covered].mean())

    assert mean_magnitude(0.5) / mean_magnitude(1.0) == pytest.approx(0.5, rel=0.05)


def test_region_masks_partition_the_face(asset, target, camera, render_config):
    mesh = evaluate_model(asset, target)
    visibility = rasterize_visibility(mesh, camera, render_config)
    masks = region_masks(asset, mesh, visibility)

    assert set(masks) == set(Region)
    total = np.zeros_like(visibility.covered, dtype=np.int64)
    for mask in masks.values():
        total += mask
    assert np.array_equal(total, visibility.covered.astype(np.int64))
    for tag in c.EVAL_REGIONS:
        assert masks[Region.parse(tag)].any()


def test_flow_subtraction_merges_occlusion():
    a = FlowField(np.ones((2, 2, 2)), np.ones((2, 2), bool), np.array([[1, 0], [0, 0]], bool))
    b = FlowField(np.ones((2, 2, 2)), np.ones((2, 2), bool), np.array([[0, 0], [0, 1]], bool))
    d = a - b
    assert np.all(d.uv == 0)
    assert np.array_equal(d.occlusion, [[True, False], [False, True]])


def test_flow_field_validation():
    with pytest.raises(ValidationError):
        FlowField(np.zeros((4, 4, 3)), np.ones((4, 4), bool))
    with pytest.raises(ValidationError):
        FlowField(np.full((4, 4, 2), np.inf), np.ones((4, 4), bool))
    # non-finite values are allowed where the flow is invalid
    uv = np.zeros((4, 4, 2))
    uv[0, 0] = np.nan
    valid = np.ones((4, 4), bool)
    valid[0, 0] = False
    assert FlowField(uv, valid).width == 4
