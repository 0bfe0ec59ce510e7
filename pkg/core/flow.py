from __future__ import annotations
from dataclasses import dataclass

import numpy as np

from core.camera import Camera, project_points
from core.errors import ValidationError
from core.face_model import FaceModelAsset, Mesh, Region
from core.rasterizer import RenderConfig, VisibilityBuffer, rasterize_visibility
from core.sequence import MeshPairSample

import core.constants as c


@dataclass(frozen=True, eq=False)
class FlowField:
    uv: np.ndarray
    valid: np.ndarray
    occlusion: np.ndarray | None = None

    def __post_init__(self) -> None:
        uv = np.asarray(self.uv, dtype=np.float32)
        if uv.ndim != 3 or uv.shape[2] != 2:
            raise ValidationError(f"flow must have shape (H, W, 2), got {uv.shape}")
        valid = np.asarray(self.valid, dtype=bool)
        if valid.shape != uv.shape[:2]:
            raise ValidationError("validity mask does not match flow size")
        if not np.all(np.isfinite(uv[valid])):
            raise ValidationError("flow has non-finite values at valid pixels")
        object.__setattr__(self, "uv", uv)
        object.__setattr__(self, "valid", valid)

    @staticmethod
    def zeros(width: int, height: int) -> FlowField:
        return FlowField(np.zeros((height, width, 2), np.float32), np.ones((height, width), bool))

    @property
    def width(self) -> int:
        return self.uv.shape[1]

    @property
    def height(self) -> int:
        return self.uv.shape[0]

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height

    @property
    def u(self) -> np.ndarray:
        return self.uv[..., 0]

    @property
    def v(self) -> np.ndarray:
        return self.uv[..., 1]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)

    def __sub__(self, other: FlowField) -> FlowField:
        if self.size != other.size:
            raise ValidationError(f"flow sizes differ: {self.size} vs {other.size}")
        occlusion = self.occlusion
        if other.occlusion is not None:
            occlusion = other.occlusion if occlusion is None else occlusion | other.occlusion
        return FlowField(self.uv - other.uv, self.valid & other.valid, occlusion)

    def equals(self, other: FlowField) -> bool:
        return (
            self.size == other.size
            and np.array_equal(self.valid, other.valid)
            and np.array_equal(self.uv[self.valid], other.uv[other.valid])
        )


def _check_inputs(
    source: Mesh, target: Mesh, camera: Camera, visibility: VisibilityBuffer
) -> None:
    if not source.same_topology(target):
        raise ValidationError("source and target meshes do not share topology")
    if visibility.size != camera.size:
        raise ValidationError(
            f"visibility is {visibility.size}, camera renders {camera.size}"
        )


def compute_flow(
    source_mesh: Mesh,
    target_mesh: Mesh,
    camera: Camera,
    source_visibility: VisibilityBuffer,
    target_depth: np.ndarray | None = None,
    eps_z: float = 0.0,
) -> FlowField:
    """Forward flow of every visible source surface point into the target frame.

    Background pixels carry zero flow. When `target_depth` is given, pixels whose
    surface point lands behind the target depth map (or outside the frame) are
    flagged in the occlusion mask; their flow is kept.
    """
    _check_inputs(source_mesh, target_mesh, camera, source_visibility)

    covered = source_visibility.covered
    tris = np.asarray(source_mesh.triangles)[source_visibility.triangle_ids[covered]]
    bary = source_visibility.barycentrics[covered]

    x_src = np.einsum("pi,pic->pc", bary, source_mesh.vertices[tris])
    x_dst = np.einsum("pi,pic->pc", bary, target_mesh.vertices[tris])
    # same arithmetic on both ends so identical meshes give exactly zero flow
    uv_src, _ = project_points(camera, x_src)
    uv_dst, z_dst = project_points(camera, x_dst)

    uv = np.zeros((camera.height, camera.width, 2), dtype=np.float32)
    uv[covered] = (uv_dst - uv_src).astype(np.float32)

    occlusion = None
    if target_depth is not None:
        occlusion = np.zeros((camera.height, camera.width), dtype=bool)
        col = np.floor(uv_dst[:, 0]).astype(np.int64)
        row = np.floor(uv_dst[:, 1]).astype(np.int64)
        inside = (col >= 0) & (col < camera.width) & (row >= 0) & (row < camera.height)
        hidden = ~inside
        hidden[inside] = z_dst[inside] > target_depth[row[inside], col[inside]] + eps_z
        occlusion[covered] = hidden

    return FlowField(uv, np.ones((camera.height, camera.width), bool), occlusion)


def compute_decomposed_flows(
    sample: MeshPairSample,
    camera: Camera,
    config: RenderConfig,
    source_visibility: VisibilityBuffer | None = None,
    facial_depth: np.ndarray | None = None,
    head_depth: np.ndarray | None = None,
) -> tuple[FlowField, FlowField, FlowField]:
    """Facial, head and expression flow of one pair from one source visibility.

    Buffers and depth maps not passed in are rasterized here.
    """
    if source_visibility is None:
        source_visibility = rasterize_visibility(sample.source, camera, config)
    if facial_depth is None:
        facial_depth = rasterize_visibility(sample.facial_target, camera, config).depth
    if head_depth is None:
        head_depth = rasterize_visibility(sample.head_target, camera, config).depth
    eps_z = c.OCCLUSION_FRACTION * config.depth_range

    facial = compute_flow(
        sample.source, sample.facial_target, camera, source_visibility, facial_depth, eps_z
    )
    head = compute_flow(
        sample.source, sample.head_target, camera, source_visibility, head_depth, eps_z
    )
    expression = facial - head
    return facial, head, expression


def region_masks(
    asset: FaceModelAsset, mesh: Mesh, visibility: VisibilityBuffer
) -> dict[Region, np.ndarray]:
    """Per-region pixel masks; a pixel takes the label of its dominant vertex."""
    covered = visibility.covered
    tris = np.asarray(mesh.triangles)[visibility.triangle_ids[covered]]
    dominant = tris[np.arange(len(tris)), np.argmax(visibility.barycentrics[covered], 1)]

    labels = np.full(covered.shape, -1, dtype=np.int64)
    labels[covered] = asset.region_labels[dominant]
    return {region: labels == region for region in Region}
