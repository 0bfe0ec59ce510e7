from __future__ import annotations
from dataclasses import dataclass, field

import numpy as np

from core.camera import Camera, project_camera_points
from core.errors import DomainError
from core.face_model import Mesh

import core.constants as c


@dataclass(frozen=True, eq=False)
class RenderConfig:
    background_depth: float = c.BACKGROUND_DEPTH
    background: np.ndarray | None = None
    background_color: tuple[int, int, int] = c.BACKGROUND_COLOR
    light_direction: tuple[float, float, float] = c.LIGHT_DIRECTION
    ambient: float = c.AMBIENT
    near: float = c.NEAR_CLIP
    far: float = c.FAR_CLIP

    def __post_init__(self) -> None:
        if not (0 < self.near < self.far):
            raise DomainError(f"need 0 < near < far, got {self.near, self.far}")
        if not self.background_depth > self.far:
            raise DomainError(
                f"background plane at {self.background_depth} must lie beyond "
                f"the far clip {self.far}"
            )
        if not (0 <= self.ambient <= 1):
            raise DomainError(f"ambient must be in [0, 1], got {self.ambient}")
        if np.linalg.norm(self.light_direction) == 0:
            raise DomainError("light direction must be non-zero")

    @property
    def depth_range(self) -> float:
        return self.background_depth - self.near

    def background_image(self, width: int, height: int) -> np.ndarray:
        if self.background is None:
            return np.broadcast_to(
                np.array(self.background_color, dtype=np.uint8), (height, width, 3)
            ).copy()
        if self.background.shape != (height, width, 3):
            raise DomainError(
                f"background is {self.background.shape[1]}x{self.background.shape[0]}"
                f", frame is {width}x{height}"
            )
        return np.array(self.background, dtype=np.uint8)


@dataclass(frozen=True, eq=False)
class VisibilityBuffer:
    triangle_ids: np.ndarray
    barycentrics: np.ndarray
    depth: np.ndarray

    @property
    def covered(self) -> np.ndarray:
        return self.triangle_ids >= 0

    @property
    def size(self) -> tuple[int, int]:
        height, width = self.triangle_ids.shape
        return width, height


@dataclass
class _ZBuffer:
    width: int
    height: int
    background_depth: float
    depth: np.ndarray = field(init=False)
    ids: np.ndarray = field(init=False)
    bary: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        n = self.width * self.height
        self.depth = np.full(n, np.inf)
        self.ids = np.full(n, -1, dtype=np.int64)
        self.bary = np.zeros((n, 3))

    def merge(
        self, pix: np.ndarray, depth: np.ndarray, ids: np.ndarray, bary: np.ndarray
    ) -> None:
        if pix.size == 0:
            return
        # nearest fragment per pixel, lower triangle id on exact depth ties
        order = np.lexsort((ids, depth, pix))
        pix, depth, ids, bary = pix[order], depth[order], ids[order], bary[order]
        first = np.flatnonzero(np.r_[True, pix[1:] != pix[:-1]])
        pix, depth, ids, bary = pix[first], depth[first], ids[first], bary[first]

        cur_depth, cur_ids = self.depth[pix], self.ids[pix]
        wins = (depth < cur_depth) | ((depth == cur_depth) & (ids < cur_ids))
        pix = pix[wins]
        self.depth[pix] = depth[wins]
        self.ids[pix] = ids[wins]
        self.bary[pix] = bary[wins]

    def visibility(self) -> VisibilityBuffer:
        shape = (self.height, self.width)
        depth = np.where(self.ids >= 0, self.depth, self.background_depth)
        return VisibilityBuffer(
            self.ids.reshape(shape), self.bary.reshape(shape + (3,)), depth.reshape(shape)
        )


def _edge(a: np.ndarray, b: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    return (b[:, 0] - a[:, 0]) * (py - a[:, 1]) - (b[:, 1] - a[:, 1]) * (px - a[:, 0])


def _pixel_candidates(
    p: np.ndarray, width: int, height: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Expands each triangle's bounding box into (triangle slot, x, y) triples."""
    lo = np.ceil(p.min(axis=1) - 0.5).astype(np.int64)
    hi = np.floor(p.max(axis=1) - 0.5).astype(np.int64)
    x0, y0 = np.maximum(lo[:, 0], 0), np.maximum(lo[:, 1], 0)
    x1, y1 = np.minimum(hi[:, 0], width - 1), np.minimum(hi[:, 1], height - 1)
    nx = np.maximum(x1 - x0 + 1, 0)
    ny = np.maximum(y1 - y0 + 1, 0)

    counts = nx * ny
    slot = np.repeat(np.arange(len(p)), counts)
    starts = np.cumsum(counts) - counts
    offset = np.arange(counts.sum()) - np.repeat(starts, counts)
    xs = x0[slot] + offset % nx[slot]
    ys = y0[slot] + offset // nx[slot]
    return slot, xs, ys


def _rasterize_chunk(
    tri_ids: np.ndarray,
    triangles: np.ndarray,
    uv: np.ndarray,
    z: np.ndarray,
    camera: Camera,
    far: float,
    zbuf: _ZBuffer,
) -> None:
    tris = triangles[tri_ids]
    p = uv[tris]
    slot, xs, ys = _pixel_candidates(p, camera.width, camera.height)
    if slot.size == 0:
        return
    px, py = xs + 0.5, ys + 0.5

    ftris = tris[slot]
    pts = p[slot]
    area = _edge(pts[:, 0], pts[:, 1], pts[:, 2][:, 0], pts[:, 2][:, 1])
    sign = np.sign(area)

    inside = np.ones(slot.size, dtype=bool)
    edges = np.empty((slot.size, 3))
    for i, (a, b) in enumerate(((1, 2), (2, 0), (0, 1))):
        ia, ib = ftris[:, a], ftris[:, b]
        # evaluate every edge from its lower vertex index so neighbours agree bitwise
        forward = ia < ib
        lo = np.where(forward, ia, ib)
        hi = np.where(forward, ib, ia)
        e = _edge(uv[lo], uv[hi], px, py) * np.where(forward, 1.0, -1.0)
        edges[:, i] = e

        # top-left rule on the positively oriented edge direction
        dx = (pts[:, b, 0] - pts[:, a, 0]) * sign
        dy = (pts[:, b, 1] - pts[:, a, 1]) * sign
        owned = (dy > 0) | ((dy == 0) & (dx > 0))
        inside &= (e * sign > 0) | ((e == 0) & owned)

    inside &= area != 0
    lam = edges[inside] / area[inside, None]
    ftris = ftris[inside]

    # perspective-correct object-space barycentrics
    w = lam / z[ftris]
    total = w.sum(axis=1)
    depth = 1.0 / total
    bary = w / total[:, None]

    pix = ys[inside] * camera.width + xs[inside]
    keep = depth <= far
    zbuf.merge(pix[keep], depth[keep], tri_ids[slot[inside]][keep], bary[keep])


def rasterize_visibility(
    mesh: Mesh, camera: Camera, config: RenderConfig
) -> VisibilityBuffer:
    cam_vertices = camera.to_camera(mesh.vertices)
    uv, z = project_camera_points(camera, cam_vertices)
    zbuf = _ZBuffer(camera.width, camera.height, config.background_depth)

    triangles = np.asarray(mesh.triangles)
    # triangles touching the near plane are culled whole
    candidates = np.flatnonzero(np.all(z[triangles] > config.near, axis=1))
    for start in range(0, candidates.size, c.RASTER_CHUNK):
        chunk = candidates[start : start + c.RASTER_CHUNK]
        _rasterize_chunk(chunk, triangles, uv, z, camera, config.far, zbuf)
    return zbuf.visibility()


def shade(
    mesh: Mesh,
    camera: Camera,
    config: RenderConfig,
    visibility: VisibilityBuffer,
    vertex_colors: np.ndarray | None = None,
) -> np.ndarray:
    """Lambert + ambient with one directional light, flat normals per triangle."""
    frame = config.background_image(camera.width, camera.height).astype(np.float64)
    covered = visibility.covered
    if not covered.any():
        return frame.astype(np.uint8)

    cam_vertices = camera.to_camera(mesh.vertices)
    tris = np.asarray(mesh.triangles)[visibility.triangle_ids[covered]]
    v0, v1, v2 = (cam_vertices[tris[:, i]] for i in range(3))
    normals = np.cross(v1 - v0, v2 - v0)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    # two-sided: normals face the camera
    normals *= np.where(np.einsum("ij,ij->i", normals, v0) > 0, -1.0, 1.0)[:, None]

    light = np.asarray(config.light_direction, dtype=np.float64)
    light /= np.linalg.norm(light)
    lambert = np.maximum(0.0, -normals @ light)
    intensity = config.ambient + (1.0 - config.ambient) * lambert

    if vertex_colors is None:
        albedo = np.broadcast_to(np.array(c.SKIN_COLOR, dtype=np.float64), (len(tris), 3))
    else:
        colors = np.asarray(vertex_colors, dtype=np.float64)
        bary = visibility.barycentrics[covered]
        albedo = np.einsum("pi,pic->pc", bary, colors[tris])

    frame[covered] = albedo * intensity[:, None]
    return np.clip(np.rint(frame), 0, 255).astype(np.uint8)


def rasterize(
    mesh: Mesh,
    camera: Camera,
    config: RenderConfig,
    vertex_colors: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, VisibilityBuffer]:
    """Frame (H, W, 3) uint8, depth map (H, W) float32 and the visibility buffer."""
    visibility = rasterize_visibility(mesh, camera, config)
    frame = shade(mesh, camera, config, visibility, vertex_colors)
    return frame, visibility.depth.astype(np.float32), visibility
