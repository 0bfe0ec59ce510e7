from __future__ import annotations
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy.spatial import ConvexHull
from scipy.spatial.transform import Rotation

from core.errors import DomainError, FormatError, ParameterShapeError

import core.constants as c


class Region(IntEnum):
    Other = 0
    Lips = 1
    Forehead = 2
    Cheeks = 3
    Nose = 4
    Eyes = 5

    @staticmethod
    def parse(name: str) -> Region:
        try:
            return Region(c.REGIONS.index(name.strip().lower()))
        except ValueError:
            raise DomainError(f"unknown region `{name}` (expected one of {c.REGIONS})")

    @property
    def tag(self) -> str:
        return c.REGIONS[self.value]


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


# `eq=False`: arrays do not compare to a single bool
@dataclass(frozen=True, eq=False)
class FaceModelAsset:
    template_vertices: np.ndarray
    triangles: np.ndarray
    shape_basis: np.ndarray
    expression_basis: np.ndarray
    joint_offsets: np.ndarray
    kinematic_tree: np.ndarray
    skin_weights: np.ndarray
    region_labels: np.ndarray
    landmark_indices: np.ndarray

    def __post_init__(self) -> None:
        for name, dtype in (
            ("template_vertices", np.float64),
            ("triangles", np.int64),
            ("shape_basis", np.float64),
            ("expression_basis", np.float64),
            ("joint_offsets", np.float64),
            ("kinematic_tree", np.int64),
            ("skin_weights", np.float64),
            ("region_labels", np.uint8),
            ("landmark_indices", np.int64),
        ):
            object.__setattr__(self, name, _frozen(getattr(self, name), dtype))

    @property
    def n_v(self) -> int:
        return self.template_vertices.shape[0]

    @property
    def n_f(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_beta(self) -> int:
        return self.shape_basis.shape[0]

    @property
    def n_psi(self) -> int:
        return self.expression_basis.shape[0]

    @property
    def k(self) -> int:
        return self.joint_offsets.shape[0]

    @property
    def pose_dim(self) -> int:
        return 3 * self.k + 3

    def region_vertices(self, regions: tuple[Region, ...]) -> np.ndarray:
        return np.flatnonzero(np.isin(self.region_labels, [int(r) for r in regions]))

    def equals(self, other: FaceModelAsset) -> bool:
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in self.__dataclass_fields__
        )


@dataclass(frozen=True, eq=False)
class FaceParams:
    beta: np.ndarray
    psi: np.ndarray
    theta: np.ndarray

    def __post_init__(self) -> None:
        for name in ("beta", "psi", "theta"):
            object.__setattr__(self, name, _frozen(getattr(self, name), np.float64))

    @staticmethod
    def zeros(asset: FaceModelAsset) -> FaceParams:
        return FaceParams(
            np.zeros(asset.n_beta), np.zeros(asset.n_psi), np.zeros(asset.pose_dim)
        )

    def scaled(self, pose: float, expression: float) -> FaceParams:
        """Identity kept, pose and expression multiplied by the given factors."""
        return FaceParams(self.beta, self.psi * expression, self.theta * pose)

    def to_json(self) -> dict[str, list[float]]:
        return {
            "beta": self.beta.tolist(),
            "theta": self.theta.tolist(),
            "psi": self.psi.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.vertices)):
            raise DomainError("mesh has non-finite vertex coordinates")

    def same_topology(self, other: Mesh) -> bool:
        return self.triangles is other.triangles or np.array_equal(
            self.triangles, other.triangles
        )


def check_asset(asset: FaceModelAsset) -> None:
    """Raises `FormatError` naming the first field that breaks an asset invariant."""
    n_v, k = asset.n_v, asset.k

    if asset.template_vertices.ndim != 2 or asset.template_vertices.shape[1] != 3:
        raise FormatError("template_vertices", "expected an (n_v, 3) array")
    if n_v < 3:
        raise FormatError("template_vertices", f"too few vertices ({n_v})")

    tris = asset.triangles
    if tris.ndim != 2 or tris.shape[1] != 3 or tris.shape[0] == 0:
        raise FormatError("triangles", "expected a non-empty (n_f, 3) array")
    if tris.min() < 0 or tris.max() >= n_v:
        raise FormatError("triangles", f"vertex index outside [0, {n_v})")
    if np.any(
        (tris[:, 0] == tris[:, 1])
        | (tris[:, 1] == tris[:, 2])
        | (tris[:, 0] == tris[:, 2])
    ):
        raise FormatError("triangles", "degenerate triangle with a repeated index")

    for name in ("shape_basis", "expression_basis"):
        basis = getattr(asset, name)
        if basis.ndim != 3 or basis.shape[1:] != (n_v, 3):
            raise FormatError(name, f"expected shape (count, {n_v}, 3)")
        if basis.shape[0] < 1:
            raise FormatError(name, "basis must have at least one component")

    if asset.joint_offsets.shape != (k, 3) or k < 1:
        raise FormatError("joint_offsets", "expected a (k, 3) array with k >= 1")

    tree = asset.kinematic_tree
    if tree.shape != (k,):
        raise FormatError("kinematic_tree", f"expected {k} parent indices")
    # parents come before children, -1 is the global root
    if np.any(tree < -1) or np.any(tree >= np.arange(k)):
        raise FormatError("kinematic_tree", "parent index must precede its child")

    weights = asset.skin_weights
    if weights.shape != (n_v, k + 1):
        raise FormatError("skin_weights", f"expected shape ({n_v}, {k + 1})")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise FormatError("skin_weights", "weights must be finite and non-negative")
    sums = weights.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > c.WEIGHT_SUM_TOL)
    if bad.size:
        raise FormatError(
            "skin_weights",
            f"row {int(bad[0])} sums to {sums[bad[0]]:.6g}, expected 1",
        )

    if asset.region_labels.shape != (n_v,) or asset.region_labels.max(
        initial=0
    ) >= len(c.REGIONS):
        raise FormatError("region_labels", "expected one known region tag per vertex")

    lm = asset.landmark_indices
    if lm.ndim != 1 or (lm.size and (lm.min() < 0 or lm.max() >= n_v)):
        raise FormatError("landmark_indices", f"index outside [0, {n_v})")

    for name in ("template_vertices", "shape_basis", "expression_basis"):
        if not np.all(np.isfinite(getattr(asset, name))):
            raise FormatError(name, "non-finite values")


def _check_params(asset: FaceModelAsset, params: FaceParams) -> None:
    expected = {"beta": asset.n_beta, "psi": asset.n_psi, "theta": asset.pose_dim}
    for name, size in expected.items():
        value = getattr(params, name)
        if value.shape != (size,):
            raise ParameterShapeError(
                f"`{name}` has shape {value.shape}, asset expects ({size},)"
            )
        if not np.all(np.isfinite(value)):
            raise DomainError(f"`{name}` has non-finite entries")


def joint_transforms(asset: FaceModelAsset, theta: np.ndarray) -> np.ndarray:
    """World transforms (k+1, 4, 4) of the global root and every joint."""
    # writable copy: from_rotvec rejects read-only buffers
    rotvecs = np.array(theta, dtype=np.float64).reshape(-1, 3)
    rotations = Rotation.from_rotvec(rotvecs).as_matrix()
    # zero rotations stay exact identities
    rotations[np.all(rotvecs == 0, axis=1)] = np.eye(3)

    pivots = np.vstack([np.zeros(3), asset.joint_offsets])
    local = np.tile(np.eye(4), (asset.k + 1, 1, 1))
    local[:, :3, :3] = rotations
    local[:, :3, 3] = pivots - np.einsum("jab,jb->ja", rotations, pivots)

    world = np.empty_like(local)
    world[0] = local[0]
    for j, parent in enumerate(asset.kinematic_tree, start=1):
        world[j] = world[parent + 1] @ local[j]
    return world


def shaped_vertices(asset: FaceModelAsset, params: FaceParams) -> np.ndarray:
    return (
        asset.template_vertices
        + np.tensordot(params.beta, asset.shape_basis, axes=1)
        + np.tensordot(params.psi, asset.expression_basis, axes=1)
    )


def skinning_candidates(asset: FaceModelAsset, params: FaceParams) -> np.ndarray:
    """Every shaped vertex moved rigidly by every joint, shape (k+1, n_v, 3)."""
    _check_params(asset, params)
    shaped = shaped_vertices(asset, params)
    world = joint_transforms(asset, params.theta)
    return np.einsum("jab,vb->jva", world[:, :3, :3], shaped) + world[:, None, :3, 3]


def evaluate_model(asset: FaceModelAsset, params: FaceParams) -> Mesh:
    candidates = skinning_candidates(asset, params)
    shaped = shaped_vertices(asset, params)
    # blend displacements so an identity pose reproduces `shaped` exactly
    offsets = np.einsum("vj,jva->va", asset.skin_weights, candidates - shaped)
    return Mesh(shaped + offsets, asset.triangles)


def _fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count, dtype=np.float64)
    y = 1.0 - 2.0 * (i + 0.5) / count
    r = np.sqrt(1.0 - y * y)
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    return np.stack([r * np.cos(phi), y, r * np.sin(phi)], axis=1)


def _hull_triangles(points: np.ndarray) -> np.ndarray:
    simplices = ConvexHull(points).simplices.astype(np.int64)

    # orient outward
    a, b, cc = (points[simplices[:, i]] for i in range(3))
    inward = np.einsum("ij,ij->i", np.cross(b - a, cc - a), a) < 0
    simplices[inward] = simplices[inward][:, [0, 2, 1]]

    # canonical order: smallest index first (keeps winding), rows sorted
    shift = np.argmin(simplices, axis=1)
    rows = np.arange(len(simplices))[:, None]
    simplices = simplices[rows, (shift[:, None] + np.arange(3)) % 3]
    return simplices[np.lexsort(simplices.T[::-1])]


def _assign_regions(d: np.ndarray) -> np.ndarray:
    x, y, z = d.T
    ax = np.abs(x)
    front = z > 0.35
    labels = np.full(len(d), Region.Other, dtype=np.uint8)
    labels[front & (y > 0.45)] = Region.Forehead
    labels[front & (ax > 0.3) & (y > -0.55) & (y <= 0.1)] = Region.Cheeks
    labels[front & (ax > 0.12) & (ax < 0.55) & (y > 0.1) & (y <= 0.45)] = Region.Eyes
    labels[(z > 0.8) & (ax <= 0.2) & (y > -0.25) & (y <= 0.2)] = Region.Nose
    labels[(z > 0.6) & (ax <= 0.35) & (y > -0.6) & (y <= -0.25)] = Region.Lips
    return labels


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


# (anchor direction on the unit head, motion direction)
EXPRESSION_ANCHORS = (
    ((0.0, -0.45, 0.89), (0.0, -1.0, 0.2)),
    ((0.3, -0.38, 0.87), (0.6, 0.6, 0.0)),
    ((-0.3, -0.38, 0.87), (-0.6, 0.6, 0.0)),
    ((0.3, 0.5, 0.8), (0.0, 1.0, 0.1)),
    ((-0.3, 0.5, 0.8), (0.0, 1.0, 0.1)),
    ((0.3, 0.28, 0.9), (0.0, -1.0, 0.0)),
    ((-0.3, 0.28, 0.9), (0.0, -1.0, 0.0)),
    ((0.0, -0.3, 0.95), (0.0, 0.6, 0.4)),
    ((0.0, -0.38, 0.92), (0.0, 0.0, 1.0)),
    ((0.55, -0.15, 0.82), (0.3, 0.7, 0.3)),
    ((-0.55, -0.15, 0.82), (-0.3, 0.7, 0.3)),
    ((0.0, 0.45, 0.89), (0.0, -0.5, 0.3)),
)

LANDMARK_ANCHORS = (
    (0.45, 0.5, 0.77),
    (0.2, 0.55, 0.81),
    (-0.2, 0.55, 0.81),
    (-0.45, 0.5, 0.77),
    (0.45, 0.28, 0.85),
    (0.15, 0.28, 0.95),
    (-0.15, 0.28, 0.95),
    (-0.45, 0.28, 0.85),
    (0.0, 0.1, 1.0),
    (0.0, -0.15, 1.0),
    (0.3, -0.38, 0.87),
    (0.0, -0.3, 0.95),
    (-0.3, -0.38, 0.87),
    (0.0, -0.45, 0.89),
    (0.0, -0.7, 0.7),
)


def make_synthetic_asset(
    seed: int,
    n_v: int = c.DEFAULT_NUM_VERTICES,
    n_beta: int = c.DEFAULT_NUM_BETA,
    n_psi: int = c.DEFAULT_NUM_PSI,
) -> FaceModelAsset:
    """A seeded ellipsoidal head with jaw, brows, lids and mouth controls."""
    if n_v < c.MIN_VERTICES:
        raise DomainError(f"n_v must be >= {c.MIN_VERTICES}, got {n_v}")
    if n_beta < 1 or n_psi < 1:
        raise DomainError(f"basis sizes must be >= 1, got |β|={n_beta}, |ψ|={n_psi}")

    rng = np.random.default_rng(seed)
    d = _fibonacci_sphere(n_v)
    triangles = _hull_triangles(d)
    x, y, z = d.T

    # nose and chin bumps on a jittered ellipsoid
    radii = np.array(c.HEAD_RADII) * rng.uniform(0.95, 1.05, 3)
    bumps = 0.22 * np.exp(-np.sum((d - _unit([0, -0.05, 1])) ** 2, axis=1) / 0.02)
    bumps += 0.08 * np.exp(-np.sum((d - _unit([0, -0.75, 0.66])) ** 2, axis=1) / 0.05)
    template = d * radii * (1.0 + bumps)[:, None]

    monomials = np.stack(
        [np.ones_like(x), x, y, z, x * x, y * y, z * z, x * y, y * z, x * z], axis=1
    )
    fields = monomials @ rng.normal(size=(monomials.shape[1], n_beta))
    fields /= np.abs(fields).max(axis=0, keepdims=True)
    shape_basis = c.SHAPE_BASIS_SCALE * np.einsum("va,vc->avc", fields, d)

    expression_basis = np.empty((n_psi, n_v, 3))
    for b in range(n_psi):
        anchor, motion = EXPRESSION_ANCHORS[b % len(EXPRESSION_ANCHORS)]
        center = _unit(np.array(anchor) + rng.normal(scale=0.03, size=3)) * radii
        direction = _unit(np.array(motion) + rng.normal(scale=0.2, size=3))
        magnitude = c.EXPRESSION_BASIS_SCALE * rng.uniform(0.8, 1.2)
        falloff = np.exp(
            -np.sum((template - center) ** 2, axis=1) / (2 * c.EXPRESSION_FALLOFF**2)
        )
        expression_basis[b] = magnitude * falloff[:, None] * direction

    joint_offsets = np.array(
        [
            [0.0, -0.09, -0.01],
            [0.0, -0.025, -0.005],
            [0.032, 0.025, 0.062],
            [-0.032, 0.025, 0.062],
        ]
    )

    def falloff(point, sigma: float) -> np.ndarray:
        return np.exp(-np.sum((template - point) ** 2, axis=1) / (2 * sigma**2))

    raw = np.stack(
        [
            falloff([0.0, -0.1, -0.005], 0.015),
            np.ones(n_v),
            2.0 * falloff([0.0, -0.075, 0.055], 0.03),
            4.0 * falloff(joint_offsets[2], 0.008),
            4.0 * falloff(joint_offsets[3], 0.008),
        ],
        axis=1,
    )
    skin_weights = raw / raw.sum(axis=1, keepdims=True)

    anchors = _unit(np.array(LANDMARK_ANCHORS)) * radii
    nearest = np.argmin(
        np.sum((template[None] - anchors[:, None]) ** 2, axis=2), axis=1
    )
    _, first = np.unique(nearest, return_index=True)
    landmarks = nearest[np.sort(first)]

    return FaceModelAsset(
        template_vertices=template,
        triangles=triangles,
        shape_basis=shape_basis,
        expression_basis=expression_basis,
        joint_offsets=joint_offsets,
        kinematic_tree=np.array(c.KINEMATIC_TREE),
        skin_weights=skin_weights,
        region_labels=_assign_regions(d),
        landmark_indices=landmarks,
    )
