from __future__ import annotations
from dataclasses import dataclass, field

import numpy as np

from core.camera import Camera, project_points
from core.errors import DomainError, ValidationError
from core.face_model import FaceModelAsset, Region
from core.flow import FlowField
from core.rasterizer import VisibilityBuffer
from core.sequence import MeshPairSample

import core.constants as c


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    c1: np.ndarray
    c2: np.ndarray
    regions: tuple[str | None, ...] | None = None
    ids: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        c1 = np.asarray(self.c1, dtype=np.float64).reshape(-1, 2)
        c2 = np.asarray(self.c2, dtype=np.float64).reshape(-1, 2)
        if c1.shape != c2.shape:
            raise ValidationError(f"C1 has {len(c1)} points, C2 has {len(c2)}")
        if self.regions is not None and len(self.regions) != len(c1):
            raise ValidationError("one region tag per point expected")
        if self.ids is not None and len(self.ids) != len(c1):
            raise ValidationError("one id per point expected")
        object.__setattr__(self, "c1", c1)
        object.__setattr__(self, "c2", c2)

    def __len__(self) -> int:
        return len(self.c1)


@dataclass
class EvalReport:
    epe: float
    count: int
    mask_source: str
    per_region: dict[str, float] = field(default_factory=dict)
    per_region_count: dict[str, int] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "epe": self.epe,
            "count": self.count,
            "mask_source": self.mask_source,
            "per_region": self.per_region,
            "per_region_count": self.per_region_count,
        }


def merge_reports(reports: list[EvalReport], mask_source: str) -> EvalReport:
    """Count-weighted mean of reports, reduced in list order."""
    count = sum(r.count for r in reports)
    if count == 0:
        raise DomainError("no evaluated pixels or points to merge")

    total = 0.0
    for r in reports:
        total += r.epe * r.count
    region_totals: dict[str, float] = {}
    region_counts: dict[str, int] = {}
    for r in reports:
        for name, value in r.per_region.items():
            n = r.per_region_count[name]
            region_totals[name] = region_totals.get(name, 0.0) + value * n
            region_counts[name] = region_counts.get(name, 0) + n

    return EvalReport(
        epe=total / count,
        count=count,
        mask_source=mask_source,
        per_region={
            name: region_totals[name] / n
            for name, n in sorted(region_counts.items())
            if n > 0
        },
        per_region_count=dict(sorted(region_counts.items())),
    )


def _endpoint_errors(pred: FlowField, gt: FlowField) -> np.ndarray:
    if pred.size != gt.size:
        raise ValidationError(f"prediction is {pred.size}, ground truth is {gt.size}")
    diff = pred.uv.astype(np.float64) - gt.uv.astype(np.float64)
    return np.hypot(diff[..., 0], diff[..., 1])


def masked_epe(
    pred: FlowField,
    gt: FlowField,
    mask: np.ndarray,
    regions: dict[str, np.ndarray] | None = None,
    mask_source: str = "mask",
) -> EvalReport:
    """Mean end-point error over the masked pixels, optionally split by region."""
    errors = _endpoint_errors(pred, gt)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != errors.shape:
        raise ValidationError(f"mask is {mask.shape[::-1]}, flow is {pred.size}")
    if not mask.any():
        raise DomainError("evaluation mask is empty")

    per_region: dict[str, float] = {}
    per_region_count: dict[str, int] = {}
    for name, region_mask in (regions or {}).items():
        selected = mask & region_mask
        n = int(selected.sum())
        per_region_count[name] = n
        if n:
            per_region[name] = float(errors[selected].mean())

    return EvalReport(
        epe=float(errors[mask].mean()),
        count=int(mask.sum()),
        mask_source=mask_source,
        per_region=per_region,
        per_region_count=per_region_count,
    )


def depth_mask(depth: np.ndarray, background_depth: float, eps: float) -> np.ndarray:
    if not eps > 0:
        raise DomainError(f"depth mask tolerance must be > 0, got {eps}")
    return np.asarray(depth) < background_depth - eps


def sample_bilinear(flow: FlowField, points: np.ndarray) -> np.ndarray:
    """Flow at sub-pixel points; cell (row, col) sits at (col + 0.5, row + 0.5)."""
    gx = np.clip(points[:, 0] - 0.5, 0, flow.width - 1)
    gy = np.clip(points[:, 1] - 0.5, 0, flow.height - 1)
    x0 = np.floor(gx).astype(np.int64)
    y0 = np.floor(gy).astype(np.int64)
    x1 = np.minimum(x0 + 1, flow.width - 1)
    y1 = np.minimum(y0 + 1, flow.height - 1)
    fx = (gx - x0)[:, None]
    fy = (gy - y0)[:, None]

    uv = flow.uv.astype(np.float64)
    top = uv[y0, x0] * (1 - fx) + uv[y0, x1] * fx
    bottom = uv[y1, x0] * (1 - fx) + uv[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def landmark_epe(
    flow: FlowField, corr: CorrespondenceSet, literal_sign: bool = False
) -> EvalReport:
    """Mean of |(C2 - C1) - Flow(C1)| over correspondences.

    `literal_sign` uses (C1 - C2) instead, as the formula is sometimes printed.
    """
    if len(corr) == 0:
        raise DomainError("correspondence set is empty")
    outside = np.flatnonzero(
        (corr.c1[:, 0] < 0)
        | (corr.c1[:, 0] > flow.width)
        | (corr.c1[:, 1] < 0)
        | (corr.c1[:, 1] > flow.height)
    )
    if outside.size:
        raise DomainError(
            f"{outside.size} points lie outside the {flow.width}x{flow.height} flow",
            details=[f"index {i}" for i in outside.tolist()],
        )

    displacement = corr.c1 - corr.c2 if literal_sign else corr.c2 - corr.c1
    residual = displacement - sample_bilinear(flow, corr.c1)
    errors = np.hypot(residual[:, 0], residual[:, 1])

    per_region: dict[str, float] = {}
    per_region_count: dict[str, int] = {}
    if corr.regions is not None:
        tags = np.array([r or "" for r in corr.regions])
        for name in sorted(set(tags) - {""}):
            selected = tags == name
            per_region[name] = float(errors[selected].mean())
            per_region_count[name] = int(selected.sum())

    return EvalReport(
        epe=float(errors.mean()),
        count=len(corr),
        mask_source="correspondences",
        per_region=per_region,
        per_region_count=per_region_count,
    )


def export_correspondences(
    sample: MeshPairSample,
    camera: Camera,
    asset: FaceModelAsset,
    visibility: VisibilityBuffer,
    regions: tuple[str, ...] = c.EVAL_REGIONS,
    landmarks_only: bool = False,
    eps_z: float = 1e-3,
) -> CorrespondenceSet:
    """Projected source / facial-target positions of visible tagged vertices."""
    if landmarks_only:
        index = asset.landmark_indices
    else:
        index = asset.region_vertices(tuple(Region.parse(r) for r in regions))

    c1, z1 = project_points(camera, sample.source.vertices[index])
    c2, _ = project_points(camera, sample.facial_target.vertices[index])

    col = np.floor(c1[:, 0]).astype(np.int64)
    row = np.floor(c1[:, 1]).astype(np.int64)
    keep = (col >= 0) & (col < camera.width) & (row >= 0) & (row < camera.height)
    keep &= (c2[:, 0] >= 0) & (c2[:, 0] <= camera.width)
    keep &= (c2[:, 1] >= 0) & (c2[:, 1] <= camera.height)
    keep[keep] = z1[keep] <= visibility.depth[row[keep], col[keep]] + eps_z

    index = index[keep]
    tags = tuple(Region(int(asset.region_labels[i])).tag for i in index)
    return CorrespondenceSet(c1[keep], c2[keep], tags, tuple(int(i) for i in index))


@dataclass(frozen=True)
class EmbeddingStats:
    std: float
    cv: float | None
    mean_pairwise_cosine: float

    def to_json(self) -> dict:
        return {
            "std": self.std,
            "cv": self.cv,
            "mean_pairwise_cosine": self.mean_pairwise_cosine,
        }


def mean_pairwise_cosine(vectors: np.ndarray) -> float:
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0):
        raise DomainError("cosine similarity is undefined for zero vectors")
    unit = vectors / norms[:, None]
    upper = np.triu_indices(len(vectors), k=1)
    return float((unit @ unit.T)[upper].mean())


def embedding_stats(
    vectors: np.ndarray, allow_undefined_cv: bool = False
) -> EmbeddingStats:
    """Spread of identity embeddings.

    std is the mean of per-dimension population standard deviations, cv is
    std / |mean vector| * 100 and the cosine is averaged over unordered pairs.
    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] < 2 or vectors.shape[1] < 1:
        raise DomainError(f"need at least 2 vectors of dimension >= 1, got {vectors.shape}")

    std = float(vectors.std(axis=0).mean())
    mean_norm = float(np.linalg.norm(vectors.mean(axis=0)))
    if mean_norm == 0:
        if not allow_undefined_cv:
            raise DomainError("coefficient of variation is undefined for a zero mean")
        cv = None
    else:
        cv = std / mean_norm * 100.0

    return EmbeddingStats(std, cv, mean_pairwise_cosine(vectors))
