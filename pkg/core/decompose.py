from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
import logging

import numpy as np
from scipy.linalg import lstsq
import statsmodels.api as sm

from core.errors import DomainError, RankError
from core.flow import FlowField

import core.constants as c

logger = logging.getLogger(__name__)


class ModelKind(Enum):
    Translation = "translation"
    Similarity = "similarity"
    Affine = "affine"

    @property
    def num_coefficients(self) -> int:
        return {"translation": 2, "similarity": 4, "affine": 6}[self.value]

    @property
    def min_support(self) -> int:
        return {"translation": 1, "similarity": 2, "affine": 3}[self.value]


class RobustLoss(Enum):
    Huber = "huber"
    Tukey = "tukey"


def _design(kind: ModelKind, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Rows for u of every pixel, then rows for v."""
    one, zero = np.ones_like(x), np.zeros_like(x)
    match kind:
        case ModelKind.Translation:
            rows_u = [one, zero]
            rows_v = [zero, one]
        case ModelKind.Similarity:
            # (tx, ty, a, b): u = tx + a x - b y, v = ty + b x + a y
            rows_u = [one, zero, x, -y]
            rows_v = [zero, one, y, x]
        case ModelKind.Affine:
            # u = a0 + a1 x + a2 y, v = a3 + a4 x + a5 y
            rows_u = [one, x, y, zero, zero, zero]
            rows_v = [zero, zero, zero, one, x, y]
    return np.vstack([np.stack(rows_u, axis=1), np.stack(rows_v, axis=1)])


def pixel_centers(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:height, 0:width]
    return xs + 0.5, ys + 0.5


@dataclass(frozen=True, eq=False)
class MotionModel:
    kind: ModelKind
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        coefficients = np.array(self.coefficients, dtype=np.float64).reshape(-1)
        if coefficients.size != self.kind.num_coefficients:
            raise DomainError(
                f"{self.kind.value} model takes {self.kind.num_coefficients} "
                f"coefficients, got {coefficients.size}"
            )
        if not np.all(np.isfinite(coefficients)):
            raise DomainError("motion model has non-finite coefficients")
        object.__setattr__(self, "coefficients", coefficients)

    @staticmethod
    def zero(kind: ModelKind) -> MotionModel:
        return MotionModel(kind, np.zeros(kind.num_coefficients))

    def displacement(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x, y = np.ravel(x), np.ravel(y)
        stacked = _design(self.kind, x, y) @ self.coefficients
        return np.stack([stacked[: x.size], stacked[x.size :]], axis=1)

    def field(self, width: int, height: int) -> np.ndarray:
        xs, ys = pixel_centers(width, height)
        return self.displacement(xs, ys).reshape(height, width, 2)

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "coefficients": self.coefficients.tolist()}


@dataclass(frozen=True)
class IRLSConfig:
    loss: RobustLoss = RobustLoss.Tukey
    # huber threshold, or tukey sigma; None means estimated from the data
    scale: float | None = None
    max_iterations: int = c.IRLS_MAX_ITERATIONS
    tolerance: float = c.IRLS_TOLERANCE

    def __post_init__(self) -> None:
        if self.scale is not None and not self.scale > 0:
            raise DomainError(f"robust scale must be > 0, got {self.scale}")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")
        if not self.tolerance > 0:
            raise DomainError("tolerance must be > 0")


@dataclass
class FitDiagnostics:
    iterations: int
    objective: float
    inlier_fraction: float
    converged: bool
    scale: float
    objective_history: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "iterations": self.iterations,
            "objective": self.objective,
            "inlier_fraction": self.inlier_fraction,
            "converged": self.converged,
            "scale": self.scale,
            "objective_history": self.objective_history,
        }


class _Loss:
    """Robust norm on residual norms in pixels, at a fixed scale."""

    def __init__(self, loss: RobustLoss, scale: float) -> None:
        self.loss = loss
        self.scale = scale
        if loss == RobustLoss.Huber:
            # the huber threshold is the scale, residuals stay in pixels
            self.norm = sm.robust.norms.HuberT(t=scale)
            self.unit = 1.0
        else:
            self.norm = sm.robust.norms.TukeyBiweight(c=c.TUKEY_C)
            self.unit = scale

    def rho(self, r: np.ndarray) -> np.ndarray:
        return self.unit**2 * self.norm.rho(r / self.unit)

    def weights(self, r: np.ndarray) -> np.ndarray:
        return self.norm.weights(r / self.unit)


def robust_sigma(r: np.ndarray) -> float:
    """Normalized median absolute deviation about the median, floored."""
    return max(float(sm.robust.scale.mad(r)), c.MIN_ROBUST_SIGMA)


def _solve(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    sw = np.sqrt(np.concatenate([w, w]))
    solution, *_ = lstsq(a * sw[:, None], b * sw, lapack_driver="gelsd")
    return solution


def _residual_norms(a: np.ndarray, b: np.ndarray, coef: np.ndarray) -> np.ndarray:
    r = b - a @ coef
    half = r.size // 2
    return np.hypot(r[:half], r[half:])


def _has_full_rank(a: np.ndarray, support: np.ndarray, kind: ModelKind) -> bool:
    rows = np.concatenate([support, support])
    return (
        int(support.sum()) >= kind.min_support
        and np.linalg.matrix_rank(a[rows]) == kind.num_coefficients
    )


def _uncenter(kind: ModelKind, coef: np.ndarray, x0: float, y0: float) -> np.ndarray:
    """Coefficients fitted about (x0, y0), moved back to the pixel origin."""
    coef = coef.copy()
    match kind:
        case ModelKind.Similarity:
            tx, ty, a, b = coef
            coef[0] = tx - a * x0 + b * y0
            coef[1] = ty - b * x0 - a * y0
        case ModelKind.Affine:
            coef[0] -= coef[1] * x0 + coef[2] * y0
            coef[3] -= coef[4] * x0 + coef[5] * y0
    return coef


def fit_head_motion(
    flow: FlowField,
    face_mask: np.ndarray,
    model_kind: ModelKind,
    config: IRLSConfig = IRLSConfig(),
) -> tuple[MotionModel, FitDiagnostics]:
    """Robust fit of a parametric motion to the masked flow by IRLS.

    Starts from the unweighted least-squares solution; the robust scale is fixed
    after that first fit so the objective is non-increasing. The solve runs in
    coordinates centred on the masked pixels.
    """
    face_mask = np.asarray(face_mask, dtype=bool)
    if face_mask.shape != (flow.height, flow.width):
        raise DomainError(
            f"face mask of shape {face_mask.shape} does not match the "
            f"{flow.height}x{flow.width} flow"
        )
    mask = face_mask & flow.valid

    xs, ys = pixel_centers(flow.width, flow.height)
    x, y = xs[mask], ys[mask]
    x0, y0 = (float(x.mean()), float(y.mean())) if x.size else (0.0, 0.0)
    a = _design(model_kind, x - x0, y - y0)
    b = np.concatenate([flow.u[mask], flow.v[mask]]).astype(np.float64)

    if not _has_full_rank(a, np.ones(x.size, bool), model_kind):
        raise RankError(
            f"{x.size} masked pixels do not determine a {model_kind.value} model"
        )

    coef = _solve(a, b, np.ones(x.size))
    r = _residual_norms(a, b, coef)

    if config.scale is not None:
        scale = config.scale
    elif config.loss == RobustLoss.Huber:
        scale = c.HUBER_SCALE
    else:
        scale = robust_sigma(r)
    loss = _Loss(config.loss, scale)

    objective = float(loss.rho(r).sum())
    history = [objective]
    best_coef, best_objective = coef, objective
    converged = False
    iterations = 0

    while iterations < config.max_iterations:
        w = loss.weights(r)
        if not _has_full_rank(a, w > 0, model_kind):
            logger.warning("robust weights left a rank-deficient support, stopping")
            break

        new_coef = _solve(a, b, w)
        iterations += 1
        r = _residual_norms(a, b, new_coef)
        objective = float(loss.rho(r).sum())
        history.append(objective)
        if objective <= best_objective:
            best_coef, best_objective = new_coef, objective

        change = float(np.max(np.abs(new_coef - coef)))
        coef = new_coef
        if change <= config.tolerance:
            converged = True
            break

    if not converged:
        logger.info(f"IRLS stopped after {iterations} iterations without converging")

    r = _residual_norms(a, b, best_coef)
    diagnostics = FitDiagnostics(
        iterations=iterations,
        objective=best_objective,
        inlier_fraction=float(np.mean(r <= c.INLIER_FACTOR * scale)),
        converged=converged,
        scale=scale,
        objective_history=history,
    )
    model = MotionModel(model_kind, _uncenter(model_kind, best_coef, x0, y0))
    return model, diagnostics


def decompose_flow(
    flow: FlowField,
    face_mask: np.ndarray,
    model: MotionModel,
    extrapolate: bool = False,
) -> tuple[FlowField, FlowField]:
    """Splits `flow` into parametric head flow and residual expression flow.

    head + expression reproduces `flow` bitwise in float32. A pixel whose head
    flow cannot sit next to its input flow at float32 precision is given to the
    expression flow whole.
    """
    mask = np.ones(flow.uv.shape[:2], bool) if extrapolate else np.asarray(face_mask, bool)
    head = np.zeros_like(flow.uv)
    head[mask] = model.field(flow.width, flow.height)[mask].astype(np.float32)

    expression = flow.uv - head
    head = flow.uv - expression
    lossy = (expression + head) != flow.uv
    head[lossy] = 0.0
    expression[lossy] = flow.uv[lossy]

    return (
        FlowField(head, flow.valid.copy(), flow.occlusion),
        FlowField(expression, flow.valid.copy(), flow.occlusion),
    )
