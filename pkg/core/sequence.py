from __future__ import annotations
from dataclasses import dataclass, field
import json
import pathlib

import numpy as np

from core.errors import DomainError, FormatError
from core.face_model import FaceModelAsset, FaceParams, Mesh, evaluate_model

import core.constants as c


@dataclass(frozen=True)
class SampleBounds:
    global_rotation: float = c.MAX_GLOBAL_ROTATION
    neck: float = c.MAX_NECK_ROTATION
    jaw: float = c.MAX_JAW_ROTATION
    eyes: float = c.MAX_EYE_ROTATION
    psi: float = c.MAX_PSI
    beta: float = c.MAX_BETA

    @staticmethod
    def from_json(data: dict) -> SampleBounds:
        if not isinstance(data, dict):
            raise TypeError("sample bounds must be a JSON object")
        bounds = SampleBounds()
        unknown = set(data) - set(bounds.__dataclass_fields__)
        if unknown:
            raise TypeError(f"unknown sample bounds {sorted(unknown)}")
        for name, value in data.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value < 0:
                raise ValueError(f"sample bound '{name}' must be a number >= 0")
        return SampleBounds(**{k: float(v) for k, v in data.items()})


def _in_ball(rng: np.random.Generator, radius: float) -> np.ndarray:
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    return direction * radius * rng.uniform() ** (1 / 3)


def sample_target_params(
    asset: FaceModelAsset, rng: np.random.Generator, bounds: SampleBounds
) -> FaceParams:
    theta = np.zeros(asset.pose_dim)
    theta[0:3] = _in_ball(rng, bounds.global_rotation)
    theta[3:6] = _in_ball(rng, bounds.neck)
    # jaw only opens, about the template x axis
    theta[6] = rng.uniform(0.0, bounds.jaw)
    for j in range(3, asset.k + 1):
        theta[3 * j : 3 * j + 3] = _in_ball(rng, bounds.eyes)

    beta = rng.uniform(-bounds.beta, bounds.beta, asset.n_beta)
    psi = rng.uniform(-bounds.psi, bounds.psi, asset.n_psi)
    return FaceParams(beta, psi, theta)


@dataclass(frozen=True, eq=False)
class SequenceSpec:
    asset: FaceModelAsset
    target: FaceParams
    n: int
    seed: int = 0
    allow_any_n: bool = False

    def __post_init__(self) -> None:
        if self.allow_any_n:
            if self.n < 2:
                raise DomainError(f"frame count must be >= 2, got {self.n}")
        elif self.n not in c.ALLOWED_FRAME_COUNTS:
            raise DomainError(
                f"frame count {self.n} not in {c.ALLOWED_FRAME_COUNTS} "
                "(pass allow_any_n for other lengths)"
            )

    @property
    def pair_indices(self) -> range:
        return range(1, self.n)


@dataclass(frozen=True, eq=False)
class MeshPairSample:
    source: Mesh
    facial_target: Mesh
    head_target: Mesh
    t: int


def _interpolate(value: np.ndarray, t: int, n: int) -> np.ndarray:
    # the last frame uses the target exactly
    if t == n:
        return value
    return value * t / n


def facial_mesh(spec: SequenceSpec, t: int) -> Mesh:
    if not (0 <= t <= spec.n):
        raise DomainError(f"frame {t} outside [0, {spec.n}]")

    target = spec.target
    params = FaceParams(
        target.beta,
        _interpolate(target.psi, t, spec.n),
        _interpolate(target.theta, t, spec.n),
    )
    return evaluate_model(spec.asset, params)


def head_mesh(spec: SequenceSpec, t_plus_1: int) -> Mesh:
    """Pose advanced to frame t+1 while the expression stays at frame t."""
    if not (1 <= t_plus_1 <= spec.n):
        raise DomainError(f"head frame {t_plus_1} outside [1, {spec.n}]")

    target = spec.target
    params = FaceParams(
        target.beta,
        _interpolate(target.psi, t_plus_1 - 1, spec.n),
        _interpolate(target.theta, t_plus_1, spec.n),
    )
    return evaluate_model(spec.asset, params)


def generate_sequence(spec: SequenceSpec) -> list[MeshPairSample]:
    """Pairs for t in [1, n-1]; list position i holds pair index t = i + 1."""
    facial = {t: facial_mesh(spec, t) for t in range(1, spec.n + 1)}
    return [
        MeshPairSample(facial[t], facial[t + 1], head_mesh(spec, t + 1), t)
        for t in spec.pair_indices
    ]


@dataclass
class SequenceFile:
    asset_path: pathlib.Path
    n: int
    seed: int
    target: dict[str, list[float]] | None = None
    bounds: SampleBounds = field(default_factory=SampleBounds)

    @staticmethod
    def read(path: pathlib.Path) -> SequenceFile:
        try:
            with open(path, "r") as file:
                data = json.load(file)
        except (OSError, json.JSONDecodeError) as e:
            raise FormatError(str(path), f"unreadable sequence file ({e})") from e
        if not isinstance(data, dict):
            raise FormatError(str(path), "sequence file must be a JSON object")

        asset_path = data.get("asset_path")
        if not isinstance(asset_path, str):
            raise FormatError("asset_path", "must be a string path")

        n = data.get("n")
        if not isinstance(n, int):
            raise FormatError("n", "must be an integer frame count")

        seed = data.get("seed", 0)
        if not isinstance(seed, int):
            raise FormatError("seed", "must be an integer")

        target = None
        if any(key in data for key in ("beta", "theta", "psi")):
            target = {}
            for key in ("beta", "theta", "psi"):
                values = data.get(key)
                if not isinstance(values, list) or not all(
                    isinstance(v, (int, float)) for v in values
                ):
                    raise FormatError(key, "must be a list of numbers")
                target[key] = [float(v) for v in values]

        try:
            bounds = SampleBounds.from_json(data.get("sample_bounds", {}))
        except (TypeError, ValueError) as e:
            raise FormatError("sample_bounds", str(e)) from e

        # relative asset paths resolve against the sequence file
        resolved = (pathlib.Path(path).parent / asset_path).resolve()
        return SequenceFile(resolved, n, seed, target, bounds)

    def to_spec(self, asset: FaceModelAsset, allow_any_n: bool = False) -> SequenceSpec:
        if self.target is not None:
            params = FaceParams(
                np.array(self.target["beta"]),
                np.array(self.target["psi"]),
                np.array(self.target["theta"]),
            )
        else:
            rng = np.random.default_rng(self.seed)
            params = sample_target_params(asset, rng, self.bounds)
        return SequenceSpec(asset, params, self.n, self.seed, allow_any_n)
