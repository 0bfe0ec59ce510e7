from __future__ import annotations
from dataclasses import dataclass

import numpy as np

from core.errors import DomainError, FormatError

import core.constants as c


@dataclass(frozen=True, eq=False)
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray
    width: int
    height: int

    def __post_init__(self) -> None:
        rotation = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

        if not (self.fx > 0 and self.fy > 0):
            raise DomainError(f"focal lengths must be > 0, got {self.fx, self.fy}")
        if self.width < 8 or self.height < 8:
            raise DomainError(
                f"image must be at least 8x8, got {self.width}x{self.height}"
            )
        if not np.allclose(rotation @ rotation.T, np.eye(3), rtol=0, atol=1e-9):
            raise DomainError("camera rotation is not orthonormal")

    @staticmethod
    def default(
        width: int = c.DESK_RESOLUTION,
        height: int = c.DESK_RESOLUTION,
        distance: float = c.CAMERA_DISTANCE,
    ) -> Camera:
        """Looks down the template -z axis at the head, image y pointing down."""
        focal = c.FOCAL_PER_HEIGHT * height
        return Camera(
            fx=focal,
            fy=focal,
            cx=width / 2,
            cy=height / 2,
            rotation=np.diag([1.0, -1.0, -1.0]),
            translation=np.array([0.0, 0.0, distance]),
            width=width,
            height=height,
        )

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height

    def scaled(self, factor: float) -> Camera:
        return Camera(
            self.fx * factor,
            self.fy * factor,
            self.cx * factor,
            self.cy * factor,
            self.rotation,
            self.translation,
            int(round(self.width * factor)),
            int(round(self.height * factor)),
        )

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def to_json(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "width": self.width,
            "height": self.height,
        }

    @staticmethod
    def from_json(data: dict) -> Camera:
        try:
            return Camera(**data)
        except TypeError as e:
            raise FormatError("camera", f"malformed camera ({e})") from e


def project_camera_points(
    camera: Camera, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Pinhole projection of camera-frame points: (N, 2) pixels and (N,) depths."""
    x, y, z = np.asarray(points, dtype=np.float64).T
    uv = np.stack([camera.fx * x / z + camera.cx, camera.fy * y / z + camera.cy], 1)
    return uv, z


def project_points(camera: Camera, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return project_camera_points(camera, camera.to_camera(points))


def project(
    camera: Camera, point, near: float = 0.0
) -> tuple[np.ndarray, float]:
    uv, z = project_points(camera, np.asarray(point, dtype=np.float64).reshape(1, 3))
    if not z[0] > near:
        raise DomainError(f"point at depth {z[0]:.6g} is not in front of the camera")
    return uv[0], float(z[0])
