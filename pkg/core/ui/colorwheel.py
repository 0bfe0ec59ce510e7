import numpy as np

from core.errors import DomainError
from core.flow import FlowField

import core.constants as c

_WHEEL: np.ndarray | None = None


def color_wheel() -> np.ndarray:
    """Middlebury wheel: (55, 3) floats, red -> yellow -> green -> cyan -> blue -> magenta."""
    global _WHEEL
    if _WHEEL is not None:
        return _WHEEL

    wheel = []
    ramps = (
        ((1, 0, 0), (0, 1, 0)),  # red to yellow
        ((1, 1, 0), (-1, 0, 0)),  # yellow to green
        ((0, 1, 0), (0, 0, 1)),  # green to cyan
        ((0, 1, 1), (0, -1, 0)),  # cyan to blue
        ((0, 0, 1), (1, 0, 0)),  # blue to magenta
        ((1, 0, 1), (0, 0, -1)),  # magenta to red
    )
    for count, (start, step) in zip(c.COLORWHEEL_SEGMENTS, ramps):
        ramp = np.arange(count, dtype=np.float64)[:, None] / count
        wheel.append(np.array(start, dtype=np.float64) + ramp * np.array(step))

    _WHEEL = np.concatenate(wheel)
    return _WHEEL


def _colorize(u: np.ndarray, v: np.ndarray, max_magnitude: float) -> np.ndarray:
    wheel = color_wheel()
    ncols = len(wheel)

    angle = np.arctan2(-v, -u) / np.pi
    # both ends of the angle range land on the first (pure red) column
    index = np.mod((angle + 1.0) / 2.0 * ncols, ncols)
    i0 = np.floor(index).astype(np.int64) % ncols
    i1 = (i0 + 1) % ncols
    alpha = (index - np.floor(index))[..., None]
    color = (1.0 - alpha) * wheel[i0] + alpha * wheel[i1]

    radius = np.clip(np.hypot(u, v) / max_magnitude, 0.0, 1.0)[..., None]
    return 1.0 - radius * (1.0 - color)


def flow_to_colorwheel_png(
    flow: FlowField, max_magnitude: float | None = None
) -> np.ndarray:
    """(H, W, 3) uint8 visualization; hue is direction, saturation is magnitude.

    Magnitudes above `max_magnitude` saturate. Without it the largest valid
    magnitude is used. Invalid pixels are black.
    """
    u = flow.u.astype(np.float64)
    v = flow.v.astype(np.float64)

    if max_magnitude is None:
        magnitudes = np.hypot(u, v)[flow.valid]
        max_magnitude = float(magnitudes.max()) if magnitudes.size else 0.0
        # an all-zero field renders white
        max_magnitude = max(max_magnitude, 1e-5)
    elif not max_magnitude > 0:
        raise DomainError(f"max magnitude must be > 0, got {max_magnitude}")

    color = _colorize(u, v, max_magnitude)
    color[~flow.valid] = 0.0
    return np.clip(np.rint(color * 255.0), 0, 255).astype(np.uint8)


def colorwheel_legend(size: int = 256) -> np.ndarray:
    """Disc of unit flows, white outside the unit circle."""
    if size < 2:
        raise DomainError(f"legend size must be >= 2, got {size}")
    centers = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    u, v = np.meshgrid(centers, centers)
    color = _colorize(u, v, 1.0)
    color[np.hypot(u, v) > 1.0] = 1.0
    return np.clip(np.rint(color * 255.0), 0, 255).astype(np.uint8)
