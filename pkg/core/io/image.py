import os
import pathlib

import numpy as np

os.environ.setdefault("PYGAME_HIDE_SUPPORT_PROMPT", "1")
import pygame  # noqa: E402

from core.errors import DatasetIOError, FormatError  # noqa: E402


def _surface(image: np.ndarray) -> pygame.Surface:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise FormatError("image", f"expected (H, W, 3) uint8, got {image.shape} {image.dtype}")
    # surfarray is indexed (x, y)
    return pygame.surfarray.make_surface(np.ascontiguousarray(image.transpose(1, 0, 2)))


def write_png(image: np.ndarray, path: pathlib.Path) -> None:
    surface = _surface(image)
    try:
        pygame.image.save(surface, str(path))
    except (pygame.error, OSError) as e:
        raise DatasetIOError(f"cannot write image {path}: {e}") from e


def read_png(path: pathlib.Path) -> np.ndarray:
    try:
        surface = pygame.image.load(str(path))
    except (pygame.error, FileNotFoundError) as e:
        raise DatasetIOError(f"cannot read image {path}: {e}") from e
    return np.ascontiguousarray(pygame.surfarray.array3d(surface).transpose(1, 0, 2))


def image_size(path: pathlib.Path) -> tuple[int, int]:
    try:
        return pygame.image.load(str(path)).get_size()
    except (pygame.error, FileNotFoundError) as e:
        raise DatasetIOError(f"cannot read image {path}: {e}") from e


def load_background(path: pathlib.Path, width: int, height: int) -> np.ndarray:
    """A background photo resampled to the frame size."""
    try:
        surface = pygame.image.load(str(path))
    except (pygame.error, FileNotFoundError) as e:
        raise DatasetIOError(f"cannot read background {path}: {e}") from e
    if surface.get_bitsize() < 24:
        # smoothscale needs 24 or 32 bit pixels
        surface = pygame.surfarray.make_surface(pygame.surfarray.array3d(surface))
    scaled = pygame.transform.smoothscale(surface, (width, height))
    return np.ascontiguousarray(pygame.surfarray.array3d(scaled).transpose(1, 0, 2))


def list_backgrounds(directory: pathlib.Path | None) -> list[pathlib.Path]:
    if directory is None:
        return []
    if not directory.is_dir():
        raise DatasetIOError(f"background directory {directory} not found")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() == ".png")
