import pathlib
import re

import numpy as np

from core.errors import DatasetIOError, FormatError

_DIMS = re.compile(rb"^\s*(\d+)\s+(\d+)\s*$")


def pfm_bytes(depth: np.ndarray) -> bytes:
    """Grayscale PFM, little-endian (negative scale), rows stored bottom-up."""
    depth = np.asarray(depth)
    if depth.ndim != 2 or depth.size == 0:
        raise FormatError("shape", f"expected a non-empty 2D depth map, got {depth.shape}")
    height, width = depth.shape
    header = b"Pf\n%d %d\n-1\n" % (width, height)
    return header + np.flipud(depth).astype("<f4").tobytes()


def pfm_from_bytes(data: bytes) -> np.ndarray:
    parts = data.split(b"\n", 3)
    if len(parts) < 4:
        raise FormatError("header", "truncated PFM header")
    kind, dims, scale_line, payload = parts

    if kind.strip() == b"PF":
        raise FormatError("header", "color PFM where a grayscale depth map was expected")
    if kind.strip() != b"Pf":
        raise FormatError("header", f"unknown PFM type {kind[:8]!r}")

    match = _DIMS.match(dims)
    if not match:
        raise FormatError("header", f"malformed PFM dimensions {dims[:32]!r}")
    width, height = int(match.group(1)), int(match.group(2))
    if width == 0 or height == 0:
        raise FormatError("header", "PFM dimensions must be positive")

    try:
        scale = float(scale_line)
    except ValueError:
        raise FormatError("header", f"malformed PFM scale {scale_line[:32]!r}") from None
    if scale == 0:
        raise FormatError("header", "PFM scale must be non-zero")
    endian = "<" if scale < 0 else ">"

    if len(payload) != width * height * 4:
        raise FormatError(
            "payload", f"expected {width * height * 4} bytes, got {len(payload)}"
        )
    values = np.frombuffer(payload, dtype=endian + "f4").reshape(height, width)
    return np.flipud(values).astype(np.float32)


def write_pfm(depth: np.ndarray, path: pathlib.Path) -> None:
    data = pfm_bytes(depth)
    try:
        with open(path, "wb") as file:
            file.write(data)
    except OSError as e:
        raise DatasetIOError(f"cannot write depth file {path}: {e}") from e


def read_pfm(path: pathlib.Path) -> np.ndarray:
    try:
        with open(path, "rb") as file:
            data = file.read()
    except OSError as e:
        raise DatasetIOError(f"cannot read depth file {path}: {e}") from e
    return pfm_from_bytes(data)
