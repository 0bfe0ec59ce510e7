import pathlib

import numpy as np

from core.errors import DatasetIOError, FormatError, ValidationError
from core.flow import FlowField

import core.constants as c

_HEADER = np.dtype([("magic", "<f4"), ("width", "<i4"), ("height", "<i4")])


def flo_bytes(flow: FlowField) -> bytes:
    """Middlebury layout: magic, width, height, then interleaved (u, v) rows."""
    if flow.width <= 0 or flow.height <= 0:
        raise ValidationError("flow must have positive dimensions")
    if not np.all(np.isfinite(flow.uv[flow.valid])):
        raise ValidationError("cannot write non-finite flow")

    header = np.array([(c.FLO_MAGIC, flow.width, flow.height)], dtype=_HEADER)
    data = flow.uv.astype("<f4", copy=True)
    data[~flow.valid] = c.UNKNOWN_FLOW
    return header.tobytes() + data.tobytes()


def flo_from_bytes(data: bytes) -> FlowField:
    if len(data) < _HEADER.itemsize:
        raise FormatError("header", f"{len(data)} bytes is too short for a .flo header")

    header = np.frombuffer(data, dtype=_HEADER, count=1)[0]
    if header["magic"] != c.FLO_MAGIC:
        raise FormatError("magic", f"expected 202021.25, got {header['magic']}")

    width, height = int(header["width"]), int(header["height"])
    if width <= 0 or height <= 0 or width * height > (1 << 31) // 8:
        raise FormatError("size", f"invalid flow size {width}x{height}")

    payload = len(data) - _HEADER.itemsize
    expected = width * height * 8
    if payload != expected:
        raise FormatError("payload", f"expected {expected} bytes of flow, got {payload}")

    uv = np.frombuffer(data, dtype="<f4", offset=_HEADER.itemsize)
    uv = uv.reshape(height, width, 2).astype(np.float32)
    valid = np.all(np.abs(uv) < c.UNKNOWN_FLOW_THRESH, axis=2)
    return FlowField(uv, valid)


def write_flo(flow: FlowField, path: pathlib.Path) -> None:
    data = flo_bytes(flow)
    try:
        with open(path, "wb") as file:
            file.write(data)
    except OSError as e:
        raise DatasetIOError(f"cannot write flow file {path}: {e}") from e


def read_flo(path: pathlib.Path) -> FlowField:
    try:
        with open(path, "rb") as file:
            data = file.read()
    except OSError as e:
        raise DatasetIOError(f"cannot read flow file {path}: {e}") from e
    return flo_from_bytes(data)


def read_flo_size(path: pathlib.Path) -> tuple[int, int]:
    with open(path, "rb") as file:
        head = file.read(_HEADER.itemsize)
    if len(head) < _HEADER.itemsize:
        raise FormatError("header", f"{path} is too short for a .flo header")
    header = np.frombuffer(head, dtype=_HEADER, count=1)[0]
    if header["magic"] != c.FLO_MAGIC:
        raise FormatError("magic", f"{path} is not a .flo file")
    return int(header["width"]), int(header["height"])
