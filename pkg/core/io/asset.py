import hashlib
import pathlib

import numpy as np

from core.errors import DatasetIOError, FormatError
from core.face_model import FaceModelAsset, check_asset

import core.constants as c

# magic, version, n_v, n_f, |β|, |ψ|, k, landmark count
_HEADER = np.dtype(
    [
        ("magic", "S4"),
        ("version", "<u4"),
        ("n_v", "<u4"),
        ("n_f", "<u4"),
        ("n_beta", "<u4"),
        ("n_psi", "<u4"),
        ("k", "<u4"),
        ("n_landmarks", "<u4"),
    ]
)


def _layout(n_v: int, n_f: int, n_beta: int, n_psi: int, k: int, n_lm: int):
    """(field, dtype, shape) of every payload array, in file order."""
    return (
        ("template_vertices", "<f8", (n_v, 3)),
        ("triangles", "<u4", (n_f, 3)),
        ("shape_basis", "<f8", (n_beta, n_v, 3)),
        ("expression_basis", "<f8", (n_psi, n_v, 3)),
        ("joint_offsets", "<f8", (k, 3)),
        ("kinematic_tree", "<i4", (k,)),
        ("skin_weights", "<f8", (n_v, k + 1)),
        ("region_labels", "<u1", (n_v,)),
        ("landmark_indices", "<u4", (n_lm,)),
    )


def asset_to_bytes(asset: FaceModelAsset) -> bytes:
    check_asset(asset)
    dims = (asset.n_v, asset.n_f, asset.n_beta, asset.n_psi, asset.k)
    n_lm = asset.landmark_indices.size
    header = np.array([(c.ASSET_MAGIC, c.ASSET_VERSION, *dims, n_lm)], dtype=_HEADER)

    chunks = [header.tobytes()]
    for name, dtype, _ in _layout(*dims, n_lm):
        chunks.append(np.ascontiguousarray(getattr(asset, name)).astype(dtype).tobytes())
    return b"".join(chunks)


def asset_from_bytes(data: bytes) -> FaceModelAsset:
    if len(data) < _HEADER.itemsize:
        raise FormatError("header", f"{len(data)} bytes is too short for an asset header")
    header = np.frombuffer(data, dtype=_HEADER, count=1)[0]
    if header["magic"] != c.ASSET_MAGIC:
        raise FormatError("magic", f"expected {c.ASSET_MAGIC!r}, got {header['magic']!r}")
    if header["version"] != c.ASSET_VERSION:
        raise FormatError("version", f"unsupported asset version {header['version']}")

    dims = [int(header[name]) for name in _HEADER.names[2:]]
    offset = _HEADER.itemsize
    fields = {}
    for name, dtype, shape in _layout(*dims):
        count = int(np.prod(shape))
        nbytes = count * np.dtype(dtype).itemsize
        if offset + nbytes > len(data):
            raise FormatError(name, "truncated payload")
        fields[name] = np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(
            shape
        )
        offset += nbytes
    if offset != len(data):
        raise FormatError("payload", f"{len(data) - offset} trailing bytes")

    try:
        asset = FaceModelAsset(**fields)
    except ValueError as e:
        raise FormatError("payload", str(e)) from e
    check_asset(asset)
    return asset


def save_asset(asset: FaceModelAsset, path: pathlib.Path) -> None:
    data = asset_to_bytes(asset)
    try:
        with open(path, "wb") as file:
            file.write(data)
    except OSError as e:
        raise DatasetIOError(f"cannot write asset {path}: {e}") from e


def load_asset(path: pathlib.Path) -> FaceModelAsset:
    try:
        with open(path, "rb") as file:
            data = file.read()
    except OSError as e:
        raise DatasetIOError(f"cannot read asset {path}: {e}") from e
    return asset_from_bytes(data)


def asset_fingerprint(asset: FaceModelAsset) -> str:
    return hashlib.sha256(asset_to_bytes(asset)).hexdigest()[:16]
