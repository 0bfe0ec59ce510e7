from __future__ import annotations
from dataclasses import asdict, dataclass, field
import json
import pathlib

from core.errors import DatasetIOError, FormatError, ValidationError
from core.io.flo import read_flo_size
from core.io.image import image_size

import core.constants as c

STATUS_COMPLETE = "complete"
STATUS_INCOMPLETE = "incomplete"


@dataclass
class SequenceRecord:
    id: int
    n: int
    seed: int
    split: str = c.SPLIT_TAGS[0]
    status: str = STATUS_COMPLETE
    frames: list[str] = field(default_factory=list)
    head_frames: list[str] = field(default_factory=list)
    flows_f: list[str] = field(default_factory=list)
    flows_h: list[str] = field(default_factory=list)
    flows_e: list[str] = field(default_factory=list)
    depths: list[str] = field(default_factory=list)
    correspondences: list[str] = field(default_factory=list)
    target: dict[str, list[float]] = field(default_factory=dict)
    error: str | None = None

    @property
    def pairs(self) -> int:
        return len(self.flows_f)

    def paths(self) -> list[str]:
        return (
            self.frames
            + self.head_frames
            + self.flows_f
            + self.flows_h
            + self.flows_e
            + self.depths
            + self.correspondences
        )

    @staticmethod
    def from_json(data: dict) -> SequenceRecord:
        try:
            return SequenceRecord(**data)
        except TypeError as e:
            raise FormatError("sequences", f"malformed sequence record ({e})") from e


@dataclass
class DatasetManifest:
    version: int
    asset_fingerprint: str
    width: int
    height: int
    camera: dict
    sequences: list[SequenceRecord]
    counts: dict = field(default_factory=dict)
    asset: str = c.ASSET_NAME

    def __post_init__(self) -> None:
        if not self.counts:
            self.counts = count_records(self.sequences)

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(data: dict) -> DatasetManifest:
        try:
            sequences = [SequenceRecord.from_json(r) for r in data["sequences"]]
            return DatasetManifest(
                version=data["version"],
                asset_fingerprint=data["asset_fingerprint"],
                width=data["width"],
                height=data["height"],
                camera=data["camera"],
                sequences=sequences,
                counts=data["counts"],
                asset=data.get("asset", c.ASSET_NAME),
            )
        except (KeyError, TypeError) as e:
            raise FormatError("manifest", f"missing or malformed field {e}") from e


def count_records(records: list[SequenceRecord]) -> dict:
    splits = {
        tag: {
            "sequences": sum(r.split == tag for r in records),
            "pairs": sum(r.pairs for r in records if r.split == tag),
        }
        for tag in c.SPLIT_TAGS
    }
    return {
        "sequences": len(records),
        "pairs": sum(r.pairs for r in records),
        "incomplete": sum(r.status != STATUS_COMPLETE for r in records),
        "splits": splits,
    }


def manifest_bytes(manifest: DatasetManifest) -> bytes:
    return (json.dumps(manifest.to_json(), sort_keys=True, indent=2) + "\n").encode()


def write_manifest(manifest: DatasetManifest, root: pathlib.Path) -> pathlib.Path:
    path = root / c.MANIFEST_NAME
    try:
        path.write_bytes(manifest_bytes(manifest))
    except OSError as e:
        raise DatasetIOError(f"cannot write manifest {path}: {e}") from e
    return path


def read_manifest(root: pathlib.Path) -> DatasetManifest:
    path = root / c.MANIFEST_NAME if root.is_dir() else root
    try:
        data = json.loads(path.read_text())
    except OSError as e:
        raise DatasetIOError(f"cannot read manifest {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError("manifest", f"invalid JSON ({e})") from e
    return DatasetManifest.from_json(data)


def validate_manifest(manifest: DatasetManifest, root: pathlib.Path) -> None:
    """Raises `ValidationError` listing every broken reference or count."""
    problems: list[str] = []

    if manifest.counts != count_records(manifest.sequences):
        problems.append("counts do not match the sequence list")

    if not (root / manifest.asset).is_file():
        problems.append(f"missing asset {manifest.asset}")

    ids = [r.id for r in manifest.sequences]
    if len(set(ids)) != len(ids):
        problems.append("duplicate sequence ids")

    for record in manifest.sequences:
        if record.split not in c.SPLIT_TAGS:
            problems.append(f"sequence {record.id}: unknown split `{record.split}`")
        for rel in record.paths():
            if not (root / rel).is_file():
                problems.append(f"sequence {record.id}: missing {rel}")

        sizes = {(root / p).name: image_size(root / p) for p in record.frames if (root / p).is_file()}
        for rel in record.flows_f + record.flows_h + record.flows_e:
            if not (root / rel).is_file():
                continue
            size = read_flo_size(root / rel)
            if size != (manifest.width, manifest.height) or any(
                s != size for s in sizes.values()
            ):
                problems.append(
                    f"sequence {record.id}: {rel} is {size[0]}x{size[1]}, "
                    f"frames are {manifest.width}x{manifest.height}"
                )

    if problems:
        raise ValidationError("manifest validation failed", details=problems)
