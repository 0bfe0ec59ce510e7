from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
import json
import pathlib

from core.decompose import ModelKind, RobustLoss
from core.errors import FormatError
from core.sequence import SampleBounds

import core.constants as c


class Command(Enum):
    Gen = "gen"
    Eval = "eval"
    Decompose = "decompose"
    Viz = "viz"
    Split = "split"
    Asset = "asset"


class FlowKind(Enum):
    Facial = "f"
    Head = "h"
    Expression = "e"


@dataclass
class GenArgs:
    root: pathlib.Path
    seed: int
    workers: int
    num_sequences: int
    frame_counts: list[int]
    width: int
    height: int
    asset_path: pathlib.Path | None
    asset_seed: int
    num_vertices: int
    backgrounds: pathlib.Path | None
    split_ratios: tuple[int, int, int]
    bounds: SampleBounds
    sequence_files: list[pathlib.Path]
    camera_distance: float
    correspondences: bool
    allow_any_n: bool


@dataclass
class EvalArgs:
    root: pathlib.Path
    predictions: pathlib.Path
    output: pathlib.Path | None
    flow_kind: FlowKind
    split: str | None
    regions: bool
    exclude_occluded: bool
    landmarks: bool
    literal_sign: bool
    decompose: ModelKind | None
    loss: RobustLoss


@dataclass
class DecomposeArgs:
    flow: pathlib.Path
    depth: pathlib.Path
    output: pathlib.Path
    model: ModelKind
    loss: RobustLoss
    scale: float | None
    max_iterations: int
    extrapolate: bool


@dataclass
class VizArgs:
    flow: pathlib.Path
    output: pathlib.Path
    max_magnitude: float | None
    legend: pathlib.Path | None


@dataclass
class SplitArgs:
    root: pathlib.Path
    ratios: tuple[int, int, int]
    seed: int


@dataclass
class AssetArgs:
    action: str
    path: pathlib.Path
    seed: int
    num_vertices: int
    num_beta: int
    num_psi: int


@dataclass
class Args:
    command: Command
    log_level: str
    gen: GenArgs | None = None
    eval: EvalArgs | None = None
    decompose: DecomposeArgs | None = None
    viz: VizArgs | None = None
    split: SplitArgs | None = None
    asset: AssetArgs | None = None


def _read_object(path: pathlib.Path) -> dict:
    try:
        with open(path, "r") as file:
            data = json.load(file)
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(str(path), f"unreadable config ({e})") from e
    if not isinstance(data, dict):
        raise FormatError(str(path), "config must be a JSON object")
    return data


def _check_keys(data: dict, known: set[str]) -> None:
    unknown = set(data) - known
    if unknown:
        raise FormatError(sorted(unknown)[0], "unknown config key")


def _positive_int(data: dict, key: str) -> int | None:
    value = data.get(key)
    if value is None:
        return None
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise FormatError(key, "must be an integer >= 1")
    return value


def _int(data: dict, key: str) -> int | None:
    value = data.get(key)
    if value is None:
        return None
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise FormatError(key, "must be an integer >= 0")
    return value


def _bool(data: dict, key: str) -> bool | None:
    value = data.get(key)
    if value is not None and not isinstance(value, bool):
        raise FormatError(key, "must be true or false")
    return value


def _path(data: dict, key: str, base: pathlib.Path) -> pathlib.Path | None:
    value = data.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise FormatError(key, "must be a path string")
    # relative to the config file
    return (base / value).resolve()


class ConfigValue(Enum):
    Int = "int"
    PositiveInt = "positive_int"
    Number = "number"
    Bool = "bool"
    String = "string"
    Path = "path"
    Ratios = "ratios"

    def read(self, data: dict, key: str, base: pathlib.Path):
        match self:
            case ConfigValue.Int:
                return _int(data, key)
            case ConfigValue.PositiveInt:
                return _positive_int(data, key)
            case ConfigValue.Bool:
                return _bool(data, key)
            case ConfigValue.Path:
                return _path(data, key, base)

        value = data.get(key)
        if value is None:
            return None
        match self:
            case ConfigValue.Number:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise FormatError(key, "must be a number")
                return float(value)
            case ConfigValue.String:
                if not isinstance(value, str):
                    raise FormatError(key, "must be a string")
                return value
            case ConfigValue.Ratios:
                if (
                    not isinstance(value, list)
                    or len(value) != len(c.SPLIT_TAGS)
                    or not all(isinstance(r, int) and r > 0 for r in value)
                ):
                    raise FormatError(key, "must be 3 positive integers")
                return (value[0], value[1], value[2])


# config keys of the subcommands other than `gen`, named after their flags
EVAL_CONFIG = {
    "root": ConfigValue.Path,
    "predictions": ConfigValue.Path,
    "output": ConfigValue.Path,
    "flow": ConfigValue.String,
    "split": ConfigValue.String,
    "regions": ConfigValue.Bool,
    "exclude_occluded": ConfigValue.Bool,
    "landmarks": ConfigValue.Bool,
    "literal_sign": ConfigValue.Bool,
    "decompose": ConfigValue.String,
    "loss": ConfigValue.String,
}
DECOMPOSE_CONFIG = {
    "flow": ConfigValue.Path,
    "depth": ConfigValue.Path,
    "output": ConfigValue.Path,
    "model": ConfigValue.String,
    "loss": ConfigValue.String,
    "scale": ConfigValue.Number,
    "max_iterations": ConfigValue.PositiveInt,
    "extrapolate": ConfigValue.Bool,
}
VIZ_CONFIG = {
    "flow": ConfigValue.Path,
    "output": ConfigValue.Path,
    "max_magnitude": ConfigValue.Number,
    "legend": ConfigValue.Path,
}
SPLIT_CONFIG = {
    "root": ConfigValue.Path,
    "ratios": ConfigValue.Ratios,
    "seed": ConfigValue.Int,
}
ASSET_CONFIG = {
    "action": ConfigValue.String,
    "path": ConfigValue.Path,
    "seed": ConfigValue.Int,
    "num_vertices": ConfigValue.PositiveInt,
    "num_beta": ConfigValue.PositiveInt,
    "num_psi": ConfigValue.PositiveInt,
}


@dataclass
class CommandConfig:
    """Values of a flat subcommand config; missing keys are absent."""

    values: dict[str, object] = field(default_factory=dict)

    def get(self, key: str):
        return self.values.get(key)

    @staticmethod
    def read(path: pathlib.Path, schema: dict[str, ConfigValue]) -> CommandConfig:
        data = _read_object(path)
        _check_keys(data, set(schema))
        base = pathlib.Path(path).parent
        values = {key: kind.read(data, key, base) for key, kind in schema.items()}
        return CommandConfig({k: v for k, v in values.items() if v is not None})


@dataclass
class GenConfig:
    """Optional fields of a generation config file; missing keys stay None."""

    root: pathlib.Path | None = None
    seed: int | None = None
    workers: int | None = None
    num_sequences: int | None = None
    frame_counts: list[int] | None = None
    resolution: tuple[int, int] | None = None
    asset_path: pathlib.Path | None = None
    asset_seed: int | None = None
    num_vertices: int | None = None
    backgrounds: pathlib.Path | None = None
    split_ratios: tuple[int, int, int] | None = None
    camera_distance: float | None = None
    sequence_files: list[pathlib.Path] = field(default_factory=list)
    bounds: SampleBounds = field(default_factory=SampleBounds)
    correspondences: bool | None = None
    allow_any_n: bool | None = None

    @staticmethod
    def read(path: pathlib.Path) -> GenConfig:
        data = _read_object(path)
        _check_keys(
            data,
            {
                "root",
                "seed",
                "workers",
                "num_sequences",
                "frame_counts",
                "resolution",
                "asset_path",
                "asset_seed",
                "num_vertices",
                "backgrounds",
                "split_ratios",
                "camera_distance",
                "sequences",
                "sample_bounds",
                "correspondences",
                "allow_any_n",
            },
        )

        base = pathlib.Path(path).parent
        config = GenConfig()
        config.root = _path(data, "root", base)
        config.seed = _int(data, "seed")
        config.workers = _positive_int(data, "workers")
        config.num_sequences = _positive_int(data, "num_sequences")
        config.asset_seed = _int(data, "asset_seed")
        config.num_vertices = _positive_int(data, "num_vertices")
        config.correspondences = _bool(data, "correspondences")
        config.allow_any_n = _bool(data, "allow_any_n")

        frame_counts = data.get("frame_counts")
        if frame_counts is not None:
            if (
                not isinstance(frame_counts, list)
                or not frame_counts
                or not all(isinstance(n, int) and n >= 2 for n in frame_counts)
            ):
                raise FormatError("frame_counts", "must be a non-empty list of ints >= 2")
            config.frame_counts = frame_counts

        resolution = data.get("resolution")
        if resolution is not None:
            if (
                not isinstance(resolution, list)
                or len(resolution) != 2
                or not all(isinstance(v, int) and v >= 8 for v in resolution)
            ):
                raise FormatError("resolution", "must be a [width, height] pair of ints >= 8")
            config.resolution = (resolution[0], resolution[1])

        config.asset_path = _path(data, "asset_path", base)
        config.backgrounds = _path(data, "backgrounds", base)
        config.split_ratios = ConfigValue.Ratios.read(data, "split_ratios", base)

        distance = ConfigValue.Number.read(data, "camera_distance", base)
        if distance is not None and distance <= 0:
            raise FormatError("camera_distance", "must be a number > 0")
        config.camera_distance = distance

        sequences = data.get("sequences", [])
        if not isinstance(sequences, list) or not all(isinstance(s, str) for s in sequences):
            raise FormatError("sequences", "must be a list of sequence file paths")
        config.sequence_files = [(base / s).resolve() for s in sequences]

        try:
            config.bounds = SampleBounds.from_json(data.get("sample_bounds", {}))
        except (TypeError, ValueError) as e:
            raise FormatError("sample_bounds", str(e)) from e

        return config
