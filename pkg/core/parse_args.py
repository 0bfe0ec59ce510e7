import argparse
import os
import pathlib
from time import time
from typing import cast, NoReturn, Protocol, Sequence

from core.args import (
    ASSET_CONFIG,
    DECOMPOSE_CONFIG,
    EVAL_CONFIG,
    SPLIT_CONFIG,
    VIZ_CONFIG,
    Args,
    AssetArgs,
    Command,
    CommandConfig,
    ConfigValue,
    DecomposeArgs,
    EvalArgs,
    FlowKind,
    GenArgs,
    GenConfig,
    SplitArgs,
    VizArgs,
)
from core.decompose import ModelKind, RobustLoss
from core.errors import ValidationError

import core.constants as c

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")
MODELS = [m.value for m in ModelKind]
LOSSES = [loss.value for loss in RobustLoss]
ASSET_ACTIONS = ("make", "check")

# fallbacks for flags set neither on the command line nor in a config
EVAL_DEFAULTS = {
    "flow": FlowKind.Facial.value,
    "regions": False,
    "exclude_occluded": False,
    "landmarks": False,
    "literal_sign": False,
    "loss": RobustLoss.Tukey.value,
}
DECOMPOSE_DEFAULTS = {
    "model": ModelKind.Affine.value,
    "loss": RobustLoss.Tukey.value,
    "max_iterations": c.IRLS_MAX_ITERATIONS,
    "extrapolate": False,
}
SPLIT_DEFAULTS = {"seed": 0}
ASSET_DEFAULTS = {
    "seed": 0,
    "num_vertices": c.DEFAULT_NUM_VERTICES,
    "num_beta": c.DEFAULT_NUM_BETA,
    "num_psi": c.DEFAULT_NUM_PSI,
}


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors raise `ValidationError` instead of exiting."""

    def error(self, message: str) -> NoReturn:
        raise ValidationError(f"{self.prog}: {message}")


class ParsedNS(Protocol):
    command: str
    log_level: str
    config: str | None


class GenNS(ParsedNS, Protocol):
    root: str | None
    seed: int | None
    workers: int | None
    num_sequences: int | None
    frame_counts: list[int] | None
    resolution: tuple[int, int] | None
    asset: str | None
    asset_seed: int | None
    num_vertices: int | None
    backgrounds: str | None
    split_ratios: list[int] | None
    camera_distance: float | None
    sequence: list[str] | None
    no_correspondences: bool | None
    allow_any_n: bool | None


class EvalNS(ParsedNS, Protocol):
    root: str | pathlib.Path | None
    predictions: str | pathlib.Path | None
    output: str | pathlib.Path | None
    flow: str
    split: str | None
    regions: bool
    exclude_occluded: bool
    landmarks: bool
    literal_sign: bool
    decompose: str | None
    loss: str


class DecomposeNS(ParsedNS, Protocol):
    flow: str | pathlib.Path | None
    depth: str | pathlib.Path | None
    output: str | pathlib.Path | None
    model: str
    loss: str
    scale: float | None
    max_iterations: int
    extrapolate: bool


class VizNS(ParsedNS, Protocol):
    flow: str | pathlib.Path | None
    output: str | pathlib.Path | None
    max_magnitude: float | None
    legend: str | pathlib.Path | None


class SplitNS(ParsedNS, Protocol):
    root: str | pathlib.Path | None
    ratios: list[int] | tuple[int, int, int] | None
    seed: int


class AssetNS(ParsedNS, Protocol):
    action: str | None
    path: str | pathlib.Path | None
    seed: int
    num_vertices: int
    num_beta: int
    num_psi: int


def first_set(*values):
    """The first value that is not None, or None."""
    return next((v for v in values if v is not None), None)


def sanitize_seed(org_seed: None | int, config_seed: None | int = None) -> int:
    org_seed = first_set(org_seed, config_seed)
    if org_seed is None:
        seed = int(time() * 10_000) % 100_000
        print(f"Generated seed: {seed}")
        return seed

    return int(org_seed)


def sanitize_workers(org_workers: None | int, config_workers: None | int = None) -> int:
    org_workers = first_set(org_workers, config_workers)
    if org_workers is None:
        env = os.environ.get(c.WORKERS_ENV)
        if env is None:
            return 1
        try:
            org_workers = int(env)
        except ValueError:
            raise ValidationError(f"${c.WORKERS_ENV}=`{env}` is not an integer")

    if org_workers < 1:
        raise ValidationError(f"worker count must be >= 1, got {org_workers}")
    return org_workers


def sanitize_required(value, flag: str):
    if value is None:
        raise ValidationError(f"did not provide `--{flag}` or a config with `{flag}`")
    return value


def sanitize_choice(value: str, options, flag: str) -> str:
    if value not in options:
        raise ValidationError(
            f"`--{flag}` value `{value}` not valid (expected {' '.join(options)})"
        )
    return value


def sanitize_num_sequences(org_num: None | int, config: GenConfig | None) -> int:
    if org_num is not None:
        if org_num < 1:
            raise ValidationError("`--num_sequences` must be >= 1")
        return org_num

    if config is not None and config.num_sequences is not None:
        return config.num_sequences

    if config is not None and config.sequence_files:
        return len(config.sequence_files)

    raise ValidationError("did not provide `--num_sequences` or a config with `num_sequences`")


def sanitize_frame_counts(
    org_counts: None | list[int], config: GenConfig | None, allow_any_n: bool
) -> list[int]:
    counts = org_counts
    if counts is None and config is not None:
        counts = config.frame_counts
    if counts is None:
        return list(c.ALLOWED_FRAME_COUNTS)

    for n in counts:
        if n < 2 or (not allow_any_n and n not in c.ALLOWED_FRAME_COUNTS):
            raise ValidationError(
                f"frame count {n} not in {c.ALLOWED_FRAME_COUNTS} (pass `--allow_any_n`)"
            )
    return list(counts)


def sanitize_resolution(
    org_resolution: None | tuple[int, int], config: GenConfig | None
) -> tuple[int, int]:
    if org_resolution is not None:
        width, height = int(org_resolution[0]), int(org_resolution[1])
        if width < 8 or height < 8:
            raise ValidationError(f"resolution must be at least 8x8, got {width}x{height}")
        return width, height

    if config is not None and config.resolution is not None:
        return config.resolution

    return c.DEFAULT_RESOLUTION, c.DEFAULT_RESOLUTION


def sanitize_ratios(
    org_ratios: None | Sequence[int], config: GenConfig | None = None
) -> tuple[int, int, int]:
    if org_ratios is not None:
        if len(org_ratios) != len(c.SPLIT_TAGS) or any(r <= 0 for r in org_ratios):
            raise ValidationError("split ratios must be 3 positive integers")
        return org_ratios[0], org_ratios[1], org_ratios[2]

    if config is not None and config.split_ratios is not None:
        return config.split_ratios

    return c.SPLIT_RATIOS


def sanitize_path(
    org_path: None | str | pathlib.Path, fallback: pathlib.Path | None = None
) -> pathlib.Path | None:
    if org_path is None:
        return fallback
    return pathlib.Path(org_path).resolve()


def sanitize_camera_distance(org_distance: None | float, config: GenConfig | None) -> float:
    if org_distance is not None:
        if org_distance <= 0:
            raise ValidationError(f"camera distance must be > 0, got {org_distance}")
        return org_distance

    if config is not None and config.camera_distance is not None:
        return config.camera_distance

    return c.CAMERA_DISTANCE


def sanitize_max_magnitude(org_max: None | float) -> float | None:
    if org_max is not None and org_max <= 0:
        raise ValidationError(f"`--max_magnitude` must be > 0, got {org_max}")
    return org_max


def _config_path(path: str) -> pathlib.Path:
    config_path = pathlib.Path(path).resolve()
    if not config_path.is_file():
        raise ValidationError(f'file with path "{config_path}" not found')
    return config_path


def get_config(path: str | None) -> GenConfig | None:
    if path is None:
        return None
    return GenConfig.read(_config_path(path))


def apply_config(
    ns: ParsedNS, schema: dict[str, ConfigValue], defaults: dict[str, object]
) -> None:
    """Fills flags left unset on the command line from `--config`, then `defaults`."""
    config = CommandConfig()
    if ns.config is not None:
        config = CommandConfig.read(_config_path(ns.config), schema)
    for key in schema:
        if getattr(ns, key) is None:
            setattr(ns, key, first_set(config.get(key), defaults.get(key)))


def _gen_args(ns: GenNS) -> GenArgs:
    config = get_config(ns.config) or GenConfig()
    root = sanitize_required(first_set(sanitize_path(ns.root), config.root), "root")
    allow_any_n = bool(first_set(ns.allow_any_n, config.allow_any_n, False))
    frame_counts = sanitize_frame_counts(ns.frame_counts, config, allow_any_n)
    width, height = sanitize_resolution(ns.resolution, config)
    correspondences = False if ns.no_correspondences else config.correspondences

    sequence_files = [pathlib.Path(s).resolve() for s in ns.sequence or []]
    if not sequence_files:
        sequence_files = config.sequence_files

    return GenArgs(
        root=root,
        seed=sanitize_seed(ns.seed, config.seed),
        workers=sanitize_workers(ns.workers, config.workers),
        num_sequences=sanitize_num_sequences(ns.num_sequences, config),
        frame_counts=frame_counts,
        width=width,
        height=height,
        asset_path=sanitize_path(ns.asset, config.asset_path),
        asset_seed=first_set(ns.asset_seed, config.asset_seed, 0),
        num_vertices=first_set(ns.num_vertices, config.num_vertices, c.DEFAULT_NUM_VERTICES),
        backgrounds=sanitize_path(ns.backgrounds, config.backgrounds),
        split_ratios=sanitize_ratios(ns.split_ratios, config),
        bounds=config.bounds,
        sequence_files=sequence_files,
        camera_distance=sanitize_camera_distance(ns.camera_distance, config),
        correspondences=first_set(correspondences, True),
        allow_any_n=allow_any_n,
    )


def _eval_args(ns: EvalNS) -> EvalArgs:
    apply_config(ns, EVAL_CONFIG, EVAL_DEFAULTS)
    if ns.split is not None:
        sanitize_choice(ns.split, c.SPLIT_TAGS, "split")
    if ns.decompose is not None:
        sanitize_choice(ns.decompose, MODELS, "decompose")
    return EvalArgs(
        root=sanitize_path(sanitize_required(ns.root, "root")),
        predictions=sanitize_path(sanitize_required(ns.predictions, "predictions")),
        output=sanitize_path(ns.output),
        flow_kind=FlowKind(sanitize_choice(ns.flow, [k.value for k in FlowKind], "flow")),
        split=ns.split,
        regions=ns.regions,
        exclude_occluded=ns.exclude_occluded,
        landmarks=ns.landmarks,
        literal_sign=ns.literal_sign,
        decompose=ModelKind(ns.decompose) if ns.decompose else None,
        loss=RobustLoss(sanitize_choice(ns.loss, LOSSES, "loss")),
    )


def _decompose_args(ns: DecomposeNS) -> DecomposeArgs:
    apply_config(ns, DECOMPOSE_CONFIG, DECOMPOSE_DEFAULTS)
    if ns.scale is not None and ns.scale <= 0:
        raise ValidationError(f"`--scale` must be > 0, got {ns.scale}")
    if ns.max_iterations < 1:
        raise ValidationError("`--max_iterations` must be >= 1")
    return DecomposeArgs(
        flow=sanitize_path(sanitize_required(ns.flow, "flow")),
        depth=sanitize_path(sanitize_required(ns.depth, "depth")),
        output=sanitize_path(sanitize_required(ns.output, "output")),
        model=ModelKind(sanitize_choice(ns.model, MODELS, "model")),
        loss=RobustLoss(sanitize_choice(ns.loss, LOSSES, "loss")),
        scale=ns.scale,
        max_iterations=ns.max_iterations,
        extrapolate=ns.extrapolate,
    )


def _viz_args(ns: VizNS) -> VizArgs:
    apply_config(ns, VIZ_CONFIG, {})
    return VizArgs(
        flow=sanitize_path(sanitize_required(ns.flow, "flow")),
        output=sanitize_path(sanitize_required(ns.output, "output")),
        max_magnitude=sanitize_max_magnitude(ns.max_magnitude),
        legend=sanitize_path(ns.legend),
    )


def _split_args(ns: SplitNS) -> SplitArgs:
    apply_config(ns, SPLIT_CONFIG, SPLIT_DEFAULTS)
    return SplitArgs(
        sanitize_path(sanitize_required(ns.root, "root")),
        sanitize_ratios(ns.ratios),
        ns.seed,
    )


def _asset_args(ns: AssetNS) -> AssetArgs:
    apply_config(ns, ASSET_CONFIG, ASSET_DEFAULTS)
    action = sanitize_required(ns.action, "action")
    return AssetArgs(
        sanitize_choice(action, ASSET_ACTIONS, "action"),
        sanitize_path(sanitize_required(ns.path, "path")),
        ns.seed,
        ns.num_vertices,
        ns.num_beta,
        ns.num_psi,
    )


def _add_config(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config", help="A JSON config; command-line flags override its values"
    )


def build_parser() -> ArgumentParser:
    # unset flags stay None so a config file can fill them
    parser = ArgumentParser(
        description="Generate and evaluate synthetic facial optical-flow datasets."
    )
    parser.add_argument(
        "--log_level",
        default="INFO",
        choices=LOG_LEVELS,
        help="Logging verbosity",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen", help="Generate a dataset")
    gen.add_argument("--root", help="Output directory")
    gen.add_argument("--seed", type=int, help="Global random seed")
    gen.add_argument(
        "--workers", type=int, help=f"Worker processes (default ${c.WORKERS_ENV} or 1)"
    )
    _add_config(gen)
    gen.add_argument("--num_sequences", type=int, help="Number of sequences")
    gen.add_argument(
        "--frame_counts",
        type=int,
        nargs="+",
        metavar="N",
        help="Frame counts, assigned to sequences round-robin",
    )
    gen.add_argument(
        "--resolution", type=int, nargs=2, metavar=("W", "H"), help="Frame size"
    )
    gen.add_argument("--asset", help="Face model asset file (synthesized when omitted)")
    gen.add_argument("--asset_seed", type=int, help="Seed of the synthesized asset (default 0)")
    gen.add_argument(
        "--num_vertices",
        type=int,
        help=f"Vertex count of the synthesized asset (default {c.DEFAULT_NUM_VERTICES})",
    )
    gen.add_argument("--backgrounds", help="Directory of background PNGs")
    gen.add_argument(
        "--split_ratios", type=int, nargs=3, metavar=("TRAIN", "TEST", "VAL"), help="Split ratios"
    )
    gen.add_argument("--camera_distance", type=float, help="Camera distance from the head")
    gen.add_argument(
        "--sequence",
        action="append",
        help="A sequence JSON file with explicit targets (repeatable)",
    )
    gen.add_argument(
        "--no_correspondences",
        action="store_true",
        default=None,
        help="Skip corr_<t>.csv files",
    )
    gen.add_argument(
        "--allow_any_n",
        action="store_true",
        default=None,
        help="Accept frame counts outside 5/10/15/20",
    )

    ev = commands.add_parser("eval", help="Score predicted flows against a dataset")
    _add_config(ev)
    ev.add_argument("--root", help="Dataset directory")
    ev.add_argument("--predictions", help="Prediction directory")
    ev.add_argument("--output", help="Where to write the JSON report")
    ev.add_argument(
        "--flow",
        choices=[k.value for k in FlowKind],
        help="Ground-truth flow to score against: facial, head or expression",
    )
    ev.add_argument("--split", help="Only evaluate one split")
    for flag, text in (
        ("--regions", "Report per-region EPE"),
        ("--exclude_occluded", "Drop occluded pixels from the mask"),
        ("--landmarks", "Also score vertex correspondences"),
        ("--literal_sign", "Use (C1 - C2) in the vertex EPE"),
    ):
        ev.add_argument(flag, action="store_true", default=None, help=text)
    ev.add_argument(
        "--decompose",
        choices=MODELS,
        help="Also decompose predicted facial flow and score its expression flow",
    )
    ev.add_argument("--loss", choices=LOSSES)

    dec = commands.add_parser("decompose", help="Split a flow into head and expression flow")
    _add_config(dec)
    dec.add_argument("--flow", help="Facial flow .flo")
    dec.add_argument("--depth", help="Depth .pfm giving the face mask")
    dec.add_argument("--output", help="Output directory")
    dec.add_argument("--model", choices=MODELS)
    dec.add_argument("--loss", choices=LOSSES)
    dec.add_argument("--scale", type=float, help="Robust scale (estimated when omitted)")
    dec.add_argument("--max_iterations", type=int)
    dec.add_argument(
        "--extrapolate",
        action="store_true",
        default=None,
        help="Head flow outside the face mask too",
    )

    viz = commands.add_parser("viz", help="Render a flow as a color-wheel PNG")
    _add_config(viz)
    viz.add_argument("--flow", help="Flow .flo")
    viz.add_argument("--output", help="Output PNG")
    viz.add_argument("--max_magnitude", type=float, help="Magnitude of full saturation")
    viz.add_argument("--legend", help="Also write the color-wheel legend PNG here")

    split = commands.add_parser("split", help="Re-tag a dataset's train/test/val split")
    _add_config(split)
    split.add_argument("--root", help="Dataset directory")
    split.add_argument("--ratios", type=int, nargs=3, metavar=("TRAIN", "TEST", "VAL"))
    split.add_argument("--seed", type=int)

    asset = commands.add_parser("asset", help="Make or check a face model asset")
    _add_config(asset)
    asset.add_argument("action", nargs="?", help="make or check")
    asset.add_argument("--path", help="Asset file")
    asset.add_argument("--seed", type=int)
    asset.add_argument("--num_vertices", type=int)
    asset.add_argument("--num_beta", type=int)
    asset.add_argument("--num_psi", type=int)

    return parser


def parse_args(argv: Sequence[str] | None = None) -> Args:
    ns = cast(ParsedNS, build_parser().parse_args(argv))
    command = Command(ns.command)
    args = Args(command=command, log_level=ns.log_level)

    match command:
        case Command.Gen:
            args.gen = _gen_args(cast(GenNS, ns))
        case Command.Eval:
            args.eval = _eval_args(cast(EvalNS, ns))
        case Command.Decompose:
            args.decompose = _decompose_args(cast(DecomposeNS, ns))
        case Command.Viz:
            args.viz = _viz_args(cast(VizNS, ns))
        case Command.Split:
            args.split = _split_args(cast(SplitNS, ns))
        case Command.Asset:
            args.asset = _asset_args(cast(AssetNS, ns))

    return args
