"""Subcommand bodies. Each returns the key/value summary printed by main."""

from collections import defaultdict
import json
import logging
import pathlib

import numpy as np

from core.args import AssetArgs, DecomposeArgs, EvalArgs, FlowKind, GenArgs, SplitArgs, VizArgs
from core.camera import Camera
from core.decompose import IRLSConfig, decompose_flow, fit_head_motion
from core.errors import DatasetIOError, PartialFailureError, RankError, ValidationError
from core.face_model import FaceParams, Region, make_synthetic_asset
from core.flow import FlowField, compute_decomposed_flows, region_masks
from core.io.asset import asset_fingerprint, load_asset, save_asset
from core.io.correspondences import read_correspondences
from core.io.flo import read_flo, write_flo
from core.io.image import write_png
from core.io.manifest import (
    STATUS_COMPLETE,
    DatasetManifest,
    SequenceRecord,
    count_records,
    read_manifest,
    validate_manifest,
    write_manifest,
)
from core.io.pfm import read_pfm
from core.io.split import split_dataset
from core.metrics import EvalReport, depth_mask, landmark_epe, masked_epe, merge_reports
from core.rasterizer import RenderConfig, rasterize_visibility
from core.runner import DatasetRunner
from core.sequence import SequenceSpec, generate_sequence
from core.ui.colorwheel import colorwheel_legend, flow_to_colorwheel_png

import core.constants as c

logger = logging.getLogger(__name__)

FLOW_LABELS = {
    FlowKind.Facial: "facial",
    FlowKind.Head: "head",
    FlowKind.Expression: "expression",
}


def _write_json(data: dict, path: pathlib.Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
    except OSError as e:
        raise DatasetIOError(f"cannot write {path}: {e}") from e


def cmd_generate(args: GenArgs) -> dict:
    manifest, times = DatasetRunner(args).run()
    return {
        "ROOT": args.root,
        "SEQUENCES": manifest.counts["sequences"],
        "PAIRS": manifest.counts["pairs"],
        "SPLITS": " ".join(
            f"{tag}={manifest.counts['splits'][tag]['sequences']}" for tag in c.SPLIT_TAGS
        ),
        "TOTAL_SEQUENCE_TIME": f"{sum(times):.4f}s",
    }


def _flow_paths(record: SequenceRecord, kind: FlowKind) -> list[str]:
    match kind:
        case FlowKind.Facial:
            return record.flows_f
        case FlowKind.Head:
            return record.flows_h
        case FlowKind.Expression:
            return record.flows_e


def _motion_groups(reports: dict[int, list[EvalReport]], mask_source: str) -> dict:
    ordered = [r for n in sorted(reports) for r in reports[n]]
    return {
        "overall": merge_reports(ordered, mask_source).to_json(),
        "by_motion": {
            f"1/{n}": merge_reports(reports[n], mask_source).to_json()
            for n in sorted(reports)
        },
    }


class _Geometry:
    """Regenerates a record's meshes for occlusion and region masks."""

    def __init__(self, root: pathlib.Path, manifest: DatasetManifest) -> None:
        self.asset = load_asset(root / manifest.asset)
        if asset_fingerprint(self.asset) != manifest.asset_fingerprint:
            raise ValidationError("dataset asset does not match the manifest fingerprint")
        self.camera = Camera.from_json(manifest.camera)
        self.config = RenderConfig()

    def pairs(self, record: SequenceRecord):
        target = FaceParams(
            np.array(record.target["beta"]),
            np.array(record.target["psi"]),
            np.array(record.target["theta"]),
        )
        spec = SequenceSpec(self.asset, target, record.n, record.seed, allow_any_n=True)
        for sample in generate_sequence(spec):
            visibility = rasterize_visibility(sample.source, self.camera, self.config)
            yield sample, visibility


def _occlusion(flows: tuple[FlowField, FlowField, FlowField], kind: FlowKind) -> np.ndarray:
    facial, head, expression = flows
    match kind:
        case FlowKind.Facial:
            return facial.occlusion
        case FlowKind.Head:
            return head.occlusion
        case FlowKind.Expression:
            return expression.occlusion


def cmd_eval(args: EvalArgs) -> dict:
    """Masked EPE of predictions laid out like the dataset, grouped by motion scale."""
    manifest = read_manifest(args.root)
    validate_manifest(manifest, args.root)

    records = [
        r
        for r in manifest.sequences
        if r.status == STATUS_COMPLETE and (args.split is None or r.split == args.split)
    ]
    if not records:
        raise ValidationError("no complete sequences to evaluate")

    geometry = None
    if args.regions or args.exclude_occluded:
        geometry = _Geometry(args.root, manifest)

    mask_source = "depth-unoccluded" if args.exclude_occluded else "depth"
    scores: dict[str, dict[int, list[EvalReport]]] = defaultdict(lambda: defaultdict(list))
    missing: list[str] = []
    decompose_skipped: list[str] = []
    irls = IRLSConfig(loss=args.loss)

    for record in records:
        pairs = geometry.pairs(record) if geometry is not None else None
        for i, t in enumerate(range(1, record.n)):
            depth = read_pfm(args.root / record.depths[i])
            mask = depth_mask(depth, c.BACKGROUND_DEPTH, c.DEPTH_MASK_EPS)

            regions = None
            flows = None
            if pairs is not None:
                sample, visibility = next(pairs)
                if args.regions:
                    by_region = region_masks(geometry.asset, sample.source, visibility)
                    regions = {r.tag: m for r, m in by_region.items() if r != Region.Other}
                if args.exclude_occluded:
                    flows = compute_decomposed_flows(
                        sample, geometry.camera, geometry.config, visibility
                    )

            for kind in FlowKind:
                rel = _flow_paths(record, kind)[i]
                pred_path = args.predictions / rel
                if not pred_path.is_file():
                    if kind == args.flow_kind:
                        missing.append(rel)
                    continue

                pred = read_flo(pred_path)
                gt = read_flo(args.root / rel)
                kind_mask = mask
                if flows is not None:
                    kind_mask = mask & ~_occlusion(flows, kind)
                scores[FLOW_LABELS[kind]][record.n].append(
                    masked_epe(pred, gt, kind_mask, regions, mask_source)
                )

                if kind != FlowKind.Facial:
                    continue
                if args.landmarks and record.correspondences:
                    corr = read_correspondences(args.root / record.correspondences[i])
                    if len(corr):
                        scores["vertex"][record.n].append(
                            landmark_epe(pred, corr, args.literal_sign)
                        )
                if args.decompose is not None:
                    try:
                        model, _ = fit_head_motion(pred, mask, args.decompose, irls)
                    except RankError as e:
                        logger.warning(f"{rel}: not decomposed ({e})")
                        decompose_skipped.append(rel)
                        continue
                    _, expression = decompose_flow(pred, mask, model)
                    gt_e = read_flo(args.root / record.flows_e[i])
                    scores["decomposed_expression"][record.n].append(
                        masked_epe(expression, gt_e, kind_mask, regions, mask_source)
                    )
            logger.debug(f"sequence {record.id} pair {t} scored")

    report = {
        "flow": FLOW_LABELS[args.flow_kind],
        "mask_source": mask_source,
        "split": args.split,
        "missing": missing,
        "decompose_skipped": decompose_skipped,
        "results": {
            label: _motion_groups(by_n, "correspondences" if label == "vertex" else mask_source)
            for label, by_n in sorted(scores.items())
        },
    }
    output = args.output or args.predictions / c.REPORT_NAME
    _write_json(report, output)

    if missing:
        raise PartialFailureError(
            f"{len(missing)} prediction files missing, report written to {output}",
            details=missing,
        )

    primary = report["results"][FLOW_LABELS[args.flow_kind]]
    summary = {"REPORT": output, "EPE": f"{primary['overall']['epe']:.6f}"}
    for group, values in primary["by_motion"].items():
        summary[f"EPE_{group}"] = f"{values['epe']:.6f}"
    return summary


def cmd_decompose(args: DecomposeArgs) -> dict:
    flow = read_flo(args.flow)
    mask = depth_mask(read_pfm(args.depth), c.BACKGROUND_DEPTH, c.DEPTH_MASK_EPS)

    config = IRLSConfig(args.loss, args.scale, args.max_iterations)
    model, diagnostics = fit_head_motion(flow, mask, args.model, config)
    head, expression = decompose_flow(flow, mask, model, args.extrapolate)

    stem = args.flow.stem
    head_path = args.output / f"{stem}_head.flo"
    expression_path = args.output / f"{stem}_expression.flo"
    try:
        args.output.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DatasetIOError(f"cannot create {args.output}: {e}") from e
    write_flo(head, head_path)
    write_flo(expression, expression_path)
    _write_json(
        {"model": model.to_json(), "diagnostics": diagnostics.to_json()},
        args.output / f"{stem}_fit.json",
    )

    return {
        "HEAD_FLOW": head_path,
        "EXPRESSION_FLOW": expression_path,
        "COEFFICIENTS": " ".join(f"{v:.6g}" for v in model.coefficients),
        "ITERATIONS": diagnostics.iterations,
        "INLIER_FRACTION": f"{diagnostics.inlier_fraction:.4f}",
    }


def cmd_viz(args: VizArgs) -> dict:
    flow = read_flo(args.flow)
    write_png(flow_to_colorwheel_png(flow, args.max_magnitude), args.output)
    summary: dict = {"IMAGE": args.output}
    if args.legend is not None:
        write_png(colorwheel_legend(), args.legend)
        summary["LEGEND"] = args.legend
    return summary


def cmd_split(args: SplitArgs) -> dict:
    manifest = read_manifest(args.root)
    records = split_dataset(manifest.sequences, args.ratios, args.seed)
    manifest.sequences = records
    manifest.counts = count_records(records)
    write_manifest(manifest, args.root)
    return {
        tag.upper(): manifest.counts["splits"][tag]["sequences"] for tag in c.SPLIT_TAGS
    }


def cmd_asset(args: AssetArgs) -> dict:
    if args.action == "make":
        asset = make_synthetic_asset(args.seed, args.num_vertices, args.num_beta, args.num_psi)
        save_asset(asset, args.path)
    else:
        asset = load_asset(args.path)

    counts = np.bincount(asset.region_labels, minlength=len(Region))
    return {
        "ASSET": args.path,
        "FINGERPRINT": asset_fingerprint(asset),
        "VERTICES": asset.n_v,
        "TRIANGLES": asset.n_f,
        "SHAPE_COMPONENTS": asset.n_beta,
        "EXPRESSION_COMPONENTS": asset.n_psi,
        "REGIONS": " ".join(f"{r.tag}={counts[r]}" for r in Region),
    }

