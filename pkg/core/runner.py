import logging
import os

import numpy as np
from joblib import Parallel, delayed

from core.args import GenArgs
from core.camera import Camera
from core.engine import SequenceEngine
from core.errors import DatasetIOError, PartialFailureError, ValidationError
from core.face_model import FaceModelAsset, make_synthetic_asset
from core.io.asset import asset_fingerprint, load_asset, save_asset
from core.io.image import list_backgrounds, load_background
from core.io.manifest import (
    STATUS_COMPLETE,
    DatasetManifest,
    SequenceRecord,
    validate_manifest,
    write_manifest,
)
from core.io.split import split_dataset
from core.rasterizer import RenderConfig
from core.sequence import SequenceFile, SequenceSpec, sample_target_params

import core.constants as c

logger = logging.getLogger(__name__)


def sequence_seed(global_seed: int, seq_id: int) -> int:
    """Per-sequence seed; depends only on the global seed and the sequence id."""
    return int(np.random.SeedSequence([global_seed, seq_id]).generate_state(1)[0])


class DatasetRunner:
    def __init__(self, args: GenArgs) -> None:
        self.args = args
        self.camera = Camera.default(args.width, args.height, args.camera_distance)
        self.backgrounds = list_backgrounds(args.backgrounds)
        self.sequence_files = [SequenceFile.read(p) for p in args.sequence_files]

    def load_asset(self) -> FaceModelAsset:
        path = self.args.asset_path
        if path is None and self.sequence_files:
            path = self.sequence_files[0].asset_path
        if path is None:
            logger.info(
                f"synthesizing asset (seed {self.args.asset_seed}, "
                f"{self.args.num_vertices} vertices)"
            )
            return make_synthetic_asset(self.args.asset_seed, self.args.num_vertices)

        for file in self.sequence_files:
            if file.asset_path != path:
                raise ValidationError(
                    f"sequence file asset {file.asset_path} differs from the run asset {path}"
                )
        return load_asset(path)

    def setup_sequences(
        self, asset: FaceModelAsset
    ) -> list[tuple[int, SequenceSpec, RenderConfig]]:
        jobs = []
        for seq_id in range(self.args.num_sequences):
            seed = sequence_seed(self.args.seed, seq_id)
            rng = np.random.default_rng(seed)

            if seq_id < len(self.sequence_files):
                spec = self.sequence_files[seq_id].to_spec(asset, self.args.allow_any_n)
            else:
                n = self.args.frame_counts[seq_id % len(self.args.frame_counts)]
                target = sample_target_params(asset, rng, self.args.bounds)
                spec = SequenceSpec(asset, target, n, seed, self.args.allow_any_n)

            background = None
            if self.backgrounds:
                choice = self.backgrounds[int(rng.integers(len(self.backgrounds)))]
                background = load_background(choice, self.args.width, self.args.height)
            jobs.append((seq_id, spec, RenderConfig(background=background)))

        return jobs

    def _prepare_root(self) -> None:
        root = self.args.root
        try:
            root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DatasetIOError(f"cannot create output root {root}: {e}") from e
        if not os.access(root, os.W_OK):
            raise DatasetIOError(f"output root {root} is not writable")

    def run(self) -> tuple[DatasetManifest, list[float]]:
        """Generates every sequence, then writes the split-tagged manifest."""
        self._prepare_root()
        asset = self.load_asset()
        save_asset(asset, self.args.root / c.ASSET_NAME)

        jobs = self.setup_sequences(asset)
        engine = SequenceEngine(asset, self.camera, self.args.root, self.args.correspondences)
        logger.info(
            f"generating {len(jobs)} sequences at {self.args.width}x{self.args.height} "
            f"with {self.args.workers} worker(s)"
        )

        # joblib returns results in submission order whatever the worker count
        results: list[tuple[SequenceRecord, float]] = Parallel(
            n_jobs=self.args.workers, backend="loky"
        )(delayed(engine.run_sequence)(seq_id, spec, config) for seq_id, spec, config in jobs)

        records = split_dataset([r for r, _ in results], self.args.split_ratios, self.args.seed)
        manifest = DatasetManifest(
            version=c.MANIFEST_VERSION,
            asset_fingerprint=asset_fingerprint(asset),
            width=self.args.width,
            height=self.args.height,
            camera=self.camera.to_json(),
            sequences=records,
        )
        validate_manifest(manifest, self.args.root)
        write_manifest(manifest, self.args.root)

        failed = [r for r in records if r.status != STATUS_COMPLETE]
        if failed:
            raise PartialFailureError(
                f"{len(failed)} of {len(records)} sequences are incomplete",
                details=[f"sequence {r.id}: {r.error}" for r in failed],
            )

        return manifest, [t for _, t in results]
