import logging
import pathlib
from time import perf_counter

import numpy as np

from core.camera import Camera
from core.errors import FaceFlowError
from core.face_model import FaceModelAsset, Region
from core.flow import compute_decomposed_flows
from core.io.correspondences import write_correspondences
from core.io.flo import write_flo
from core.io.image import write_png
from core.io.manifest import STATUS_COMPLETE, STATUS_INCOMPLETE, SequenceRecord
from core.io.pfm import write_pfm
from core.metrics import export_correspondences
from core.rasterizer import RenderConfig, rasterize
from core.sequence import MeshPairSample, SequenceSpec, facial_mesh, head_mesh

import core.constants as c

logger = logging.getLogger(__name__)


def vertex_colors(asset: FaceModelAsset) -> np.ndarray:
    colors = np.tile(np.array(c.SKIN_COLOR, dtype=np.float64), (asset.n_v, 1))
    colors[asset.region_labels == Region.Lips] = c.LIPS_COLOR
    colors[asset.region_labels == Region.Eyes] = c.EYES_COLOR
    return colors


def sequence_dir(seq_id: int) -> str:
    return f"seq_{seq_id}"


class SequenceEngine:
    """Renders one sequence and writes its frames, flows, depths and correspondences."""

    def __init__(
        self,
        asset: FaceModelAsset,
        camera: Camera,
        root: pathlib.Path,
        correspondences: bool = True,
    ) -> None:
        self.asset = asset
        self.camera = camera
        self.root = root
        self.correspondences = correspondences
        self.colors = vertex_colors(asset)

    def _write(self, record: list[str], rel: str, writer, value) -> None:
        writer(value, self.root / rel)
        record.append(rel)

    def _render_pairs(
        self, seq_id: int, spec: SequenceSpec, config: RenderConfig, record: SequenceRecord
    ) -> None:
        folder = sequence_dir(seq_id)
        (self.root / folder).mkdir(parents=True, exist_ok=True)
        eps_z = c.OCCLUSION_FRACTION * config.depth_range

        facial = facial_mesh(spec, 1)
        frame, _, visibility = rasterize(facial, self.camera, config, self.colors)
        self._write(record.frames, f"{folder}/frame_1.png", write_png, frame)

        for t in spec.pair_indices:
            target = facial_mesh(spec, t + 1)
            head = head_mesh(spec, t + 1)

            target_frame, _, target_visibility = rasterize(
                target, self.camera, config, self.colors
            )
            head_frame, _, head_visibility = rasterize(head, self.camera, config, self.colors)

            sample = MeshPairSample(facial, target, head, t)
            flow_f, flow_h, flow_e = compute_decomposed_flows(
                sample,
                self.camera,
                config,
                visibility,
                target_visibility.depth,
                head_visibility.depth,
            )

            self._write(record.frames, f"{folder}/frame_{t + 1}.png", write_png, target_frame)
            self._write(record.head_frames, f"{folder}/head_{t + 1}.png", write_png, head_frame)
            self._write(record.flows_f, f"{folder}/flow_f_{t}.flo", write_flo, flow_f)
            self._write(record.flows_h, f"{folder}/flow_h_{t}.flo", write_flo, flow_h)
            self._write(record.flows_e, f"{folder}/flow_e_{t}.flo", write_flo, flow_e)
            self._write(
                record.depths, f"{folder}/depth_{t}.pfm", write_pfm, visibility.depth.astype(np.float32)
            )
            if self.correspondences:
                corr = export_correspondences(
                    sample, self.camera, self.asset, visibility, eps_z=eps_z
                )
                self._write(
                    record.correspondences, f"{folder}/corr_{t}.csv", write_correspondences, corr
                )

            facial, visibility = target, target_visibility

    def run_sequence(
        self, seq_id: int, spec: SequenceSpec, config: RenderConfig
    ) -> tuple[SequenceRecord, float]:
        """Returns the sequence record and the seconds it took.

        A failure leaves the files written so far and an incomplete record.
        """
        record = SequenceRecord(
            id=seq_id, n=spec.n, seed=spec.seed, target=spec.target.to_json()
        )
        last = perf_counter()
        try:
            self._render_pairs(seq_id, spec, config, record)
        except (FaceFlowError, OSError) as e:
            logger.error(f"sequence {seq_id} failed: {e}")
            record.status = STATUS_INCOMPLETE
            record.error = str(e)
        except Exception as e:
            logger.exception(f"sequence {seq_id} failed unexpectedly")
            record.status = STATUS_INCOMPLETE
            record.error = f"{type(e).__name__}: {e}"
        else:
            record.status = STATUS_COMPLETE
        elapsed = perf_counter() - last

        logger.debug(f"sequence {seq_id}: {record.pairs} pairs in {elapsed:.3f}s")
        return record, elapsed
