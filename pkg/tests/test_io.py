import dataclasses
import struct

import numpy as np
import pytest

from core.errors import DatasetIOError, DomainError, FormatError, ValidationError
from core.flow import FlowField
from core.io.asset import asset_fingerprint, asset_from_bytes, asset_to_bytes, load_asset, save_asset
from core.io.correspondences import read_correspondences, write_correspondences
from core.io.flo import flo_bytes, flo_from_bytes, read_flo, write_flo
from core.io.image import read_png, write_png
from core.io.manifest import (
    STATUS_COMPLETE,
    STATUS_INCOMPLETE,
    DatasetManifest,
    SequenceRecord,
    count_records,
    manifest_bytes,
    read_manifest,
    validate_manifest,
    write_manifest,
)
from core.io.pfm import pfm_bytes, pfm_from_bytes, read_pfm, write_pfm
from core.io.split import apportion, split_dataset
from core.metrics import CorrespondenceSet

import core.constants as c


def _two_pixel_flow() -> FlowField:
    uv = np.array([[[1.0, 0.0], [2.0, -1.0]]], dtype=np.float32)
    return FlowField(uv, np.ones((1, 2), bool))


def test_flo_layout():
    expected = struct.pack("<fii", 202021.25, 2, 1) + struct.pack("<4f", 1.0, 0.0, 2.0, -1.0)
    assert flo_bytes(_two_pixel_flow()) == expected


def test_flo_reads_hand_written_bytes():
    data = struct.pack("<fii", 202021.25, 2, 1) + struct.pack("<4f", 1.0, 0.0, 2.0, -1.0)
    flow = flo_from_bytes(data)
    assert flow.size == (2, 1)
    assert np.array_equal(flow.u, [[1.0, 2.0]])
    assert np.array_equal(flow.v, [[0.0, -1.0]])
    assert flow.valid.all()


def test_flo_invalid_pixels_use_the_unknown_marker(tmp_path):
    valid = np.array([[True, False]])
    flow = FlowField(_two_pixel_flow().uv, valid)
    path = tmp_path / "a.flo"
    write_flo(flow, path)

    raw = np.frombuffer(path.read_bytes()[12:], dtype="<f4")
    assert raw[2] == np.float32(c.UNKNOWN_FLOW)
    back = read_flo(path)
    assert np.array_equal(back.valid, valid)
    assert np.array_equal(back.uv[valid], flow.uv[valid])


def test_flo_rejects_bad_magic():
    data = struct.pack("<fii", 202021.0, 2, 1) + bytes(16)
    with pytest.raises(FormatError) as info:
        flo_from_bytes(data)
    assert info.value.field == "magic"


def test_flo_rejects_truncation():
    data = flo_bytes(_two_pixel_flow())
    with pytest.raises(FormatError) as info:
        flo_from_bytes(data[:-4])
    assert info.value.field == "payload"
    with pytest.raises(FormatError):
        flo_from_bytes(data[:8])


def test_missing_flo_is_an_io_error(tmp_path):
    with pytest.raises(DatasetIOError):
        read_flo(tmp_path / "none.flo")


def test_pfm_layout():
    assert pfm_bytes(np.array([[3.5]], dtype=np.float32)) == b"Pf\n1 1\n-1\n" + b"\x00\x00\x60\x40"


def test_pfm_rows_are_stored_bottom_up():
    depth = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
    payload = np.frombuffer(pfm_bytes(depth)[len(b"Pf\n2 2\n-1\n"):], dtype="<f4")
    assert payload.tolist() == [3.0, 4.0, 1.0, 2.0]


def test_pfm_big_endian_is_read():
    data = b"Pf\n1 1\n1.0\n" + struct.pack(">f", 0.75)
    assert pfm_from_bytes(data)[0, 0] == 0.75


def test_pfm_rejects_color_and_truncation():
    with pytest.raises(FormatError):
        pfm_from_bytes(b"PF\n1 1\n-1\n" + bytes(12))
    with pytest.raises(FormatError) as info:
        pfm_from_bytes(b"Pf\n2 2\n-1\n" + bytes(12))
    assert info.value.field == "payload"


def test_pfm_file_round_trip(tmp_path):
    depth = np.full((5, 7), c.BACKGROUND_DEPTH, dtype=np.float32)
    depth[1:3, 2:6] = 0.93
    write_pfm(depth, tmp_path / "d.pfm")
    assert np.array_equal(read_pfm(tmp_path / "d.pfm"), depth)


def test_asset_file_round_trip(asset, tmp_path):
    path = tmp_path / "asset.ffna"
    save_asset(asset, path)
    loaded = load_asset(path)
    assert loaded.equals(asset)
    assert asset_fingerprint(loaded) == asset_fingerprint(asset)


def test_truncated_asset_names_the_field(asset):
    data = asset_to_bytes(asset)
    with pytest.raises(FormatError) as info:
        asset_from_bytes(data[:40])
    assert info.value.field == "template_vertices"
    with pytest.raises(FormatError) as info:
        asset_from_bytes(data[:-1])
    assert info.value.field == "landmark_indices"


def test_asset_with_bad_magic(asset):
    data = b"XXXX" + asset_to_bytes(asset)[4:]
    with pytest.raises(FormatError) as info:
        asset_from_bytes(data)
    assert info.value.field == "magic"


def test_png_round_trip(tmp_path):
    image = np.zeros((3, 5, 3), np.uint8)
    image[0, 4] = (255, 10, 20)
    image[2, 0] = (1, 2, 3)
    write_png(image, tmp_path / "f.png")
    assert np.array_equal(read_png(tmp_path / "f.png"), image)


def test_png_needs_rgb_bytes(tmp_path):
    with pytest.raises(FormatError):
        write_png(np.zeros((3, 5), np.uint8), tmp_path / "f.png")


def test_correspondence_csv_round_trip(tmp_path):
    corr = CorrespondenceSet(
        np.array([[1.25, 2.0], [0.1, 3.0]]),
        np.array([[1.5, 2.5], [0.2, 2.9]]),
        ("lips", None),
        (17, 4),
    )
    path = tmp_path / "corr.csv"
    write_correspondences(corr, path)
    assert path.read_text().splitlines()[0] == "id,x1,y1,x2,y2,region"

    back = read_correspondences(path)
    assert back.ids == (17, 4)
    assert back.regions == ("lips", None)
    assert np.array_equal(back.c1, corr.c1)
    assert np.array_equal(back.c2, corr.c2)


def test_correspondence_csv_needs_all_columns(tmp_path):
    path = tmp_path / "corr.csv"
    path.write_text("id,x1,y1\n0,1.0,2.0\n")
    with pytest.raises(FormatError):
        read_correspondences(path)


def _records(count: int) -> list[SequenceRecord]:
    return [SequenceRecord(id=i, n=5, seed=i) for i in range(count)]


def test_apportion_by_largest_remainder():
    assert apportion(100, (97, 2, 1)) == [97, 2, 1]
    assert apportion(10, (97, 2, 1)) == [10, 0, 0]
    assert apportion(4, (1, 1, 1)) == [2, 1, 1]


def test_split_is_seeded_and_complete():
    first = split_dataset(_records(100), seed=4)
    again = split_dataset(list(reversed(_records(100))), seed=4)
    assert [r.split for r in first] == [r.split for r in again]
    assert [r.id for r in first] == list(range(100))

    tags = [r.split for r in first]
    assert (tags.count("train"), tags.count("test"), tags.count("val")) == (97, 2, 1)


def test_small_split_goes_to_train():
    assert {r.split for r in split_dataset(_records(10))} == {"train"}


def test_split_arguments_are_checked():
    with pytest.raises(DomainError):
        split_dataset([])
    with pytest.raises(DomainError):
        split_dataset(_records(3), ratios=(1, 0, 1))
    with pytest.raises(DomainError):
        split_dataset(_records(3), ratios=(1, 1))


def _tiny_dataset(root, asset, flow_width: int = 4) -> DatasetManifest:
    save_asset(asset, root / c.ASSET_NAME)
    seq = root / "seq_0"
    seq.mkdir()
    for t in (1, 2):
        write_png(np.zeros((3, 4, 3), np.uint8), seq / f"frame_{t}.png")
    write_flo(FlowField.zeros(flow_width, 3), seq / "flow_f_1.flo")
    record = SequenceRecord(
        id=0,
        n=2,
        seed=11,
        frames=["seq_0/frame_1.png", "seq_0/frame_2.png"],
        flows_f=["seq_0/flow_f_1.flo"],
    )
    return DatasetManifest(
        version=c.MANIFEST_VERSION,
        asset_fingerprint=asset_fingerprint(asset),
        width=4,
        height=3,
        camera={},
        sequences=[record],
    )


def test_manifest_round_trip(asset, tmp_path):
    manifest = _tiny_dataset(tmp_path, asset)
    path = write_manifest(manifest, tmp_path)
    assert path.read_bytes().endswith(b"}\n")

    back = read_manifest(tmp_path)
    assert manifest_bytes(back) == manifest_bytes(manifest)
    assert back.counts["pairs"] == 1
    validate_manifest(back, tmp_path)


def test_manifest_counts_per_split():
    records = _records(3)
    records[0].flows_f = ["a", "b"]
    records[2].split = "val"
    records[2].status = "incomplete"
    counts = count_records(records)
    assert counts["sequences"] == 3
    assert counts["pairs"] == 2
    assert counts["incomplete"] == 1
    assert counts["splits"]["val"] == {"sequences": 1, "pairs": 0}


def test_validation_rejects_size_mismatch(asset, tmp_path):
    manifest = _tiny_dataset(tmp_path, asset, flow_width=5)
    with pytest.raises(ValidationError) as info:
        validate_manifest(manifest, tmp_path)
    assert any("flow_f_1.flo" in d for d in info.value.details)


def test_validation_lists_missing_files(asset, tmp_path):
    manifest = _tiny_dataset(tmp_path, asset)
    manifest.sequences[0].depths = ["seq_0/depth_1.pfm"]
    manifest.counts = count_records(manifest.sequences)
    with pytest.raises(ValidationError) as info:
        validate_manifest(manifest, tmp_path)
    assert info.value.details == ["sequence 0: missing seq_0/depth_1.pfm"]


def test_unreadable_manifest(tmp_path):
    (tmp_path / c.MANIFEST_NAME).write_text("{not json")
    with pytest.raises(FormatError):
        read_manifest(tmp_path)
    with pytest.raises(DatasetIOError):
        read_manifest(tmp_path / "missing" / c.MANIFEST_NAME)


def test_random_flo_round_trips():
    rng = np.random.default_rng(100)
    for _ in range(100):
        h, w = rng.integers(1, 16, size=2)
        uv = rng.normal(scale=50.0, size=(h, w, 2)).astype(np.float32)
        valid = rng.uniform(size=(h, w)) < 0.8
        back = flo_from_bytes(flo_bytes(FlowField(uv, valid)))
        assert back.size == (w, h)
        assert np.array_equal(back.valid, valid)
        assert np.array_equal(back.uv[valid], uv[valid])


def test_random_pfm_round_trips():
    rng = np.random.default_rng(101)
    for _ in range(100):
        h, w = rng.integers(1, 16, size=2)
        depth = rng.uniform(0.5, c.BACKGROUND_DEPTH, size=(h, w)).astype(np.float32)
        depth[rng.uniform(size=(h, w)) < 0.3] = c.BACKGROUND_DEPTH
        assert np.array_equal(pfm_from_bytes(pfm_bytes(depth)), depth)


def test_random_asset_round_trips(asset):
    rng = np.random.default_rng(102)
    for _ in range(100):
        weights = rng.uniform(size=asset.skin_weights.shape)
        changed = dataclasses.replace(
            asset,
            template_vertices=rng.normal(size=asset.template_vertices.shape),
            shape_basis=rng.normal(scale=0.01, size=asset.shape_basis.shape),
            expression_basis=rng.normal(scale=0.01, size=asset.expression_basis.shape),
            joint_offsets=rng.normal(scale=0.1, size=asset.joint_offsets.shape),
            skin_weights=weights / weights.sum(axis=1, keepdims=True),
        )
        back = asset_from_bytes(asset_to_bytes(changed))
        assert back.equals(changed)
        assert asset_fingerprint(back) == asset_fingerprint(changed)


def _random_record(rng: np.random.Generator, seq_id: int) -> SequenceRecord:
    n = int(rng.choice(c.ALLOWED_FRAME_COUNTS))
    pairs = int(rng.integers(0, n))
    folder = f"seq_{seq_id}"
    return SequenceRecord(
        id=seq_id,
        n=n,
        seed=int(rng.integers(0, 2**32)),
        split=str(rng.choice(c.SPLIT_TAGS)),
        status=STATUS_COMPLETE if pairs == n - 1 else STATUS_INCOMPLETE,
        frames=[f"{folder}/frame_{t}.png" for t in range(1, pairs + 2)],
        flows_f=[f"{folder}/flow_f_{t}.flo" for t in range(1, pairs + 1)],
        depths=[f"{folder}/depth_{t}.pfm" for t in range(1, pairs + 1)],
        target={"psi": rng.normal(size=3).tolist(), "theta": rng.normal(size=6).tolist()},
        error=None if pairs == n - 1 else "render failed",
    )


def test_random_manifest_round_trips(tmp_path):
    rng = np.random.default_rng(103)
    for _ in range(100):
        records = [_random_record(rng, i) for i in range(int(rng.integers(1, 6)))]
        manifest = DatasetManifest(
            version=c.MANIFEST_VERSION,
            asset_fingerprint=f"{int(rng.integers(0, 2**32)):016x}",
            width=int(rng.integers(8, 512)),
            height=int(rng.integers(8, 512)),
            camera={"fx": float(rng.uniform(10, 1000)), "cx": float(rng.uniform(0, 256))},
            sequences=records,
        )
        write_manifest(manifest, tmp_path)
        back = read_manifest(tmp_path)
        assert manifest_bytes(back) == manifest_bytes(manifest)
        assert back.counts == count_records(records)
