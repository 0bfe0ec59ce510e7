import csv
import pathlib

import numpy as np

from core.errors import DatasetIOError, FormatError
from core.metrics import CorrespondenceSet

COLUMNS = ["id", "x1", "y1", "x2", "y2", "region"]


def write_correspondences(corr: CorrespondenceSet, path: pathlib.Path) -> None:
    ids = corr.ids if corr.ids is not None else tuple(range(len(corr)))
    regions = corr.regions if corr.regions is not None else ("",) * len(corr)
    try:
        with open(path, "w", newline="") as file:
            writer = csv.writer(file, lineterminator="\n")
            writer.writerow(COLUMNS)
            for i, (x1, y1), (x2, y2), region in zip(ids, corr.c1, corr.c2, regions):
                writer.writerow([i, repr(float(x1)), repr(float(y1)), repr(float(x2)), repr(float(y2)), region or ""])
    except OSError as e:
        raise DatasetIOError(f"cannot write correspondences {path}: {e}") from e


def read_correspondences(path: pathlib.Path) -> CorrespondenceSet:
    try:
        with open(path, "r", newline="") as file:
            rows = list(csv.DictReader(file))
    except OSError as e:
        raise DatasetIOError(f"cannot read correspondences {path}: {e}") from e

    if rows and set(COLUMNS) - set(rows[0]):
        raise FormatError("columns", f"expected columns {COLUMNS}")
    try:
        ids = tuple(int(r["id"]) for r in rows)
        points = np.array(
            [[float(r[k]) for k in ("x1", "y1", "x2", "y2")] for r in rows]
        ).reshape(-1, 4)
    except (TypeError, ValueError) as e:
        raise FormatError("values", f"malformed correspondence row ({e})") from e

    regions = tuple(r["region"] or None for r in rows)
    return CorrespondenceSet(points[:, :2], points[:, 2:], regions, ids)
