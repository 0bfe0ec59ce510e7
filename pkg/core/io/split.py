from dataclasses import replace

import numpy as np

from core.errors import DomainError
from core.io.manifest import SequenceRecord

import core.constants as c


def apportion(total: int, ratios: tuple[int, ...]) -> list[int]:
    """Largest-remainder apportionment; remainder ties go to the earlier split."""
    weight = sum(ratios)
    quotas = [total * r / weight for r in ratios]
    sizes = [int(q) for q in quotas]
    remainders = sorted(
        range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i)
    )
    for i in remainders[: total - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split_dataset(
    records: list[SequenceRecord],
    ratios: tuple[int, ...] = c.SPLIT_RATIOS,
    seed: int = 0,
) -> list[SequenceRecord]:
    """Tags whole sequences train / test / val, returned in id order."""
    if not records:
        raise DomainError("cannot split an empty record list")
    if len(ratios) != len(c.SPLIT_TAGS) or any(
        not isinstance(r, int) or r <= 0 for r in ratios
    ):
        raise DomainError(f"split ratios must be {len(c.SPLIT_TAGS)} positive integers")

    ordered = sorted(records, key=lambda r: r.id)
    order = np.random.default_rng(seed).permutation(len(ordered))
    tags: dict[int, str] = {}
    start = 0
    for tag, size in zip(c.SPLIT_TAGS, apportion(len(ordered), ratios)):
        for i in order[start : start + size]:
            tags[ordered[i].id] = tag
        start += size

    return [replace(r, split=tags[r.id]) for r in ordered]
