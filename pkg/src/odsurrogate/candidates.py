"""Per-origin worker deficits and the candidate edge multiset that covers them."""

from __future__ import annotations

import csv
import zlib
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dist import ConditionalWeightDistribution, sample_weight
from .errors import DataError, InfeasibleError
from .ingest import ABS_MIN_CELL, PopulationTable
from .network import ODNetwork, out_strengths

CANDIDATE_HEADER = ("origin", "weight")


@dataclass(frozen=True, order=True)
class CandidateEdge:
    origin: str
    weight: int

    def __post_init__(self):
        if self.weight < ABS_MIN_CELL:
            raise DataError(f"candidate weight {self.weight} below minimum cell {ABS_MIN_CELL}")


def compute_deficits(net: ODNetwork, populations: PopulationTable) -> dict[str, int]:
    """``N_x - out_strength(x)`` for every origin in ``populations``.

    Values may be negative when perturbation inflated an origin's edges.
    """
    strengths = out_strengths(net)
    missing = [o for o in strengths if o not in populations]
    if missing:
        raise DataError(f"origin {missing[0]!r} of network has no population entry ({len(missing)} total)")
    return {x: n - strengths.get(x, 0) for x, n in populations.counts.items()}


def origin_rng(seed: int, origin: str) -> np.random.Generator:
    """Independent stream per origin, stable under iteration order."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(origin.encode("utf-8"))])


def generate_candidates(
    deficits: Mapping[str, int],
    dist: ConditionalWeightDistribution,
    populations: PopulationTable,
    seed: int,
    *,
    min_cell: int = ABS_MIN_CELL,
) -> list[CandidateEdge]:
    """Sample candidate weights until each origin's remaining deficit is below ``min_cell``.

    Draws are truncated at the remaining deficit, so every accepted weight
    fits and the loop always terminates.
    """
    if dist.is_empty():
        raise InfeasibleError("weight distribution has no non-empty bins")
    smallest = min(int(b.weights[0]) for b in dist.bins.values())
    if smallest < min_cell:
        raise DataError(f"distribution support contains weight {smallest} below minimum cell {min_cell}")
    out: list[CandidateEdge] = []
    for origin in sorted(deficits):
        remaining = deficits[origin]
        if remaining < min_cell:
            continue
        rng = origin_rng(seed, origin)
        population = populations[origin]
        while remaining >= min_cell:
            w = sample_weight(dist, population, remaining, rng)
            out.append(CandidateEdge(origin, w))
            remaining -= w
    out.sort()
    return out


def write_candidates(cands, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CANDIDATE_HEADER)
        for c in cands:
            writer.writerow((c.origin, c.weight))


def load_candidates(path) -> list[CandidateEdge]:
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CANDIDATE_HEADER:
            raise DataError(f"{path}:1: expected header {','.join(CANDIDATE_HEADER)!r}")
        for row in reader:
            if not row:
                continue
            try:
                out.append(CandidateEdge(row[0], int(row[1])))
            except (ValueError, IndexError):
                raise DataError(f"{path}:{reader.line_num}: malformed candidate row {row!r}") from None
    return sorted(out)
