"""Edge-weight distributions conditioned on origin population.

Origins are grouped into half-open population bins ``[k*width, (k+1)*width)``
and the out-edge weights of each group are tallied into a normalised
histogram. Sampling picks the bin for a population, falling back to the
nearest non-empty bin (ties toward lower population), and draws from the
histogram truncated at a caller-supplied maximum.
"""

from __future__ import annotations

import csv
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, InfeasibleError
from .ingest import ABS_MIN_CELL, PopulationTable
from .network import ODNetwork

DIST_HEADER = ("bin_lo", "bin_hi", "weight", "probability")
DEFAULT_BIN_WIDTH = 25


@dataclass(frozen=True)
class WeightBin:
    lo: int
    hi: int
    weights: np.ndarray  # sorted int64 support
    probs: np.ndarray
    cum: np.ndarray


def _make_bin(lo: int, hi: int, weights, probs) -> WeightBin:
    weights = np.asarray(weights, dtype=np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    order = np.argsort(weights, kind="stable")
    weights, probs = weights[order], probs[order]
    for arr in (weights, probs):
        arr.setflags(write=False)
    cum = np.cumsum(probs)
    cum.setflags(write=False)
    return WeightBin(lo, hi, weights, probs, cum)


class ConditionalWeightDistribution:
    """Family of weight histograms indexed by origin-population bin."""

    def __init__(self, bin_width: int, bins: dict[int, WeightBin]):
        if bin_width < 1:
            raise ValueError("bin_width must be >= 1")
        self.bin_width = bin_width
        self.bins = {k: bins[k] for k in sorted(bins)}
        self._keys = np.array(list(self.bins), dtype=np.int64)

    @property
    def support_max(self) -> int:
        return max((int(b.weights[-1]) for b in self.bins.values()), default=0)

    @property
    def population_bins(self) -> list[tuple[int, int]]:
        return [(b.lo, b.hi) for b in self.bins.values()]

    def is_empty(self) -> bool:
        return not self.bins

    def resolve_bin(self, population: int) -> WeightBin:
        """Bin holding ``population``, or the nearest non-empty one."""
        if not self.bins:
            raise InfeasibleError("weight distribution has no non-empty bins")
        k = int(population) // self.bin_width
        b = self.bins.get(k)
        if b is not None:
            return b
        # Bin centres are equally spaced, so centre distance is |k - key|.
        # argmin returns the first minimum, i.e. the lower-population bin on ties.
        idx = int(np.argmin(np.abs(self._keys - k)))
        return self.bins[int(self._keys[idx])]

    def probabilities(self, population: int) -> dict[int, float]:
        b = self.resolve_bin(population)
        return {int(w): float(p) for w, p in zip(b.weights, b.probs)}

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConditionalWeightDistribution):
            return NotImplemented
        if self.bin_width != other.bin_width or list(self.bins) != list(other.bins):
            return False
        return all(
            np.array_equal(a.weights, b.weights) and np.array_equal(a.probs, b.probs)
            for a, b in zip(self.bins.values(), other.bins.values())
        )


def build_conditional(
    reference: ODNetwork,
    populations: PopulationTable,
    bin_width: int = DEFAULT_BIN_WIDTH,
    *,
    min_cell: int | None = ABS_MIN_CELL,
) -> ConditionalWeightDistribution:
    """Tally out-edge weights of ``reference`` by origin-population bin.

    Weights below ``min_cell`` are left out of the tally so that samples are
    always valid edges under the release protocol; pass ``None`` to keep them.
    """
    if bin_width < 1:
        raise ValueError("bin_width must be >= 1")
    tallies: dict[int, Counter] = defaultdict(Counter)
    for (origin, _), w in reference.items():
        if origin not in populations:
            raise DataError(f"origin {origin!r} has no population entry")
        if min_cell is not None and w < min_cell:
            continue
        tallies[populations[origin] // bin_width][w] += 1
    bins = {}
    for k, counter in tallies.items():
        total = sum(counter.values())
        ws = sorted(counter)
        bins[k] = _make_bin(k * bin_width, (k + 1) * bin_width, ws, [counter[w] / total for w in ws])
    return ConditionalWeightDistribution(bin_width, bins)


def sample_weight(dist: ConditionalWeightDistribution, population: int, max_weight: int, rng: np.random.Generator) -> int:
    """Draw a weight <= ``max_weight`` from the bin for ``population``.

    The histogram is renormalised over its support at or below
    ``max_weight``; when that is empty ``max_weight`` itself is returned.
    """
    b = dist.resolve_bin(population)
    k = int(np.searchsorted(b.weights, max_weight, side="right"))
    if k == 0:
        return int(max_weight)
    u = rng.random() * b.cum[k - 1]
    idx = min(int(np.searchsorted(b.cum[:k], u, side="right")), k - 1)
    return int(b.weights[idx])


def write_distribution(dist: ConditionalWeightDistribution, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DIST_HEADER)
        for b in dist.bins.values():
            for w, p in zip(b.weights, b.probs):
                writer.writerow((b.lo, b.hi, int(w), repr(float(p))))


def load_distribution(path) -> ConditionalWeightDistribution:
    rows: dict[tuple[int, int], list[tuple[int, float]]] = defaultdict(list)
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != DIST_HEADER:
            raise DataError(f"{path}:1: expected header {','.join(DIST_HEADER)!r}")
        for row in reader:
            if not row:
                continue
            try:
                lo, hi, w = int(row[0]), int(row[1]), int(row[2])
                p = float(row[3])
            except (ValueError, IndexError):
                raise DataError(f"{path}:{reader.line_num}: malformed row {row!r}") from None
            rows[(lo, hi)].append((w, p))
    widths = {hi - lo for lo, hi in rows}
    if len(widths) > 1:
        raise DataError(f"{path}: inconsistent bin widths {sorted(widths)}")
    width = widths.pop() if widths else DEFAULT_BIN_WIDTH
    bins = {}
    for (lo, hi), entries in rows.items():
        if lo % width:
            raise DataError(f"{path}: bin [{lo},{hi}) not aligned to width {width}")
        total = sum(p for _, p in entries)
        if abs(total - 1.0) > 1e-9:
            raise DataError(f"{path}: bin [{lo},{hi}) probabilities sum to {total}")
        bins[lo // width] = _make_bin(lo, hi, [w for w, _ in entries], [p for _, p in entries])
    return ConditionalWeightDistribution(width, bins)
