"""CSV readers/writers for edge lists, correspondences and population tables.

File formats (UTF-8, header row required):

* edge list: ``origin,dest,weight``
* correspondence: ``child,parent``
* population: ``zone,count``
"""

from __future__ import annotations

import csv
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType

from .errors import DataError
from .network import Level, ODNetwork, PartitionHierarchy

EDGE_HEADER = ("origin", "dest", "weight")
CORRESPONDENCE_HEADER = ("child", "parent")
POPULATION_HEADER = ("zone", "count")

ABS_MIN_CELL = 3


@dataclass(frozen=True)
class PopulationTable:
    counts: Mapping[str, int]
    level: Level

    def __post_init__(self):
        for zone, c in self.counts.items():
            if isinstance(c, bool) or int(c) != c or c < 0:
                raise DataError(f"population of {zone!r} must be a non-negative integer, got {c!r}")
        object.__setattr__(self, "counts", MappingProxyType({k: int(self.counts[k]) for k in sorted(self.counts)}))

    @property
    def size(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def __getitem__(self, zone: str) -> int:
        return self.counts[zone]

    def __contains__(self, zone: str) -> bool:
        return zone in self.counts

    def get(self, zone: str, default: int = 0) -> int:
        return self.counts.get(zone, default)


@dataclass
class PreprocessReport:
    edges_removed: int = 0
    commuters_removed: int = 0
    categories_matched: list[str] = field(default_factory=list)


def _read_rows(path, header: tuple[str, ...], delimiter: str):
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh, delimiter=delimiter)
        first = next(reader, None)
        if first is None or tuple(c.strip() for c in first) != header:
            raise DataError(f"{path}:1: expected header {','.join(header)!r}, got {first!r}")
        for row in reader:
            lineno = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
            yield lineno, [c.strip() for c in row]


def _parse_int(text: str, path, lineno: int, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: {what} {text!r} is not an integer") from None


def load_network(path, origin_level: Level, dest_level: Level, *, delimiter: str = ",") -> ODNetwork:
    edges: dict[tuple[str, str], int] = {}
    for lineno, (o, d, w) in _read_rows(path, EDGE_HEADER, delimiter):
        if not o or not d:
            raise DataError(f"{path}:{lineno}: empty zone code")
        weight = _parse_int(w, path, lineno, "weight")
        if weight < 1:
            raise DataError(f"{path}:{lineno}: weight {weight} < 1")
        if (o, d) in edges:
            raise DataError(f"{path}:{lineno}: duplicate edge ({o}, {d})")
        edges[(o, d)] = weight
    return ODNetwork(origin_level, dest_level, edges)


def write_network(net: ODNetwork, path, *, delimiter: str = ",") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(EDGE_HEADER)
        for (o, d), w in net.items():
            writer.writerow((o, d, w))


def _load_correspondence(path, delimiter: str) -> dict[str, str]:
    mapping: dict[str, str] = {}
    for lineno, (child, parent) in _read_rows(path, CORRESPONDENCE_HEADER, delimiter):
        if not child or not parent:
            raise DataError(f"{path}:{lineno}: empty zone code")
        prev = mapping.get(child)
        if prev is not None and prev != parent:
            raise DataError(f"{path}:{lineno}: child {child!r} mapped to both {prev!r} and {parent!r}")
        mapping[child] = parent
    return mapping


def load_hierarchy(sa1_path, dzn_path, *, delimiter: str = ",") -> PartitionHierarchy:
    return PartitionHierarchy(_load_correspondence(sa1_path, delimiter), _load_correspondence(dzn_path, delimiter))


def write_correspondence(mapping: Mapping[str, str], path, *, delimiter: str = ",") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(CORRESPONDENCE_HEADER)
        for child in sorted(mapping):
            writer.writerow((child, mapping[child]))


def load_population(path, level: Level, *, delimiter: str = ",") -> PopulationTable:
    counts: dict[str, int] = {}
    for lineno, (zone, count) in _read_rows(path, POPULATION_HEADER, delimiter):
        if not zone:
            raise DataError(f"{path}:{lineno}: empty zone code")
        value = _parse_int(count, path, lineno, "count")
        if value < 0:
            raise DataError(f"{path}:{lineno}: negative count {value}")
        if zone in counts:
            raise DataError(f"{path}:{lineno}: duplicate zone {zone!r}")
        counts[zone] = value
    return PopulationTable(counts, level)


def write_population(table: PopulationTable, path, *, delimiter: str = ",") -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(POPULATION_HEADER)
        for zone, count in table.counts.items():
            writer.writerow((zone, count))


def strip_non_geographic(net: ODNetwork, blocklist: Iterable[str]) -> tuple[ODNetwork, PreprocessReport]:
    """Drop every edge touching a blocklisted zone code."""
    blocked = set(blocklist)
    report = PreprocessReport()
    if not blocked:
        return net, report
    kept = {}
    matched = set()
    for (o, d), w in net.items():
        hit = {o, d} & blocked
        if hit:
            matched |= hit
            report.edges_removed += 1
            report.commuters_removed += w
        else:
            kept[(o, d)] = w
    report.categories_matched = sorted(matched)
    return ODNetwork(net.origin_level, net.dest_level, kept), report


def below_min_cell(net: ODNetwork, min_cell: int = ABS_MIN_CELL) -> list[tuple[str, str]]:
    """Pairs whose weight is below the protocol's minimum cell size.

    Loading accepts these; ``ingest-check`` reports them for sources that
    claim ABS-style provenance.
    """
    return [pair for pair, w in net.items() if w < min_cell]


def check_hierarchy_covers(net: ODNetwork, hierarchy: PartitionHierarchy) -> list[tuple[str, Level]]:
    """Zones of ``net`` without a parent in ``hierarchy``."""
    missing = []
    for level, codes in ((net.origin_level, net.origins()), (net.dest_level, net.dests())):
        if level is Level.COARSE:
            continue
        parents = hierarchy.parent_map(level)
        missing.extend((c, level) for c in codes if c not in parents)
    return missing
