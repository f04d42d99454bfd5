"""Partitioned origin->destination networks and edge-set algebra.

Networks are sparse maps ``(origin, dest) -> weight`` with positive integer
weights. Zone codes are opaque strings; the parent of a fine zone always comes
from an explicit :class:`PartitionHierarchy`, never from the code itself.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

from .errors import DataError

Pair = tuple[str, str]


class Level(enum.Enum):
    FINE_ORIGIN = "SA1"
    FINE_DEST = "DZN"
    COARSE = "SA2"


@dataclass(frozen=True)
class PartitionHierarchy:
    """Child->parent maps from both fine partitions onto the coarse one."""

    sa1_to_sa2: Mapping[str, str]
    dzn_to_sa2: Mapping[str, str]
    _children: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sa1 = {k: self.sa1_to_sa2[k] for k in sorted(self.sa1_to_sa2)}
        dzn = {k: self.dzn_to_sa2[k] for k in sorted(self.dzn_to_sa2)}
        for mapping in (sa1, dzn):
            for child, parent in mapping.items():
                if not child or not parent:
                    raise DataError("empty zone code in correspondence")
        object.__setattr__(self, "sa1_to_sa2", MappingProxyType(sa1))
        object.__setattr__(self, "dzn_to_sa2", MappingProxyType(dzn))
        children = {Level.FINE_ORIGIN: defaultdict(list), Level.FINE_DEST: defaultdict(list)}
        for child, parent in sa1.items():
            children[Level.FINE_ORIGIN][parent].append(child)
        for child, parent in dzn.items():
            children[Level.FINE_DEST][parent].append(child)
        object.__setattr__(
            self, "_children", {lvl: {p: tuple(c) for p, c in d.items()} for lvl, d in children.items()}
        )

    @property
    def sa2_codes(self) -> list[str]:
        return sorted(set(self.sa1_to_sa2.values()) | set(self.dzn_to_sa2.values()))

    def parent(self, code: str, level: Level) -> str:
        if level is Level.COARSE:
            return code
        mapping = self.sa1_to_sa2 if level is Level.FINE_ORIGIN else self.dzn_to_sa2
        try:
            return mapping[code]
        except KeyError:
            raise DataError(f"zone {code!r} at level {level.value} has no parent in hierarchy") from None

    def children(self, sa2: str, level: Level) -> tuple[str, ...]:
        """Fine zones of ``level`` inside coarse zone ``sa2`` (sorted)."""
        return self._children[level].get(sa2, ())

    def parent_map(self, level: Level) -> Mapping[str, str]:
        if level is Level.FINE_ORIGIN:
            return self.sa1_to_sa2
        if level is Level.FINE_DEST:
            return self.dzn_to_sa2
        raise ValueError("coarse level has no parent map")


class ODNetwork:
    """Directed weighted bipartite edge list between two partition levels.

    Edges are stored sorted by ``(origin, dest)`` so iteration order is
    deterministic. Instances are treated as immutable after construction.
    """

    __slots__ = ("origin_level", "dest_level", "_w", "_total")

    def __init__(self, origin_level: Level, dest_level: Level, edges: Mapping[Pair, int] | None = None):
        self.origin_level = origin_level
        self.dest_level = dest_level
        edges = edges or {}
        w = {}
        total = 0
        for key in sorted(edges):
            o, d = key
            weight = edges[key]
            if not isinstance(o, str) or not isinstance(d, str) or not o or not d:
                raise DataError(f"invalid zone codes in edge {key!r}")
            if isinstance(weight, bool) or int(weight) != weight or weight < 1:
                raise DataError(f"edge {key!r} has invalid weight {weight!r}; weights must be integers >= 1")
            w[key] = int(weight)
            total += int(weight)
        self._w = w
        self._total = total

    @classmethod
    def from_rows(cls, origin_level: Level, dest_level: Level, rows: Iterable[tuple[str, str, int]]) -> ODNetwork:
        edges: dict[Pair, int] = {}
        for o, d, w in rows:
            if (o, d) in edges:
                raise DataError(f"duplicate edge ({o!r}, {d!r})")
            edges[(o, d)] = w
        return cls(origin_level, dest_level, edges)

    @property
    def edges(self) -> Mapping[Pair, int]:
        return MappingProxyType(self._w)

    @property
    def total_commuters(self) -> int:
        return self._total

    @property
    def edge_count(self) -> int:
        return len(self._w)

    def weight(self, origin: str, dest: str) -> int:
        """Weight of an edge, 0 when absent."""
        return self._w.get((origin, dest), 0)

    def keys(self):
        return self._w.keys()

    def items(self):
        return self._w.items()

    def origins(self) -> list[str]:
        return sorted({o for o, _ in self._w})

    def dests(self) -> list[str]:
        return sorted({d for _, d in self._w})

    def __len__(self) -> int:
        return len(self._w)

    def __iter__(self) -> Iterator[Pair]:
        return iter(self._w)

    def __contains__(self, pair) -> bool:
        return pair in self._w

    def __eq__(self, other) -> bool:
        if not isinstance(other, ODNetwork):
            return NotImplemented
        return (
            self.origin_level is other.origin_level
            and self.dest_level is other.dest_level
            and self._w == other._w
        )

    def __repr__(self) -> str:
        return (
            f"ODNetwork({self.origin_level.value}->{self.dest_level.value}, "
            f"|E|={self.edge_count}, sum_w={self.total_commuters})"
        )

    def restrict(self, pairs: Iterable[Pair]) -> ODNetwork:
        """Sub-network on the given pairs (pairs absent from self are skipped)."""
        return ODNetwork(
            self.origin_level, self.dest_level, {p: self._w[p] for p in pairs if p in self._w}
        )


def aggregate(net: ODNetwork, hierarchy: PartitionHierarchy, *, origin: bool = True, dest: bool = True) -> ODNetwork:
    """Sum edge weights into coarse zones.

    By default both ends are lifted to the coarse level; pass ``dest=False``
    to build a mixed COARSE->DZN network (or ``origin=False`` likewise).
    """
    o_map = hierarchy.parent_map(net.origin_level) if origin and net.origin_level is not Level.COARSE else None
    d_map = hierarchy.parent_map(net.dest_level) if dest and net.dest_level is not Level.COARSE else None
    out: dict[Pair, int] = defaultdict(int)
    for (o, d), w in net.items():
        if o_map is not None:
            try:
                o = o_map[o]
            except KeyError:
                raise DataError(f"zone {o!r} at level {net.origin_level.value} has no parent in hierarchy") from None
        if d_map is not None:
            try:
                d = d_map[d]
            except KeyError:
                raise DataError(f"zone {d!r} at level {net.dest_level.value} has no parent in hierarchy") from None
        out[(o, d)] += w
    return ODNetwork(
        Level.COARSE if origin else net.origin_level,
        Level.COARSE if dest else net.dest_level,
        out,
    )


def _check_levels(a: ODNetwork, b: ODNetwork) -> None:
    if a.origin_level is not b.origin_level or a.dest_level is not b.dest_level:
        raise DataError(
            f"level mismatch: {a.origin_level.value}->{a.dest_level.value} vs "
            f"{b.origin_level.value}->{b.dest_level.value}"
        )


def edge_intersection(a: ODNetwork, b: ODNetwork) -> frozenset[Pair]:
    _check_levels(a, b)
    return frozenset(a.keys() & b.keys())


def edge_complement(b: ODNetwork, a: ODNetwork) -> frozenset[Pair]:
    """Pairs of ``b`` that are absent from ``a``."""
    _check_levels(a, b)
    return frozenset(b.keys() - a.keys())


def weights_on(pairs: Iterable[Pair], net: ODNetwork) -> list[int]:
    """Weights of ``net`` on ``pairs``, index-aligned with ``pairs``.

    Sets are iterated in sorted order, so pass ``sorted(s)`` alongside the
    result when alignment with an external list matters.
    """
    if isinstance(pairs, (set, frozenset)):
        pairs = sorted(pairs)
    out = []
    for p in pairs:
        try:
            out.append(net.edges[p])
        except KeyError:
            raise DataError(f"pair {p!r} not present in network") from None
    return out


def weight_discrepancies(pairs: Iterable[Pair], b: ODNetwork, a: ODNetwork) -> list[int]:
    """Element-wise ``w_b - w_a`` over ``pairs`` (sorted when given a set)."""
    if isinstance(pairs, (set, frozenset)):
        pairs = sorted(pairs)
    else:
        pairs = list(pairs)
    return [wb - wa for wb, wa in zip(weights_on(pairs, b), weights_on(pairs, a))]


def out_strengths(net: ODNetwork) -> dict[str, int]:
    out: dict[str, int] = defaultdict(int)
    for (o, _), w in net.items():
        out[o] += w
    return {k: out[k] for k in sorted(out)}


def in_strengths(net: ODNetwork) -> dict[str, int]:
    out: dict[str, int] = defaultdict(int)
    for (_, d), w in net.items():
        out[d] += w
    return {k: out[k] for k in sorted(out)}
