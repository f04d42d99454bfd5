"""Comparison metrics between coarse networks and the text report that bundles them."""

from __future__ import annotations

import io
import math
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import _backend
from .errors import DataError
from .network import Level, ODNetwork, PartitionHierarchy, aggregate, edge_intersection

Pair = tuple[str, str]


def node_universe(*nets: ODNetwork) -> list[str]:
    """Sorted union of every zone code on either side of ``nets``."""
    nodes = set()
    for net in nets:
        for o, d in net.keys():
            nodes.add(o)
            nodes.add(d)
    return sorted(nodes)


def corr2d(a: ODNetwork, b: ODNetwork, nodes: Sequence[str] | None = None) -> float:
    """Pearson correlation of the two adjacency matrices over ``nodes x nodes``.

    Computed from exact integer moments over the stored edges; every other
    cell of the matrix is a zero.
    """
    if a.origin_level is not b.origin_level or a.dest_level is not b.dest_level:
        raise DataError("corr2d needs networks on the same levels")
    if nodes is None:
        nodes = node_universe(a, b)
    else:
        known = set(nodes)
        stray = [c for c in node_universe(a, b) if c not in known]
        if stray:
            raise DataError(f"zone {stray[0]!r} outside the supplied node universe")
    cells = len(nodes) ** 2
    sa = sum(a.edges.values())
    sb = sum(b.edges.values())
    saa = sum(w * w for w in a.edges.values())
    sbb = sum(w * w for w in b.edges.values())
    sab = sum(w * b.weight(*p) for p, w in a.items())
    num = cells * sab - sa * sb
    va = cells * saa - sa * sa
    vb = cells * sbb - sb * sb
    if va == 0 or vb == 0:
        raise DataError("undefined correlation: constant adjacency matrix")
    if num * num == va * vb:
        return 1.0 if num > 0 else -1.0
    return num / (math.sqrt(va) * math.sqrt(vb))


def mse_overlap(pairs: Iterable[Pair], b: ODNetwork, other: ODNetwork) -> float:
    """Mean squared weight difference over ``pairs`` (each present in both)."""
    pairs = list(pairs)
    if not pairs:
        raise DataError("MSE over an empty edge set")
    total = 0
    for p in pairs:
        if p not in b or p not in other:
            raise DataError(f"pair {p!r} missing from a compared network")
        diff = b.edges[p] - other.edges[p]
        total += diff * diff
    return total / len(pairs)


def _index(net: ODNetwork, nodes: Sequence[str] | None):
    if net.edge_count == 0:
        raise DataError("metric undefined on an empty network")
    nodes = list(nodes) if nodes is not None else node_universe(net)
    return nodes, {c: i for i, c in enumerate(nodes)}


def weighted_clustering(net: ODNetwork, *, mode: str = "max", nodes: Sequence[str] | None = None) -> float:
    """Average weighted clustering coefficient (cube-root triangle intensity).

    Weights are divided by the largest edge weight of the whole network,
    self-loops included, and self-loops never form triangles. Nodes with
    fewer than two neighbours count as 0 in the average.

    ``mode="max"`` symmetrises each pair by its larger direction and uses the
    undirected coefficient; ``mode="directed"`` uses the directed-triangle
    generalisation over all four orientation patterns.
    """
    nodes, idx = _index(net, nodes)
    n = len(nodes)
    wmax = max(net.edges.values())
    W = np.zeros((n, n))
    for (o, d), w in net.items():
        if o != d:
            W[idx[o], idx[d]] = w / wmax
    if mode == "max":
        S = np.maximum(W, W.T)
        C = np.cbrt(S)
        k = (S > 0).sum(axis=1)
        tri = np.einsum("ij,jk,ki->i", C, C, C)
        denom = k * (k - 1)
    elif mode == "directed":
        C = np.cbrt(W)
        CS = C + C.T
        tri = np.einsum("ij,jk,ki->i", CS, CS, CS)
        A = W > 0
        k = A.sum(axis=0) + A.sum(axis=1)
        recip = (A & A.T).sum(axis=1)
        denom = 2 * (k * (k - 1) - 2 * recip)
    else:
        raise ValueError(f"unknown clustering mode {mode!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        ci = np.where(denom > 0, tri / np.where(denom > 0, denom, 1), 0.0)
    return float(ci.mean())


@dataclass(frozen=True)
class PathStats:
    mean: float
    reachable_pairs: int
    reachable_fraction: float


def avg_shortest_path(net: ODNetwork, *, nodes: Sequence[str] | None = None, backend: str | None = None) -> PathStats:
    """Mean directed shortest-path length with edge length ``1/w``.

    Averaged over ordered pairs ``(i, j)``, ``i != j``, with ``j`` reachable
    from ``i``; unreachable pairs are left out and reported via the fraction.
    """
    nodes, idx = _index(net, nodes)
    n = len(nodes)
    adj: dict[int, list[tuple[int, float]]] = defaultdict(list)
    for (o, d), w in net.items():
        if o != d:
            adj[idx[o]].append((idx[d], 1.0 / w))
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices, lengths = [], []
    for i in range(n):
        row = sorted(adj.get(i, ()))
        indices.extend(j for j, _ in row)
        lengths.extend(length for _, length in row)
        indptr[i + 1] = len(indices)
    total, count = _backend.get(backend).apsp_stats(
        indptr, np.asarray(indices, dtype=np.int64), np.asarray(lengths, dtype=np.float64), n
    )
    pairs = n * (n - 1)
    return PathStats(total / count if count else float("nan"), int(count), count / pairs if pairs else 0.0)


# -- distributions ------------------------------------------------------------


def weight_histogram(net: ODNetwork, bin_width: int = 1) -> list[tuple[int, int, int]]:
    """Rows ``(bin_lo, edge_count, commuters)`` for bins ``[lo, lo + bin_width)``."""
    counts: dict[int, list[int]] = defaultdict(lambda: [0, 0])
    for w in net.edges.values():
        row = counts[(w // bin_width) * bin_width]
        row[0] += 1
        row[1] += w
    return [(lo, *counts[lo]) for lo in sorted(counts)]


def cumulative_population(net: ODNetwork) -> list[tuple[int, int]]:
    """Rows ``(w, commuters on edges of weight <= w)``."""
    hist = weight_histogram(net, 1)
    out, running = [], 0
    for w, _, commuters in hist:
        running += commuters
        out.append((w, running))
    return out


def strength_table(net: ODNetwork) -> list[tuple[str, int, int, int]]:
    """Rows ``(node, out_strength, in_strength, total)`` over all nodes."""
    out_s: dict[str, int] = defaultdict(int)
    in_s: dict[str, int] = defaultdict(int)
    for (o, d), w in net.items():
        out_s[o] += w
        in_s[d] += w
    return [(c, out_s[c], in_s[c], out_s[c] + in_s[c]) for c in node_universe(net)]


def strength_histogram(net: ODNetwork, bin_width: int = 100) -> list[tuple[int, int]]:
    """Rows ``(bin_lo, node_count)`` of total node strength."""
    counts: dict[int, int] = defaultdict(int)
    for _, _, _, total in strength_table(net):
        counts[(total // bin_width) * bin_width] += 1
    return sorted(counts.items())


def missing_edge_histogram(b: ODNetwork, a: ODNetwork, bin_width: int = 1) -> list[tuple[int, int, int]]:
    """Weight histogram of edges of ``b`` that ``a`` lacks."""
    missing = b.restrict(sorted(b.keys() - a.keys()))
    return weight_histogram(missing, bin_width)


# -- reports ------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ValidationReport:
    """Key/value summary plus named CSV sections; renders deterministically."""

    summary: dict[str, object] = field(default_factory=dict)
    sections: dict[str, tuple[tuple[str, ...], list[tuple]]] = field(default_factory=dict)

    def render(self) -> str:
        buf = io.StringIO()
        buf.write("[summary]\nkey,value\n")
        for k, v in self.summary.items():
            buf.write(f"{k},{_fmt(v)}\n")
        for name, (header, rows) in self.sections.items():
            buf.write(f"\n[{name}]\n")
            buf.write(",".join(header) + "\n")
            for row in rows:
                buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.render())


DEFAULT_PAIRS = (("B", "A"), ("B", "C"), ("A", "C"))


def surrogate_report(
    fine: ODNetwork,
    surrogate: ODNetwork,
    coarse: ODNetwork,
    hierarchy: PartitionHierarchy,
    *,
    pairs: Sequence[tuple[str, str]] = DEFAULT_PAIRS,
    clustering_mode: str = "max",
    backend: str | None = None,
) -> ValidationReport:
    """Compare released (``A``), surrogate (``C``) and coarse truth (``B``) at the coarse level.

    Starred networks keep only the overlapping edges ``E_AB``.
    """
    A = aggregate(fine, hierarchy)
    C = aggregate(surrogate, hierarchy)
    B = coarse
    e_ab = sorted(edge_intersection(B, A))
    nets = {"A": A, "B": B, "C": C}
    universe = node_universe(A, B, C)
    rep = ValidationReport()
    s = rep.summary
    for name, net in (("R", fine), ("S", surrogate), ("A", A), ("B", B), ("C", C)):
        s[f"edges.{name}"] = net.edge_count
        s[f"total_commuters.{name}"] = net.total_commuters
    s["edges.E_AB"] = len(e_ab)
    s["edges.B_not_A"] = B.edge_count - len(e_ab)
    s["nodes"] = len(universe)

    rows = []
    for x, y in pairs:
        if x not in nets or y not in nets:
            raise DataError(f"unknown network in pair {x},{y}; choose from A, B, C")
        r = corr2d(nets[x], nets[y], universe)
        m = mse_overlap(e_ab, nets[x], nets[y]) if e_ab else float("nan")
        s[f"corr2d.{x}_{y}"] = r
        s[f"mse.{x}_{y}"] = m
        rows.append((f"{x},{y}", r, m))
    rep.sections["pairs"] = (("x", "y", "corr2d", "mse"), [(*p.split(","), r, m) for p, r, m in rows])

    stats_rows = []
    starred = {"A*": A.restrict(e_ab), "C*": C.restrict(e_ab), "B*": B.restrict(e_ab), "B": B}
    for name, net in starred.items():
        if net.edge_count == 0:
            continue
        ps = avg_shortest_path(net, nodes=universe, backend=backend)
        cc = weighted_clustering(net, mode=clustering_mode, nodes=universe)
        s[f"shortest_path.{name}"] = ps.mean
        s[f"reachable_fraction.{name}"] = ps.reachable_fraction
        s[f"clustering.{name}"] = cc
        stats_rows.append((name, ps.mean, ps.reachable_fraction, cc))
    rep.sections["network_stats"] = (("network", "shortest_path", "reachable_fraction", "clustering"), stats_rows)

    for name, net in (("R", fine), ("S", surrogate)):
        rep.sections[f"weight_hist_w1.{name}"] = (("bin_lo", "edges", "commuters"), weight_histogram(net, 1))
    for name, net in (("A", A), ("B", B), ("C", C)):
        rep.sections[f"weight_hist_w10.{name}"] = (("bin_lo", "edges", "commuters"), weight_histogram(net, 10))
        rep.sections[f"cumulative.{name}"] = (("weight", "commuters"), cumulative_population(net))
        rep.sections[f"strength.{name}"] = (("node", "out", "in", "total"), strength_table(net))
    rep.sections["delta_w.B_A"] = (
        ("origin", "dest", "w_B", "delta_w"),
        [(o, d, B.edges[(o, d)], B.edges[(o, d)] - A.edges[(o, d)]) for o, d in e_ab],
    )
    rep.sections["delta_w.B_C"] = (
        ("origin", "dest", "w_B", "delta_w"),
        [(o, d, B.edges[(o, d)], B.edges[(o, d)] - C.weight(o, d)) for o, d in e_ab],
    )
    rep.sections["missing_edges.B_not_A"] = (("bin_lo", "edges", "commuters"), missing_edge_histogram(B, A, 1))
    return rep


@dataclass
class ConsistencyTable:
    pairwise: list[tuple[int, int, float, float]]  # (i, j, corr2d, mse)
    stats: list[tuple[int, float, float]]  # (i, shortest_path, clustering)


def compare_instantiations(
    surrogates: Sequence[ODNetwork],
    coarse: ODNetwork,
    hierarchy: PartitionHierarchy,
    *,
    e_ab: Iterable[Pair] | None = None,
    clustering_mode: str = "max",
) -> ConsistencyTable:
    """Pairwise agreement between aggregated surrogates from different seeds.

    MSE is taken over the overlap ``E_AB`` (by default the intersection of
    ``coarse`` with the first aggregated surrogate); path and clustering
    statistics use each aggregate restricted to that overlap.
    """
    if len(surrogates) < 2:
        raise DataError("need at least two surrogates to compare")
    aggs = [aggregate(s, hierarchy) for s in surrogates]
    if any(a.origin_level is not Level.COARSE for a in aggs):
        raise DataError("surrogates must aggregate to the coarse level")
    e_ab = sorted(e_ab) if e_ab is not None else sorted(edge_intersection(coarse, aggs[0]))
    universe = node_universe(coarse, *aggs)
    pairwise = []
    for i, j in combinations(range(len(aggs)), 2):
        ri, rj = aggs[i].restrict(e_ab), aggs[j].restrict(e_ab)
        both = [p for p in e_ab if p in ri and p in rj]
        pairwise.append((i, j, corr2d(aggs[i], aggs[j], universe), mse_overlap(both, ri, rj)))
    stats = []
    for i, a in enumerate(aggs):
        star = a.restrict(e_ab)
        stats.append(
            (i, avg_shortest_path(star, nodes=universe).mean, weighted_clustering(star, mode=clustering_mode, nodes=universe))
        )
    return ConsistencyTable(pairwise, stats)
