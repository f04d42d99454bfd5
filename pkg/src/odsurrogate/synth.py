"""Synthetic census worlds and a stylised release-perturbation simulator.

A world places coarse zones uniformly in the unit square, scatters fine
origin and destination zones around them (a few "hub" zones hold many
destination zones with boosted attractiveness), and routes each origin's workers
to destinations with a gravity kernel ``A_y / (d + d0)**gamma`` followed by
multinomial rounding. Destination attractiveness is log-normal, so a large
``employment_hub_skew`` concentrates jobs in a few hub zones.

The perturbation adds bounded integer noise per cell, drops cells below the
minimum cell size and randomly suppresses small cells. With ``additivity``
on, a repair pass restores each coarse total, mimicking the older release
protocol.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .ingest import (
    ABS_MIN_CELL,
    PopulationTable,
    write_correspondence,
    write_network,
    write_population,
)
from .network import Level, ODNetwork, PartitionHierarchy, aggregate, in_strengths, out_strengths
from .seeding import derive_seed


@dataclass(frozen=True)
class SynthConfig:
    n_sa2: int = 200
    sa1_per_sa2_range: tuple[int, int] = (8, 12)
    dzn_per_sa2_range: tuple[int, int] = (1, 2)
    hub_fraction: float = 0.05
    dzn_per_hub_range: tuple[int, int] = (15, 30)
    hub_attraction: float = 5.0
    sa1_population_range: tuple[int, int] = (200, 800)
    employment_fraction: float = 0.5
    employment_hub_skew: float = 1.5
    gravity_exponent: float = 2.0
    distance_offset: float = 0.03
    zone_spread: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.n_sa2 < 2:
            raise ConfigError("n_sa2 must be >= 2")
        for name in ("sa1_per_sa2_range", "dzn_per_sa2_range", "dzn_per_hub_range", "sa1_population_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ConfigError(f"{name} must be a non-empty range, got {(lo, hi)}")
        if self.sa1_per_sa2_range[1] < 1 or self.dzn_per_sa2_range[1] < 1:
            raise ConfigError("each level needs at least one zone")
        if not 0 < self.employment_fraction <= 1:
            raise ConfigError("employment_fraction must be in (0, 1]")
        if not 0.0 <= self.hub_fraction <= 1.0:
            raise ConfigError("hub_fraction must be in [0, 1]")
        if self.employment_hub_skew <= 0 or self.gravity_exponent <= 0 or self.hub_attraction <= 0:
            raise ConfigError("employment_hub_skew, gravity_exponent and hub_attraction must be positive")

    @property
    def worker_range(self) -> tuple[int, int]:
        lo, hi = self.sa1_population_range
        f = self.employment_fraction
        return round(lo * f), round(hi * f)


@dataclass(frozen=True)
class PerturbConfig:
    min_cell: int = ABS_MIN_CELL
    noise_magnitude: int = 2
    suppress_below: int = 0
    p_suppress: float = 0.0
    small_threshold: int = 5
    p_suppress_small: float = 0.0
    additivity: bool = False

    def __post_init__(self):
        if self.min_cell < 1:
            raise ConfigError("min_cell must be >= 1")
        if self.noise_magnitude < 0:
            raise ConfigError("noise_magnitude must be >= 0")
        for name in ("p_suppress", "p_suppress_small"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be a probability, got {p}")


# Calibrated on the default world: the fine release keeps about 70% of
# commuters, the coarse release about 98% (see benchmarks/calibrate.py).
FINE_RELEASE = PerturbConfig(noise_magnitude=2, p_suppress_small=0.5, small_threshold=5)
COARSE_RELEASE = PerturbConfig(noise_magnitude=2, p_suppress_small=0.2, small_threshold=3)
MIXED_RELEASE = PerturbConfig(noise_magnitude=2, p_suppress_small=0.35, small_threshold=4)
PREVIOUS_RELEASE = PerturbConfig(noise_magnitude=1, additivity=True)


@dataclass
class World:
    hierarchy: PartitionHierarchy
    fine: ODNetwork
    n_x: PopulationTable
    n_y: PopulationTable
    # layout kept so a "previous census" can be redrawn on the same zones
    sa1_codes: list[str] = field(repr=False, default_factory=list)
    dzn_codes: list[str] = field(repr=False, default_factory=list)
    cost: np.ndarray | None = field(repr=False, default=None)
    cfg: SynthConfig | None = None


def _draw_flows(cfg: SynthConfig, sa1_codes, dzn_codes, kernel, rng) -> tuple[ODNetwork, PopulationTable, PopulationTable]:
    lo, hi = cfg.worker_range
    workers = rng.integers(lo, hi + 1, size=len(sa1_codes))
    probs = kernel / kernel.sum(axis=1, keepdims=True)
    flows = rng.multinomial(workers, probs)
    edges = {}
    rows, cols = np.nonzero(flows)
    for i, j in zip(rows.tolist(), cols.tolist()):
        edges[(sa1_codes[i], dzn_codes[j])] = int(flows[i, j])
    fine = ODNetwork(Level.FINE_ORIGIN, Level.FINE_DEST, edges)
    n_x = PopulationTable(dict(zip(sa1_codes, workers.tolist())), Level.FINE_ORIGIN)
    ins = in_strengths(fine)
    n_y = PopulationTable({y: ins.get(y, 0) for y in dzn_codes}, Level.FINE_DEST)
    return fine, n_x, n_y


def generate_ground_truth(cfg: SynthConfig) -> World:
    """Draw a hierarchy, a gravity-routed fine network and its exact populations."""
    rng = np.random.default_rng(derive_seed(cfg.seed, "synth.layout"))
    centres = rng.random((cfg.n_sa2, 2))
    n_hubs = round(cfg.hub_fraction * cfg.n_sa2)
    hubs = set(rng.choice(cfg.n_sa2, size=n_hubs, replace=False).tolist())
    sa1_to_sa2, dzn_to_sa2 = {}, {}
    sa1_xy, dzn_xy, boost = [], [], []
    for k in range(cfg.n_sa2):
        sa2 = f"2{k:05d}"
        dzn_range = cfg.dzn_per_hub_range if k in hubs else cfg.dzn_per_sa2_range
        n1 = int(rng.integers(cfg.sa1_per_sa2_range[0], cfg.sa1_per_sa2_range[1] + 1))
        nd = int(rng.integers(dzn_range[0], dzn_range[1] + 1))
        for _ in range(n1):
            sa1_to_sa2[f"1{len(sa1_to_sa2):07d}"] = sa2
            sa1_xy.append(centres[k] + rng.normal(0.0, cfg.zone_spread, 2))
        for _ in range(nd):
            dzn_to_sa2[f"3{len(dzn_to_sa2):06d}"] = sa2
            dzn_xy.append(centres[k] + rng.normal(0.0, cfg.zone_spread, 2))
            boost.append(cfg.hub_attraction if k in hubs else 1.0)
    if not dzn_to_sa2:
        raise ConfigError("configuration yields zero destination zones")
    if not sa1_to_sa2:
        raise ConfigError("configuration yields zero origin zones")
    sa1_xy, dzn_xy = np.array(sa1_xy), np.array(dzn_xy)
    attract = rng.lognormal(0.0, cfg.employment_hub_skew, len(dzn_xy)) * np.array(boost)
    dist = np.linalg.norm(sa1_xy[:, None, :] - dzn_xy[None, :, :], axis=2)
    kernel = attract[None, :] / (dist + cfg.distance_offset) ** cfg.gravity_exponent
    hierarchy = PartitionHierarchy(sa1_to_sa2, dzn_to_sa2)
    sa1_codes, dzn_codes = list(sa1_to_sa2), list(dzn_to_sa2)
    fine, n_x, n_y = _draw_flows(cfg, sa1_codes, dzn_codes, kernel, np.random.default_rng(derive_seed(cfg.seed, "synth.flows")))
    return World(hierarchy, fine, n_x, n_y, sa1_codes, dzn_codes, kernel, cfg)


def redraw(world: World, seed: int) -> World:
    """Independent draw of workers and flows on the same zones and kernel."""
    fine, n_x, n_y = _draw_flows(world.cfg, world.sa1_codes, world.dzn_codes, world.cost, np.random.default_rng(seed))
    return replace(world, fine=fine, n_x=n_x, n_y=n_y)


def perturb(net: ODNetwork, cfg: PerturbConfig, seed: int, hierarchy: PartitionHierarchy | None = None) -> ODNetwork:
    """Apply bounded noise and small-cell suppression to every cell.

    With ``cfg.additivity`` the coarse aggregate of the output is repaired
    towards that of the input; ``hierarchy`` is then required.
    """
    rng = np.random.default_rng(seed)
    keys = list(net.keys())
    w = np.fromiter(net.edges.values(), dtype=np.int64, count=len(keys))
    m = cfg.noise_magnitude
    noise = rng.integers(-m, m + 1, size=len(keys)) if m else np.zeros(len(keys), dtype=np.int64)
    u_true = rng.random(len(keys))
    u_small = rng.random(len(keys))
    out = w + noise
    keep = out >= cfg.min_cell
    keep &= ~((w < cfg.suppress_below) & (u_true < cfg.p_suppress))
    keep &= ~((out <= cfg.small_threshold) & (u_small < cfg.p_suppress_small))
    edges = {keys[i]: int(out[i]) for i in np.flatnonzero(keep).tolist()}
    if cfg.additivity:
        if hierarchy is None:
            raise ConfigError("additive perturbation needs a hierarchy")
        edges = _repair_additivity(net, edges, cfg, hierarchy, rng)
    return ODNetwork(net.origin_level, net.dest_level, edges)


def _repair_additivity(net, edges, cfg, hierarchy, rng):
    """Restore each coarse cell's total exactly when it is at least ``min_cell``.

    Shortfalls reinstate dropped cells at the minimum cell size (in random
    order) and top up the largest surviving cell. Surpluses are trimmed from
    the largest cells down to the minimum, then whole minimum-size cells are
    dropped and the remainder topped up. Coarse totals below ``min_cell``
    cannot be represented and are released as zero.
    """
    o_map = None if net.origin_level is Level.COARSE else hierarchy.parent_map(net.origin_level)
    d_map = None if net.dest_level is Level.COARSE else hierarchy.parent_map(net.dest_level)

    def lift(pair):
        o, d = pair
        return (o_map[o] if o_map else o, d_map[d] if d_map else d)

    groups: dict[tuple, list] = {}
    for pair in net.keys():
        groups.setdefault(lift(pair), []).append(pair)
    mc = cfg.min_cell
    for members in groups.values():
        target = sum(net.edges[p] for p in members)
        if target < mc:
            for p in members:
                edges.pop(p, None)
            continue
        alive = sorted((p for p in members if p in edges), key=lambda p: (-edges[p], p))
        surplus = sum(edges[p] for p in alive) - target
        for p in alive:
            if surplus <= 0:
                break
            take = min(surplus, edges[p] - mc)
            edges[p] -= take
            surplus -= take
        while surplus > 0:
            # every survivor is at mc here
            del edges[alive.pop()]
            surplus -= mc
        deficit = -surplus
        dropped = [p for p in members if p not in edges]
        for i in rng.permutation(len(dropped)).tolist():
            if deficit < mc:
                break
            edges[dropped[i]] = mc
            deficit -= mc
        if deficit > 0:
            alive = [p for p in members if p in edges]
            top = max(alive, key=lambda p: (edges[p], p))
            edges[top] += deficit
    return edges


@dataclass
class SurveyBundle:
    hierarchy: PartitionHierarchy
    truth: ODNetwork
    R: ODNetwork
    B: ODNetwork
    Gamma: ODNetwork
    H: ODNetwork
    n_x: PopulationTable
    n_y: PopulationTable
    n_x_prev: PopulationTable
    seeds: dict[str, int] = field(default_factory=dict)
    configs: dict[str, dict] = field(default_factory=dict)


def make_survey_bundle(
    world: World,
    seed: int,
    *,
    fine_cfg: PerturbConfig = FINE_RELEASE,
    coarse_cfg: PerturbConfig = COARSE_RELEASE,
    mixed_cfg: PerturbConfig = MIXED_RELEASE,
    previous_cfg: PerturbConfig = PREVIOUS_RELEASE,
) -> SurveyBundle:
    """Release the world at three resolutions plus an independent earlier census."""
    h = world.hierarchy
    seeds = {
        name: derive_seed(seed, f"bundle.{name}")
        for name in ("R", "B", "Gamma", "H_world", "H")
    }
    R = perturb(world.fine, fine_cfg, seeds["R"], h)
    B = perturb(aggregate(world.fine, h), coarse_cfg, seeds["B"], h)
    Gamma = perturb(aggregate(world.fine, h, dest=False), mixed_cfg, seeds["Gamma"], h)
    prev = redraw(world, seeds["H_world"])
    H = perturb(prev.fine, previous_cfg, seeds["H"], h)
    configs = {
        "fine": asdict(fine_cfg),
        "coarse": asdict(coarse_cfg),
        "mixed": asdict(mixed_cfg),
        "previous": asdict(previous_cfg),
    }
    if world.cfg is not None:
        configs["world"] = asdict(world.cfg)
    seeds["master"] = seed
    return SurveyBundle(h, world.fine, R, B, Gamma, H, world.n_x, world.n_y, prev.n_x, seeds, configs)


BUNDLE_FILES = {
    "R": "r.csv",
    "B": "b.csv",
    "Gamma": "gamma.csv",
    "H": "h.csv",
    "truth": "truth.csv",
    "n_x": "n_x.csv",
    "n_y": "n_y.csv",
    "n_x_prev": "n_x_prev.csv",
    "sa1_to_sa2": "sa1_to_sa2.csv",
    "dzn_to_sa2": "dzn_to_sa2.csv",
}


def write_bundle(bundle: SurveyBundle, directory) -> dict[str, Path]:
    """Write every member as CSV; returns the written paths keyed by role."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {k: d / v for k, v in BUNDLE_FILES.items()}
    for name in ("R", "B", "Gamma", "H", "truth"):
        write_network(getattr(bundle, name), paths[name])
    write_population(bundle.n_x, paths["n_x"])
    write_population(bundle.n_y, paths["n_y"])
    write_population(bundle.n_x_prev, paths["n_x_prev"])
    write_correspondence(bundle.hierarchy.sa1_to_sa2, paths["sa1_to_sa2"])
    write_correspondence(bundle.hierarchy.dzn_to_sa2, paths["dzn_to_sa2"])
    return paths


def top_decile_share(n_y: PopulationTable) -> float:
    """Share of destination workers held by the largest 10% of zones."""
    counts = np.sort(np.fromiter(n_y.counts.values(), dtype=np.int64))[::-1]
    if counts.sum() == 0:
        return 0.0
    k = max(1, int(np.ceil(0.1 * len(counts))))
    return float(counts[:k].sum() / counts.sum())


def origin_strengths_match(world: World) -> bool:
    return out_strengths(world.fine) == {k: v for k, v in world.n_x.counts.items() if v > 0}
