"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data validation error,
4 constraint-infeasibility error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import shutil
import sys
from dataclasses import asdict
from pathlib import Path

from .assign import AssignmentConfig, BudgetLedger, build_surrogate, check_constraints
from .candidates import compute_deficits, generate_candidates, load_candidates, write_candidates
from .config import PipelineConfig, load_config, render_config
from .dist import build_conditional, load_distribution, write_distribution
from .errors import ConfigError, DataError, InfeasibleError, SurrogateError
from .ingest import (
    below_min_cell,
    check_hierarchy_covers,
    load_hierarchy,
    load_network,
    load_population,
    write_network,
)
from .network import Level, aggregate, edge_intersection
from .pipeline import Inputs, preprocess
from .pipeline import run as run_pipeline
from .seeding import derive_seed
from .synth import BUNDLE_FILES, SynthConfig, generate_ground_truth, make_survey_bundle, write_bundle
from .validate import surrogate_report

log = logging.getLogger("odsurrogate")

NETWORK_LEVELS = {
    "r": (Level.FINE_ORIGIN, Level.FINE_DEST),
    "h": (Level.FINE_ORIGIN, Level.FINE_DEST),
    "b": (Level.COARSE, Level.COARSE),
    "gamma": (Level.COARSE, Level.FINE_DEST),
}


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require_inputs(cfg: PipelineConfig) -> None:
    missing = cfg.missing_inputs()
    if missing:
        raise ConfigError("missing input files: " + ", ".join(missing))


def load_inputs(cfg: PipelineConfig) -> Inputs:
    _require_inputs(cfg)
    p, delim = cfg.inputs, cfg.delimiter
    nets = {k: load_network(p[k], *levels, delimiter=delim) for k, levels in NETWORK_LEVELS.items()}
    hierarchy = load_hierarchy(p["sa1_to_sa2"], p["dzn_to_sa2"], delimiter=delim)
    n_x = load_population(p["n_x"], Level.FINE_ORIGIN, delimiter=delim)
    n_y = load_population(p["n_y"], Level.FINE_DEST, delimiter=delim)
    n_x_prev = load_population(p["n_x_prev"], Level.FINE_ORIGIN, delimiter=delim) if "n_x_prev" in p else None
    return Inputs(hierarchy, nets["r"], nets["h"], nets["b"], nets["gamma"], n_x, n_y, n_x_prev)


def _prepared(cfg: PipelineConfig) -> Inputs:
    inputs, reports = preprocess(load_inputs(cfg), cfg.blocklist)
    for name, rep in reports.items():
        if rep.edges_removed:
            log.info("%s: removed %d non-geographic edges (%d commuters)", name, rep.edges_removed, rep.commuters_removed)
    return inputs


def _assignment_config(cfg: PipelineConfig, seed: int) -> AssignmentConfig:
    return AssignmentConfig(
        seed=derive_seed(seed, "assignment"),
        max_passes=cfg.max_passes,
        wall_clock_budget=cfg.wall_clock_budget,
        stall_passes=cfg.stall_passes,
    )


def write_trace(trace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("pass", "elapsed_seconds", "unassigned_commuters"))
        for p, t, u in trace:
            w.writerow((p, f"{t:.6f}", u))


def write_ledger(initial, final, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("kind", "origin", "dest", "initial", "remaining"))
        for (x, y), b in initial.sa2_pair_budget.items():
            w.writerow(("sa2_pair", x, y, b, final.sa2_pair_budget[(x, y)]))
        for y, b in initial.dzn_budget.items():
            w.writerow(("dzn", "", y, b, final.dzn_budget[y]))


# -- subcommands --------------------------------------------------------------


def cmd_synth(args) -> int:
    world_cfg = SynthConfig(
        n_sa2=args.n_sa2,
        seed=derive_seed(args.seed, "synth"),
        hub_fraction=args.hub_fraction,
        employment_hub_skew=args.hub_skew,
        gravity_exponent=args.gravity_exponent,
    )
    world = generate_ground_truth(world_cfg)
    bundle = make_survey_bundle(world, derive_seed(args.seed, "bundle"))
    out = Path(args.out)
    paths = write_bundle(bundle, out)
    config_entries = {
        "r": BUNDLE_FILES["R"],
        "h": BUNDLE_FILES["H"],
        "b": BUNDLE_FILES["B"],
        "gamma": BUNDLE_FILES["Gamma"],
        "n_x": BUNDLE_FILES["n_x"],
        "n_y": BUNDLE_FILES["n_y"],
        "n_x_prev": BUNDLE_FILES["n_x_prev"],
        "sa1_to_sa2": BUNDLE_FILES["sa1_to_sa2"],
        "dzn_to_sa2": BUNDLE_FILES["dzn_to_sa2"],
        "seed": args.seed,
        "output_dir": "run",
    }
    (out / "pipeline.cfg").write_text(render_config(config_entries), encoding="utf-8")
    manifest = {
        "seed": args.seed,
        "seeds": bundle.seeds,
        "configs": bundle.configs,
        "files": {k: {"path": p.name, "sha256": sha256_file(p)} for k, p in paths.items()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote synthetic bundle to {out} (truth {bundle.truth}, R {bundle.R}, B {bundle.B})")
    return 0


def cmd_ingest_check(args) -> int:
    cfg = load_config(args.config)
    inputs = load_inputs(cfg)
    h = inputs.hierarchy
    problems = []
    for name in ("R", "H", "B", "Gamma"):
        net = getattr(inputs, name)
        for code, level in check_hierarchy_covers(net, h):
            problems.append(f"{name}: zone {code} at level {level.value} missing from hierarchy")
        print(f"{name}: |E|={net.edge_count} sum_w={net.total_commuters}")
        if cfg.abs_provenance:
            small = below_min_cell(net)
            if small:
                problems.append(f"{name}: {len(small)} edges below minimum cell 3, e.g. {small[0]}")
    for name, table in (("N_X", inputs.n_x), ("N_Y", inputs.n_y)):
        print(f"{name}: size={table.size} total={table.total}")
        parents = h.parent_map(table.level)
        problems.extend(f"{name}: zone {z} missing from hierarchy" for z in table.counts if z not in parents)
    origins_without_pop = [o for o in inputs.R.origins() if o not in inputs.n_x]
    if origins_without_pop:
        problems.append(f"R: {len(origins_without_pop)} origins lack a population, e.g. {origins_without_pop[0]}")
    for p in problems:
        print(f"problem: {p}", file=sys.stderr)
    if problems:
        raise DataError(f"{len(problems)} ingest problems")
    print("ok")
    return 0


def cmd_build_dist(args) -> int:
    cfg = load_config(args.config)
    inputs = _prepared(cfg)
    dist = build_conditional(inputs.H, inputs.previous_populations(), args.bin_width or cfg.bin_width)
    write_distribution(dist, args.out)
    print(f"wrote {len(dist.bins)} population bins to {args.out}")
    return 0


def cmd_gen_candidates(args) -> int:
    cfg = load_config(args.config)
    inputs = _prepared(cfg)
    seed = cfg.seed if args.seed is None else args.seed
    if args.dist:
        dist = load_distribution(args.dist)
    else:
        dist = build_conditional(inputs.H, inputs.previous_populations(), cfg.bin_width)
    deficits = compute_deficits(inputs.R, inputs.n_x)
    cands = generate_candidates(deficits, dist, inputs.n_x, derive_seed(seed, "candidates"))
    write_candidates(cands, args.out)
    print(f"wrote {len(cands)} candidates ({sum(c.weight for c in cands)} commuters) to {args.out}")
    return 0


def cmd_assign(args) -> int:
    cfg = load_config(args.config)
    if args.stall_passes is not None:
        cfg.stall_passes = args.stall_passes
    if args.wall_clock is not None:
        cfg.wall_clock_budget = args.wall_clock
    if args.max_passes is not None:
        cfg.max_passes = args.max_passes
    inputs = _prepared(cfg)
    seed = cfg.seed if args.seed is None else args.seed
    cands = load_candidates(args.candidates)
    e_ab = edge_intersection(inputs.B, aggregate(inputs.R, inputs.hierarchy))
    S, rep = build_surrogate(
        inputs.R, cands, inputs.B, inputs.Gamma, e_ab, inputs.n_y, inputs.hierarchy, _assignment_config(cfg, seed)
    )
    violations = check_constraints(inputs.R, S, inputs.B, inputs.Gamma, e_ab, inputs.n_x, inputs.n_y, inputs.hierarchy)
    if violations:
        raise InfeasibleError(f"{len(violations)} constraint violations, first: {violations[0]}")
    write_network(S, args.out)
    if args.trace:
        write_trace(rep.trace, args.trace)
    print(
        f"surrogate {S}: +{rep.edges_added} edges, +{rep.commuters_added} commuters, "
        f"{rep.unassigned_commuters} unassigned after {rep.passes} passes ({rep.termination})"
    )
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    inputs = _prepared(cfg)
    S = load_network(args.surrogate, Level.FINE_ORIGIN, Level.FINE_DEST, delimiter=cfg.delimiter)
    pairs = [tuple(p.split(",")) for p in args.pair or ()]
    if any(len(p) != 2 or not all(p) for p in pairs):
        raise ConfigError("--pair takes two names separated by a comma, e.g. B,A")
    report = surrogate_report(inputs.R, S, inputs.B, inputs.hierarchy, clustering_mode=cfg.clustering_mode)
    if args.out:
        report.write(args.out)
    # --pair only filters the printed table; the written report is always complete
    header, rows = report.sections["pairs"]
    known = {(r[0], r[1]) for r in rows}
    unknown = [p for p in pairs if p not in known]
    if unknown:
        raise ConfigError(f"unknown network pair {','.join(unknown[0])}; choose from {sorted(known)}")
    print(",".join(header))
    for row in rows:
        if not pairs or (row[0], row[1]) in pairs:
            print(",".join(str(v) for v in row))
    return 0


def cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out_dir:
        cfg.output_dir = Path(args.out_dir)
    _require_inputs(cfg)
    out = cfg.output_dir
    staging = out / ".staging"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    try:
        result = _run_pipeline_into(cfg, staging)
    except BaseException:
        quarantine = out / "quarantine"
        if quarantine.exists():
            shutil.rmtree(quarantine)
        staging.rename(quarantine)
        raise
    for item in staging.iterdir():
        target = out / item.name
        if target.exists():
            target.unlink()
        item.rename(target)
    staging.rmdir()
    print(result)
    return 0


ARTIFACTS = ("surrogate.csv", "candidates.csv", "distribution.csv", "ledger.csv", "constraints.txt", "validation.txt")


def _run_pipeline_into(cfg: PipelineConfig, out: Path) -> str:
    inputs = load_inputs(cfg)
    res = run_pipeline(
        inputs,
        seed=cfg.seed,
        bin_width=cfg.bin_width,
        blocklist=cfg.blocklist,
        assignment=_assignment_config(cfg, cfg.seed),
        clustering_mode=cfg.clustering_mode,
    )
    write_network(res.surrogate, out / "surrogate.csv")
    write_candidates(res.candidates, out / "candidates.csv")
    write_distribution(res.distribution, out / "distribution.csv")
    initial = BudgetLedger.initial(res.inputs.R, res.inputs.B, res.e_ab, res.inputs.n_y, res.inputs.hierarchy)
    write_ledger(initial, res.assignment.ledger, out / "ledger.csv")
    (out / "constraints.txt").write_text(
        "violations,%d\n" % len(res.violations) + "".join(v + "\n" for v in res.violations), encoding="utf-8"
    )
    res.report.write(out / "validation.txt")
    write_trace(res.assignment.trace, out / "trace.csv")
    rep = res.assignment
    manifest = {
        "seed": cfg.seed,
        "streams": {
            "candidates": derive_seed(cfg.seed, "candidates"),
            "assignment": derive_seed(cfg.seed, "assignment"),
        },
        "config_sha256": cfg.digest(),
        "inputs": {k: sha256_file(p) for k, p in sorted(cfg.inputs.items())},
        "preprocess": {k: asdict(v) for k, v in res.preprocess.items()},
        "assignment": {
            "edges_added": rep.edges_added,
            "commuters_added": rep.commuters_added,
            "unassigned_edges": rep.unassigned_edges,
            "unassigned_commuters": rep.unassigned_commuters,
            "passes": rep.passes,
            "termination": rep.termination,
        },
        # trace.csv carries wall-clock timings and is deliberately not hashed
        "artifacts": {name: sha256_file(out / name) for name in ARTIFACTS},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if res.violations:
        raise InfeasibleError(f"{len(res.violations)} constraint violations, first: {res.violations[0]}")
    return (
        f"surrogate {res.surrogate}: +{rep.edges_added} edges, +{rep.commuters_added} commuters, "
        f"{rep.unassigned_commuters} unassigned ({rep.termination} after {rep.passes} passes); "
        f"artifacts in {cfg.output_dir}"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odsurrogate", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic census bundle")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--n-sa2", type=int, default=200, help="number of coarse zones")
    p.add_argument("--hub-fraction", type=float, default=SynthConfig.hub_fraction)
    p.add_argument("--hub-skew", type=float, default=SynthConfig.employment_hub_skew, help="log-normal sigma of destination attractiveness")
    p.add_argument("--gravity-exponent", type=float, default=SynthConfig.gravity_exponent)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest-check", help="validate input formats and hierarchy totality")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("build-dist", help="build the population-conditioned weight distribution")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="distribution CSV (bin_lo,bin_hi,weight,probability)")
    p.add_argument("--bin-width", type=int, default=None)
    p.set_defaults(func=cmd_build_dist)

    p = sub.add_parser("gen-candidates", help="sample candidate edges covering origin deficits")
    p.add_argument("--config", required=True)
    p.add_argument("--dist", help="distribution CSV from build-dist (built in memory when omitted)")
    p.add_argument("--seed", type=int, default=None, help="master seed (default: config seed)")
    p.add_argument("--out", required=True, help="candidate CSV (origin,weight)")
    p.set_defaults(func=cmd_gen_candidates)

    p = sub.add_parser("assign", help="assign candidates to destinations, writing the surrogate")
    p.add_argument("--config", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--seed", type=int, default=None, help="master seed (default: config seed)")
    p.add_argument("--stall-passes", type=int, default=None, help="stop after this many passes with no accepted edge")
    p.add_argument("--wall-clock", type=float, default=None, help="wall-clock budget in seconds")
    p.add_argument("--max-passes", type=int, default=None)
    p.add_argument("--trace", help="convergence trace CSV (pass,elapsed_seconds,unassigned_commuters)")
    p.add_argument("--out", required=True, help="surrogate edge CSV")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("validate", help="compare a surrogate with the released networks")
    p.add_argument("--config", required=True)
    p.add_argument("--surrogate", required=True)
    p.add_argument("--pair", action="append", help="print only this network pair, e.g. B,A (repeatable)")
    p.add_argument("--out", help="full report path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("pipeline", help="run every stage and write all artifacts")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SurrogateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
