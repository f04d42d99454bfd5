"""Calibration table for the default synthetic world and release configs.

For each world seed, builds the default bundle, runs the pipeline and prints
the ratios the defaults were tuned against:

    R/T    fine release total over ground truth        (target <= 0.75)
    B/T    coarse release total over ground truth      (target >= 0.92)
    S/B    surrogate total over coarse release         (target >= 0.90)
    def    (B - R) / (B - S)                           (target >= 3)
    unas   unassigned share of candidate commuters     (target <= 0.30)
    mse    MSE(B, C) / MSE(B, A) on the overlap        (target < 0.1)
    top10  share of jobs in the top decile of DZNs     (target > 0.5)
    mono   missing-edge histogram non-increasing over its first 5 bins

Usage: python benchmarks/calibrate.py [n_world_seeds] [bundle_seed]
"""

import argparse
import time

from odsurrogate.network import aggregate
from odsurrogate.pipeline import Inputs, run
from odsurrogate.synth import SynthConfig, generate_ground_truth, make_survey_bundle, top_decile_share
from odsurrogate.validate import missing_edge_histogram


def row(world_seed: int, bundle_seed: int) -> str:
    t0 = time.perf_counter()
    world = generate_ground_truth(SynthConfig(seed=world_seed))
    b = make_survey_bundle(world, bundle_seed)
    res = run(Inputs.from_bundle(b), seed=1)
    truth, B = b.truth.total_commuters, b.B.total_commuters
    S, R = res.surrogate.total_commuters, b.R.total_commuters
    rep = res.assignment
    s = res.report.summary
    hist = [c for _, c, _ in missing_edge_histogram(b.B, aggregate(b.R, b.hierarchy))[:5]]
    mono = all(x >= y for x, y in zip(hist, hist[1:]))
    cand = rep.unassigned_commuters + rep.commuters_added
    return (
        f"{world_seed:>5} {R / truth:6.3f} {B / truth:6.3f} {S / B:6.3f} {(B - R) / max(1, B - S):6.2f} "
        f"{rep.unassigned_commuters / cand:6.3f} {s['mse.B_C'] / s['mse.B_A']:7.4f} "
        f"{top_decile_share(b.n_y):6.2f} {str(mono):>5} {len(res.violations):>4} {time.perf_counter() - t0:6.1f}s"
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("worlds", nargs="?", type=int, default=5)
    ap.add_argument("bundle_seed", nargs="?", type=int, default=7)
    args = ap.parse_args()
    print(f"{'world':>5} {'R/T':>6} {'B/T':>6} {'S/B':>6} {'def':>6} {'unas':>6} {'mse':>7} {'top10':>6} {'mono':>5} {'viol':>4} {'time':>7}")
    for seed in range(args.worlds):
        print(row(seed, args.bundle_seed), flush=True)


if __name__ == "__main__":
    main()
