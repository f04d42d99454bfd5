"""Compiled vs pure-Python kernels on the desk-scale synthetic bundle.

Times full assignment runs and the all-pairs shortest-path statistic with
each backend and checks that both produce identical results.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--n-sa2 N]
"""

import argparse
import statistics
import time

from odsurrogate import _backend
from odsurrogate.assign import AssignmentConfig, build_surrogate
from odsurrogate.candidates import compute_deficits, generate_candidates
from odsurrogate.dist import build_conditional
from odsurrogate.network import aggregate, edge_intersection
from odsurrogate.synth import SynthConfig, generate_ground_truth, make_survey_bundle
from odsurrogate.validate import avg_shortest_path


def timed(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--n-sa2", type=int, default=200)
    args = ap.parse_args()
    if _backend.compiled_kernels is None:
        raise SystemExit("compiled kernels are not built; reinstall with Cython available")

    b = make_survey_bundle(generate_ground_truth(SynthConfig(n_sa2=args.n_sa2, seed=0)), 7)
    h = b.hierarchy
    dist = build_conditional(b.H, b.n_x_prev)
    cands = generate_candidates(compute_deficits(b.R, b.n_x), dist, b.n_x, 1)
    A = aggregate(b.R, h)
    e_ab = edge_intersection(b.B, A)
    print(f"bundle: R {b.R}, {len(cands)} candidates, |E_AB|={len(e_ab)}")

    results = {}
    for name in ("python", "cython"):
        t_assign, (S, rep) = timed(
            lambda: build_surrogate(b.R, cands, b.B, b.Gamma, e_ab, b.n_y, h, AssignmentConfig(seed=3), backend=name),
            args.repeat,
        )
        t_apsp, paths = timed(lambda: avg_shortest_path(b.B, backend=name), args.repeat)
        results[name] = (t_assign, t_apsp, S, rep.passes, paths)
        print(f"{name:>7}: assign {t_assign:7.3f}s ({rep.passes} passes)  shortest paths {t_apsp:7.3f}s")

    py, cy = results["python"], results["cython"]
    assert py[2] == cy[2] and py[3] == cy[3], "assignment differs between backends"
    assert py[4] == cy[4], "shortest-path statistics differ between backends"
    print(f"speed-up: assign x{py[0] / cy[0]:.1f}, shortest paths x{py[1] / cy[1]:.1f}; outputs identical")


if __name__ == "__main__":
    main()
