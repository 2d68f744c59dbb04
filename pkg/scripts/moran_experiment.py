"""Compare the Moran martingale part M_n with its Wright-Fisher limit M.

Reports E g(M_n) - E g(M) for several n, and the size of the drift integral
int (nu2 - (nu1+nu2) X_n) that M_n as defined leaves out.
"""
import argparse

import numpy as np

from stein_tc.bounds import bound_thm3
from stein_tc.functionals import m_norm_bound, parse_functional
from stein_tc.harness import SamplerSpec, estimate_gap
from stein_tc.paths import eval_path
from stein_tc.process_sim import ModelParams, mn_drift, sim_moran
from stein_tc.streams import keys


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--functional", default="sin_avg")
    ap.add_argument("--nu1", type=float, default=1.0)
    ap.add_argument("--nu2", type=float, default=1.0)
    ap.add_argument("--x0", type=float, default=0.5)
    ap.add_argument("--n", type=int, nargs="+", default=[16, 64, 256])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    g = parse_functional(args.functional)
    gm = m_norm_bound(g)
    print(f"{'n':>6} {'gap':>11} {'ci95':>10} {'bound':>11} {'E|drift(1)|':>12}")
    for n in args.n:
        spec = SamplerSpec(n=n, nu1=args.nu1, nu2=args.nu2, x0=args.x0, dt=1e-3)
        gap = estimate_gap(g, "Mn", "M", args.paths, "independent", args.seed + n, spec, args.workers)
        prm = ModelParams(n, args.nu1, args.nu2, args.x0)
        drift = np.array([abs(eval_path(mn_drift(sim_moran(prm, k), prm), 1.0))
                          for k in keys(args.seed, f"drift/{n}", min(args.paths, 500))])
        print(f"{n:>6} {gap.diff:11.3e} {gap.ci95:10.3e} {bound_thm3(n, args.nu1, args.nu2, gm).total:11.4e} "
              f"{drift.mean():12.4e}")


if __name__ == "__main__":
    main()
