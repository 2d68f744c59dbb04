"""Run a rate sweep from a config file and report gaps, bounds and fitted slopes."""
import argparse

from stein_tc.cli import Settings, build_parser
from stein_tc.config import parse_n_list
from stein_tc.functionals import parse_functional
from stein_tc.harness import fit_rate, rate_csv, rate_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", help="flat key = value rate config (see configs/)")
    ap.add_argument("--paths", type=int, help="override the number of paths")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv", help="also write the sweep as CSV here")
    args = ap.parse_args()

    argv = ["rate", "--config", args.config, "--workers", str(args.workers)]
    if args.paths:
        argv += ["--paths", str(args.paths)]
    cfg = Settings(build_parser().parse_args(argv))
    g = parse_functional(cfg.str("functional"))
    pts = rate_sweep(g, cfg.str("sampler_a"), cfg.str("sampler_b"), cfg.str("coupling"),
                     parse_n_list(cfg.str("n_list")), cfg.int("paths"), cfg.seed, cfg.sampler_spec(), cfg.int("workers"))
    print(f"{'n':>6} {'|gap|':>11} {'ci95':>10} {'bound':>11}")
    for p in pts:
        bound = "" if p.bound is None else f"{p.bound:11.4e}"
        print(f"{p.n:>6} {abs(p.gap.diff):11.4e} {p.gap.ci95:10.3e} {bound}")
    if all(p.bound for p in pts):
        f = fit_rate(pts, "bound")
        print(f"bound slope {f.slope:.4f} +- {f.stderr:.4f}")
    try:
        f = fit_rate(pts, "gap")
        print(f"gap slope   {f.slope:.4f} +- {f.stderr:.4f} (noisy when gaps are within their CI)")
    except Exception as exc:  # too few positive gaps
        print(f"gap slope unavailable: {exc}")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(rate_csv(pts))


if __name__ == "__main__":
    main()
