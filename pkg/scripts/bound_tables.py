"""Print the closed-form bounds term by term over a range of n, with fitted log-log slopes."""
import argparse

from stein_tc.bounds import POISSON_ABS3, bound_thm1, bound_thm2, bound_thm3, thm3_blocks
from stein_tc.harness import fit_rate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gm", type=float, default=1.0, help="M-norm factor of the test functional")
    ap.add_argument("--nu1", type=float, default=1.0)
    ap.add_argument("--nu2", type=float, default=1.0)
    args = ap.parse_args()

    ns = [2**k for k in range(4, 21, 2)]
    print("random walk vs B o s (s = identity, centered Poisson steps)")
    rows = [bound_thm1(n, 1.0, POISSON_ABS3, args.gm) for n in ns]
    labels = [k for k, _ in rows[0].terms]
    print(f"{'n':>9} " + " ".join(f"{k:>15}" for k in labels) + f" {'total':>12}")
    for n, b in zip(ns, rows):
        print(f"{n:>9} " + " ".join(f"{v:>15.4e}" for _, v in b.terms) + f" {b.total:>12.4e}")
    for lo in (0, 3):
        sub = list(zip(ns, (b.total for b in rows)))[lo:]
        print(f"  slope from n={sub[0][0]}: {fit_rate(sub).slope:.4f} "
              f"(log-corrected {fit_rate(sub, log_power=0.5).slope:.4f})")

    print("\ncompensated Poisson vs B o S (S = S^(n) = identity)")
    for n in ns:
        print(f"{n:>9} {bound_thm2(n, 1.0, 1.0, 0.0, args.gm).total:>12.4e}")

    print(f"\nMoran vs Wright-Fisher martingale parts (nu1={args.nu1}, nu2={args.nu2})")
    ns3 = [10**k for k in range(2, 8)]
    for n in ns3:
        slow, fast = thm3_blocks(bound_thm3(n, args.nu1, args.nu2, args.gm))
        print(f"{n:>9} n^-1/4 block {slow:>12.4e}  log block {fast:>12.4e}")
    fit = fit_rate([(n, bound_thm3(n, args.nu1, args.nu2).total) for n in ns3])
    print(f"  slope {fit.slope:.4f}")


if __name__ == "__main__":
    main()
