"""Print the activation window endpoints and midpoint FEF for a range of local dimensions."""
import argparse

from preserva import eplt


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dmax", type=int, default=8)
    args = ap.parse_args(argv)
    print(f"{'d':>3} {'lower':>10} {'upper':>10} {'mid FEF':>10} {'1/d':>8}")
    for d in range(2, args.dmax + 1):
        w = eplt.activation_window(d)
        print(f"{d:>3} {w.lower:10.6f} {w.upper:10.6f} {w.midpoint_fef:10.6f} {1 / d:8.5f}")


if __name__ == "__main__":
    main()
