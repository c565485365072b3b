#!/usr/bin/env python3
"""Print the volume numbers v_n and confirm their differential equation."""

import argparse

from genus0.cohft import matone_check, wp_volumes


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nmax", type=int, default=10, help="largest n (default 10)")
    args = ap.parse_args()

    vols = wp_volumes(args.nmax)
    width = len(str(max(vols)))
    for n, v in enumerate(vols, start=4):
        print(f"v_{n:<2d} = {str(v).rjust(width)}")

    report = matone_check(args.nmax + 2)
    state = "holds" if report.passed else "FAILS"
    print(f"series equation {state} through x^{report.nmax}")


if __name__ == "__main__":
    main()
