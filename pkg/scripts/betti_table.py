#!/usr/bin/env python3
"""Tabulate even Betti numbers, each entry certified by two rank computations."""

import argparse

from genus0.keelring import betti


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nmin", type=int, default=4)
    ap.add_argument("--nmax", type=int, default=7)
    args = ap.parse_args()

    for n in range(args.nmin, args.nmax + 1):
        vec = betti(n)
        total = sum(vec)
        print(f"n = {n}:  {vec}  (total {total})")


if __name__ == "__main__":
    main()
