#!/usr/bin/env python3
"""Tour checker: argv = <input> <expected> <actual>.

Exit 0 when the submitted output is a closed tour visiting every city exactly
once; the first stdout line then reports `goodness: <total distance>`.
Exit 1 for an invalid tour, 2 for checker-side trouble.

The expected-output file holds a reference tour and is not compared against;
any valid permutation is accepted.
"""

import math
import sys


def main() -> int:
    if len(sys.argv) != 4:
        print("usage: tour_check.py <input> <expected> <actual>", file=sys.stderr)
        return 2
    input_path, _expected_path, actual_path = sys.argv[1:4]
    try:
        with open(input_path, encoding="utf-8") as f:
            tokens = f.read().split()
        n = int(tokens[0])
        coords = []
        for i in range(n):
            coords.append((float(tokens[1 + 2 * i]), float(tokens[2 + 2 * i])))
    except (OSError, ValueError, IndexError) as exc:
        print(f"malformed problem input: {exc}", file=sys.stderr)
        return 2

    try:
        with open(actual_path, encoding="utf-8") as f:
            tour = [int(tok) for tok in f.read().split()]
    except (OSError, ValueError) as exc:
        print(f"output is not a list of city indices: {exc}")
        return 1

    if len(tour) != n:
        print(f"tour has {len(tour)} entries, expected {n}")
        return 1
    if sorted(tour) != list(range(n)):
        print("tour must visit every city exactly once")
        return 1

    total = 0.0
    for a, b in zip(tour, tour[1:] + tour[:1]):
        ax, ay = coords[a]
        bx, by = coords[b]
        total += math.hypot(ax - bx, ay - by)
    print(f"goodness: {total!r}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
