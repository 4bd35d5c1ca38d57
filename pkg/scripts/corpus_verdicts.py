#!/usr/bin/env python3
"""Compare the projective decomposition test against the classical sphere
test on a seeded corpus of test functions.

For each function the script runs the second-order projective residual system
and the second-order pluriharmonic system on the same sampled points of the
unit sphere in C^3, and prints both verdicts plus the worst pointwise gap
between the two residual families (which vanishes because the dual map on the
sphere is coordinate conjugation).

Usage:
  python scripts/corpus_verdicts.py [--seed 7] [--points 5] [--functions 10]
"""

import argparse
import sys
from pathlib import Path

_SRC = Path(__file__).resolve().parents[1] / "src"
if _SRC.is_dir() and str(_SRC) not in sys.path:
    sys.path.insert(0, str(_SRC))

from dualcr import Surface, sample_points
from dualcr import expr as ex
from dualcr.decompose import (
    decomposable_corpus,
    nondecomposable_corpus,
    theorem_b_residuals,
)
from dualcr.sphere_plh import audibert_residuals, cross_check


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--points", type=int, default=5)
    ap.add_argument("--functions", type=int, default=10,
                    help="corpus size per class (decomposable / products)")
    args = ap.parse_args()

    surface = Surface.sphere(3)
    pts = sample_points(surface, args.points, seed=args.seed)
    corpus = (decomposable_corpus(3, args.functions, seed=args.seed)
              + nondecomposable_corpus(3, args.functions, seed=args.seed + 1))

    print(f"{'function':<58} {'projective':<26} {'classical':<26} gap")
    agree = 0
    for u in corpus:
        a = theorem_b_residuals(surface, u, pts, seed=args.seed)
        b = audibert_residuals(u, pts, 3, mode="second_order", seed=args.seed)
        cc = cross_check(u, pts, 3, seed=args.seed)
        mark = "" if a.classification == b.classification else "  <-- MISMATCH"
        agree += a.classification == b.classification
        label = ex.pretty(u)
        if len(label) > 55:
            label = label[:52] + "..."
        print(f"{label:<58} {a.classification:<26} {b.classification:<26} "
              f"{cc.max_identity_residual:.2e}{mark}")
    total = len(corpus)
    print(f"\nverdict agreement: {agree}/{total}")
    return 0 if agree == total else 1


if __name__ == "__main__":
    raise SystemExit(main())
