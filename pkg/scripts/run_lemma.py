"""Test delta_Y <= 2 delta_X / (1 - delta_X) for Gaussian X and its isometrization."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from haarqec.errorsets import gen_erasure_set
from haarqec.harness import isometrize_lemma_run


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=3)
    args = p.parse_args(argv)
    points = [(256, 2, gen_erasure_set(8, [0])), (1024, 4, gen_erasure_set(10, [0, 1]))]
    rep = isometrize_lemma_run(args.trials, points, args.seed)
    print(json.dumps({"violations": rep.violations, "points": [asdict(pt) for pt in rep.points]}, indent=2))
    return 1 if rep.violations else 0


if __name__ == "__main__":
    sys.exit(main())
