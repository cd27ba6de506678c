"""Encode k qubits into n with a Haar random code, erase t random qubits, decode."""

from __future__ import annotations

import argparse
import json
import math
import sys

from haarqec.harness import erasure_experiment


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--t", type=int, default=2)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=11)
    args = p.parse_args(argv)
    rep = erasure_experiment(args.n, args.k, args.t, args.q, args.seed, args.trials)
    out = rep.to_dict()
    out["leading_prediction"] = math.sqrt(args.q ** (args.k + 2 * args.t - args.n))
    print(json.dumps(out, indent=2))
    bad = [tr for tr in rep.trials if tr.error is not None or tr.entangled_disturbance > tr.delta_cert]
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
