"""Monte Carlo check of the first and second moments of the Gaussian shifted-basis matrix."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass

from haarqec.errorsets import from_operators, gen_erasure_set
from haarqec.harness import moment_check


@dataclass
class MomentRun:
    samples: int = 10_000
    cov_samples: int = 100_000
    seed: int = 1


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--samples", type=int, default=MomentRun.samples)
    p.add_argument("--cov-samples", type=int, default=MomentRun.cov_samples)
    p.add_argument("--seed", type=int, default=MomentRun.seed)
    args = p.parse_args(argv)
    run = MomentRun(args.samples, args.cov_samples, args.seed)

    # Paulis on the first of six qubits: N=64, K=2, m=4
    a = moment_check(64, 2, gen_erasure_set(6, [0]), run.samples, run.seed, covariance=False)
    # {I, X} on the first of three qubits: N=8, K=1, m=2
    q0 = gen_erasure_set(3, [0])
    b = moment_check(8, 1, from_operators([q0[0], q0[2]]), run.cov_samples, run.seed + 1, covariance=True)
    print(json.dumps({"run": asdict(run), "first_second": asdict(a), "covariance": asdict(b)}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
