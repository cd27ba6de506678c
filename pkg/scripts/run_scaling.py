"""Sweep delta_emp over a grid of (N, K, m) and fit the log-log slope against Km/N."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from haarqec.harness import SweepConfig, fit_scaling, plot_scaling, run_sweep, scaling_grid, write_csv


@dataclass
class ScalingRun:
    Ns: list[int] = field(default_factory=lambda: [2**n for n in range(8, 14)])
    Ks: list[int] = field(default_factory=lambda: [4, 16])
    ms: list[int] = field(default_factory=lambda: [4, 16, 64])
    max_ratio: float = 1 / 16
    seeds_per_point: int = 20
    master_seed: int = 2024
    decode: bool = False
    workers: int = 1
    out_dir: str = "results/scaling"


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--seeds", type=int, default=ScalingRun.seeds_per_point)
    p.add_argument("--master-seed", type=int, default=ScalingRun.master_seed)
    p.add_argument("--max-log2-n", type=int, default=13, help="largest N is 2**this")
    p.add_argument("--decode", action="store_true", help="also build decoders and record residuals")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-dir", default=ScalingRun.out_dir)
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")

    run = ScalingRun(
        Ns=[2**n for n in range(8, args.max_log2_n + 1)],
        seeds_per_point=args.seeds,
        master_seed=args.master_seed,
        decode=args.decode,
        workers=args.workers,
        out_dir=args.out_dir,
    )
    grid = scaling_grid(run.Ns, run.Ks, run.ms, run.max_ratio)
    checks = ("nondegeneracy", "decode") if run.decode else ("nondegeneracy",)
    cfg = SweepConfig(tuple(grid), run.seeds_per_point, run.master_seed, checks)
    out = Path(run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")

    records = run_sweep(cfg, workers=run.workers)
    write_csv(records, out / "sweep.csv")
    fit = fit_scaling(records)
    plot_scaling(fit, out / "scaling.svg")
    summary = {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "residual": fit.residual,
        "points": len(fit.x),
        "records": len(records),
        "max_delta": max(r.delta_emp for r in records),
        "anomalies": sum(r.anomaly for r in records),
    }
    (out / "fit.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return 1 if summary["anomalies"] else 0


if __name__ == "__main__":
    sys.exit(main())
