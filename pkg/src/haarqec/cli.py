"""Command-line entry point.

Exit codes: 0 success, 1 domain failure (validation or certification
failed), 2 usage or configuration error. Human-readable output goes to
stderr; JSON and CSV go to the named file or to stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import secrets
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, budget, harness
from .codes import SAMPLING_METHODS, nondegeneracy_report, read_code, sample_haar_isometry, write_code
from .decoder import NondegenerateRankError, build_decoder
from .errorsets import gen_erasure_set, gen_weight_set, read_errorset, validate, write_errorset
from .metrics import disturbance_report
from .noise import ChannelError, identity_channel, mixture_channel, random_local_channel, read_channel

log = logging.getLogger("haarqec")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
LEMMA_SLACK = 1e-8


class UsageError(Exception):
    pass


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, default=_json_default) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _sites(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad site list {text!r}") from exc


# -- errorset ---------------------------------------------------------------


def cmd_errorset_gen(args) -> int:
    if args.kind == "weight":
        if args.t is None:
            raise UsageError("--t is required for --kind weight")
        es = gen_weight_set(args.n, args.t, args.q)
    else:
        if args.sites is None:
            raise UsageError("--sites is required for --kind erasure")
        es = gen_erasure_set(args.n, args.sites, args.q)
    write_errorset(es, args.output)
    print(f"wrote {es.m} operators on dim {es.dim} to {args.output}", file=sys.stderr)
    return EXIT_OK


def cmd_errorset_validate(args) -> int:
    es = read_errorset(args.path)
    rep = validate(es, tol=args.tol)
    _emit(rep.to_dict(), args.output)
    if not rep.passed:
        print(f"validation failed: worst pair {rep.worst_pair}, overlap {rep.max_overlap:.3e}, "
              f"unitarity defect {rep.max_unitarity_defect:.3e}", file=sys.stderr)
        return EXIT_FAIL
    print(f"valid unitary error set of size {rep.m}", file=sys.stderr)
    return EXIT_OK


# -- code -------------------------------------------------------------------


def cmd_code_sample(args) -> int:
    sample = sample_haar_isometry(args.N, args.K, _seed(args), args.method)
    write_code(sample, args.output)
    print(f"wrote {args.N}x{args.K} isometry to {args.output}", file=sys.stderr)
    return EXIT_OK


def cmd_code_certify(args) -> int:
    sample = read_code(args.code)
    es = read_errorset(args.errorset)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = nondegeneracy_report(sample, es, full_spectrum=args.full_spectrum)
    for w in caught:
        print(f"warning: {w.category.__name__}: {w.message}", file=sys.stderr)
    _emit(rep.to_dict(), args.output)
    print(f"delta_emp = {rep.delta_emp:.6g}, sqrt(Km/N) = {rep.delta_pred_leading:.6g}", file=sys.stderr)
    return EXIT_OK if rep.delta_emp < 1 else EXIT_FAIL


# -- decode-sim -------------------------------------------------------------


def _channel_for(args, es, seed):
    if args.channel:
        ch = read_channel(args.channel)
        if ch.error_set.dim != es.dim or ch.error_set.m != es.m:
            raise UsageError("channel error set does not match --errorset")
        return ch
    if args.channel_kind == "identity":
        return identity_channel(es)
    rng = np.random.default_rng(seed)
    if args.channel_kind == "random-local":
        if args.sites is None:
            raise UsageError("--sites is required for --channel-kind random-local")
        n = round(math.log(es.dim, args.q))
        local = gen_erasure_set(n, args.sites, args.q)
        if local.m != es.m:
            raise UsageError("--sites do not describe the error set")
        d = args.q ** len(args.sites)
        rank = args.kraus_rank or int(rng.integers(1, min(d * d, 4) + 1))
        return random_local_channel(n, args.sites, args.q, rank, harness.derive_seed(seed, 1))
    return mixture_channel(es, rng.dirichlet(np.ones(es.m)))


def cmd_decode_sim(args) -> int:
    seed = _seed(args)
    sample = read_code(args.code)
    es = read_errorset(args.errorset)
    try:
        dec = build_decoder(sample, es)
    except NondegenerateRankError as exc:
        print(f"NondegenerateRankError: {exc}", file=sys.stderr)
        return EXIT_FAIL
    ch = _channel_for(args, es, harness.derive_seed(seed, 0))
    prov = {"seed": seed, "N": sample.N, "K": sample.K, "m": es.m, "code": str(args.code), "errorset": str(args.errorset)}
    rep = disturbance_report(sample, dec, ch, args.states, harness.derive_seed(seed, 2), provenance=prov)
    _emit(rep.to_dict(), args.output)
    ok = rep.lemma_residual_max <= rep.upper_bound + LEMMA_SLACK and rep.entangled_trace_dist <= rep.upper_bound + LEMMA_SLACK
    print(f"residual max {rep.lemma_residual_max:.6g}, entangled disturbance {rep.entangled_trace_dist:.6g}, "
          f"delta {rep.upper_bound:.6g}: {'ok' if ok else 'VIOLATION'}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


# -- sweep ------------------------------------------------------------------


def cmd_sweep(args) -> int:
    cfg = harness.SweepConfig.from_json(args.config)
    records = harness.run_sweep(cfg, workers=args.workers)
    text = harness.records_to_csv(records)
    if args.output:
        Path(args.output).write_text(text)
        summary_stream = sys.stdout
    else:
        sys.stdout.write(text)
        summary_stream = sys.stderr
    anomalies = sum(r.anomaly for r in records)
    failures = sum(r.error is not None for r in records)
    print(f"{len(records)} records, {failures} failed, {anomalies} anomalies", file=sys.stderr)
    try:
        fit = harness.fit_scaling(records, big_k_only=args.big_k_only)
    except ValueError as exc:
        print(f"no scaling fit: {exc}", file=sys.stderr)
    else:
        summary = {"slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual, "points": len(fit.x)}
        print(json.dumps(summary), file=summary_stream)
        if args.plot:
            harness.plot_scaling(fit, args.plot)
    return EXIT_FAIL if anomalies else EXIT_OK


# -- experiments ------------------------------------------------------------


def _qubit_prefix_set(N: int, m: int):
    n = round(math.log2(N))
    t = round(math.log(m, 4))
    if 2**n != N or 4**t != m:
        raise UsageError("moments/lemma experiments need N a power of 2 and m a power of 4")
    return gen_erasure_set(n, range(t), 2)


def cmd_moments(args) -> int:
    es = _qubit_prefix_set(args.N, args.m)
    rep = harness.moment_check(args.N, args.K, es, args.samples, _seed(args), covariance=args.covariance or None)
    _emit(rep.__dict__, args.output)
    return EXIT_OK


def cmd_lemma(args) -> int:
    points = [(N, K, _qubit_prefix_set(N, m)) for N, K, m in args.point]
    rep = harness.isometrize_lemma_run(args.trials, points, _seed(args))
    _emit({"violations": rep.violations, "checked": rep.checked, "skipped": rep.skipped,
           "points": [p.__dict__ for p in rep.points]}, args.output)
    print(f"{rep.checked} checked, {rep.skipped} skipped, {rep.violations} violations", file=sys.stderr)
    return EXIT_OK if rep.violations == 0 else EXIT_FAIL


def cmd_erasure(args) -> int:
    rep = harness.erasure_experiment(args.n, args.k, args.t, args.q, _seed(args), args.trials, sites=args.sites)
    _emit(rep.to_dict(), args.output)
    bad = [tr for tr in rep.trials if tr.error is None and tr.entangled_disturbance > tr.delta_cert + LEMMA_SLACK]
    print(f"worst entangled disturbance {rep.worst_disturbance:.6g}; "
          f"delta_cert range [{min(rep.delta_certs):.4g}, {max(rep.delta_certs):.4g}]", file=sys.stderr)
    return EXIT_FAIL if bad else EXIT_OK


# -- parser -----------------------------------------------------------------


def _triple(text: str) -> tuple[int, int, int]:
    try:
        N, K, m = (int(x) for x in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected N,K,m, got {text!r}") from exc
    return N, K, m


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="haarqec", description=__doc__.splitlines()[0] if __doc__ else None)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--element-cap", type=int, help=f"override the dense element cap (also ${budget.ENV_VAR})")
    sub = p.add_subparsers(dest="command", required=True)

    es = sub.add_parser("errorset", help="generate or validate unitary error sets")
    es_sub = es.add_subparsers(dest="action", required=True)
    g = es_sub.add_parser("gen")
    g.add_argument("--kind", choices=("weight", "erasure"), required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--t", type=int)
    g.add_argument("--q", type=int, default=2)
    g.add_argument("--sites", type=_sites, help="comma-separated 0-based qudit indices")
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_errorset_gen)
    v = es_sub.add_parser("validate")
    v.add_argument("path")
    v.add_argument("--tol", type=float, default=1e-12)
    v.add_argument("-o", "--output")
    v.set_defaults(func=cmd_errorset_validate)

    code = sub.add_parser("code", help="sample or certify Haar random codes")
    code_sub = code.add_subparsers(dest="action", required=True)
    s = code_sub.add_parser("sample")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--K", type=int, required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--method", choices=SAMPLING_METHODS, default=SAMPLING_METHODS[0])
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_code_sample)
    c = code_sub.add_parser("certify")
    c.add_argument("code")
    c.add_argument("errorset")
    c.add_argument("--full-spectrum", action="store_true")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_code_certify)

    d = sub.add_parser("decode-sim", help="decode noisy encoded states and report disturbance")
    d.add_argument("code")
    d.add_argument("errorset")
    chan = d.add_mutually_exclusive_group()
    chan.add_argument("--channel", help="channel JSON file")
    chan.add_argument("--channel-kind", choices=("mixture", "random-local", "identity"), default="mixture")
    d.add_argument("--sites", type=_sites)
    d.add_argument("--q", type=int, default=2)
    d.add_argument("--kraus-rank", type=int)
    d.add_argument("--states", type=int, default=100)
    d.add_argument("--seed", type=int)
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_decode_sim)

    sw = sub.add_parser("sweep", help="run a seeded sweep from a JSON config")
    sw.add_argument("config")
    sw.add_argument("-o", "--output", help="CSV path (default stdout)")
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--plot", help="write an SVG of the scaling fit")
    sw.add_argument("--big-k-only", action="store_true", help="fit only records with K >= (log2 N)^3")
    sw.set_defaults(func=cmd_sweep)

    ex = sub.add_parser("experiment", help="moment, isometrize-lemma and erasure experiments")
    ex_sub = ex.add_subparsers(dest="action", required=True)
    mo = ex_sub.add_parser("moments")
    mo.add_argument("--N", type=int, required=True)
    mo.add_argument("--K", type=int, required=True)
    mo.add_argument("--m", type=int, required=True)
    mo.add_argument("--samples", type=int, default=10_000)
    mo.add_argument("--covariance", action="store_true")
    mo.add_argument("--seed", type=int)
    mo.add_argument("-o", "--output")
    mo.set_defaults(func=cmd_moments)
    le = ex_sub.add_parser("lemma")
    le.add_argument("--point", type=_triple, action="append", required=True, help="N,K,m (repeatable)")
    le.add_argument("--trials", type=int, default=1000)
    le.add_argument("--seed", type=int)
    le.add_argument("-o", "--output")
    le.set_defaults(func=cmd_lemma)
    er = ex_sub.add_parser("erasure")
    er.add_argument("--n", type=int, required=True)
    er.add_argument("--k", type=int, required=True)
    er.add_argument("--t", type=int, required=True)
    er.add_argument("--q", type=int, default=2)
    er.add_argument("--trials", type=int, default=10)
    er.add_argument("--sites", type=_sites)
    er.add_argument("--seed", type=int)
    er.add_argument("-o", "--output")
    er.set_defaults(func=cmd_erasure)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.element_cap is not None:
        os.environ[budget.ENV_VAR] = str(args.element_cap)
    try:
        return args.func(args)
    except (UsageError, harness.ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except budget.BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ChannelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
