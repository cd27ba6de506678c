"""Seeded experiment campaigns over (N, K, error set) grids.

Every task draws its randomness from a seed derived by
:func:`derive_seed`, which feeds ``(master_seed, grid_index, seed_index)``
through NumPy's ``SeedSequence`` hash mixing. Records therefore do not
depend on worker count or scheduling order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from collections import defaultdict
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import budget
from .codes import CodeSample, nondegeneracy_report, sample_gaussian, sample_haar_isometry
from .decoder import NondegenerateRankError, build_decoder
from .errorsets import UnitaryErrorSet, gen_erasure_set, gen_weight_set, read_errorset
from .linalg import isometrize
from .metrics import entangled_disturbance, lemma_residual, random_bipartite_state
from .noise import depolarizing_erasure, mixture_channel, random_local_channel
from .operators import apply_operator

log = logging.getLogger(__name__)

CHECKS = ("nondegeneracy", "decode", "moments", "isometrize-lemma")
CSV_HEADER = (
    "N", "K", "m", "seed", "s_min", "s_max", "delta_emp", "delta_pred",
    "decode_residual_max", "regime_bigK", "elapsed_ms",
)
ANOMALY_RATIO = 1 / 16


class ConfigError(ValueError):
    """Malformed sweep configuration; the message names the offending field."""


def derive_seed(master_seed: int, *counters: int) -> int:
    """64-bit task seed from a master seed and task counters."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(c) for c in counters))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class GridPoint:
    N: int
    K: int
    errorset: dict


@dataclass(frozen=True)
class SweepConfig:
    grid: tuple[GridPoint, ...]
    seeds_per_point: int
    master_seed: int
    checks: tuple[str, ...] = ("nondegeneracy",)
    element_cap: int | None = None
    decode_states: int = 10
    base_dir: str = "."

    def __post_init__(self):
        for k, pt in enumerate(self.grid):
            if pt.N < 1 or not 1 <= pt.K <= pt.N:
                raise ConfigError(f"grid[{k}]: need N >= 1 and 1 <= K <= N, got N={pt.N}, K={pt.K}")
        if self.seeds_per_point < 1:
            raise ConfigError("seeds_per_point: must be >= 1")
        bad = [c for c in self.checks if c not in CHECKS]
        if bad:
            raise ConfigError(f"checks: unknown entries {bad}; allowed {list(CHECKS)}")

    @classmethod
    def from_dict(cls, obj: dict, base_dir: str = ".") -> SweepConfig:
        if not isinstance(obj, dict):
            raise ConfigError("config: top level must be a JSON object")
        for key in ("grid", "seeds_per_point", "master_seed"):
            if key not in obj:
                raise ConfigError(f"{key}: required field missing")
        if not isinstance(obj["grid"], list) or not obj["grid"]:
            raise ConfigError("grid: must be a non-empty list")
        points = []
        for k, raw in enumerate(obj["grid"]):
            if not isinstance(raw, dict):
                raise ConfigError(f"grid[{k}]: must be an object")
            for key in ("N", "K", "errorset"):
                if key not in raw:
                    raise ConfigError(f"grid[{k}].{key}: required field missing")
            es = raw["errorset"]
            if not isinstance(es, dict) or "kind" not in es:
                raise ConfigError(f"grid[{k}].errorset: must be an object with a 'kind'")
            try:
                N, K = int(raw["N"]), int(raw["K"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"grid[{k}]: N and K must be integers") from exc
            points.append(GridPoint(N, K, {"kind": es["kind"], "params": dict(es.get("params", {}))}))
        try:
            seeds = int(obj["seeds_per_point"])
            master = int(obj["master_seed"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("seeds_per_point/master_seed: must be integers") from exc
        checks = obj.get("checks", ["nondegeneracy"])
        if not isinstance(checks, list):
            raise ConfigError("checks: must be a list")
        cap = obj.get("element_cap")
        cfg = cls(
            tuple(points),
            seeds,
            master,
            tuple(checks),
            int(cap) if cap is not None else None,
            int(obj.get("decode_states", 10)),
            base_dir,
        )
        for k, pt in enumerate(cfg.grid):
            try:
                error_set_for(pt.N, pt.errorset, base_dir)
            except (ValueError, KeyError, IndexError, OSError) as exc:
                raise ConfigError(f"grid[{k}].errorset: {exc}") from exc
        return cfg

    @classmethod
    def from_json(cls, path: str | Path) -> SweepConfig:
        path = Path(path)
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(obj, str(path.parent))

    def to_dict(self) -> dict:
        return {
            "grid": [{"N": p.N, "K": p.K, "errorset": p.errorset} for p in self.grid],
            "seeds_per_point": self.seeds_per_point,
            "master_seed": self.master_seed,
            "checks": list(self.checks),
            "element_cap": self.element_cap,
            "decode_states": self.decode_states,
        }


def _qudit_count(N: int, q: int) -> int:
    n = round(math.log(N, q))
    if q**n != N:
        raise ValueError(f"N={N} is not a power of q={q}")
    return n


def _freeze(params: dict) -> str:
    return json.dumps(params, sort_keys=True)


def error_set_for(N: int, desc: dict, base_dir: str = ".") -> UnitaryErrorSet:
    """Build the error set a grid point describes.

    Kinds: ``erasure`` (params ``sites`` or ``t``, optional ``q``), ``weight``
    (params ``t``, optional ``q``) and ``file`` (param ``path``).
    """
    return _error_set_cached(N, desc["kind"], _freeze(desc.get("params", {})), base_dir)


@lru_cache(maxsize=64)
def _error_set_cached(N: int, kind: str, params_json: str, base_dir: str) -> UnitaryErrorSet:
    params = json.loads(params_json)
    if kind == "erasure":
        q = int(params.get("q", 2))
        n = _qudit_count(N, q)
        sites = params["sites"] if "sites" in params else range(int(params["t"]))
        return gen_erasure_set(n, sites, q)
    if kind == "weight":
        q = int(params.get("q", 2))
        return gen_weight_set(_qudit_count(N, q), int(params["t"]), q)
    if kind == "file":
        path = Path(params["path"])
        es = read_errorset(path if path.is_absolute() else Path(base_dir) / path)
        if es.dim != N:
            raise ValueError(f"error set file has dim {es.dim}, grid point has N={N}")
        return es
    raise ValueError(f"unknown error-set kind {kind!r}")


def scaling_grid(Ns: Iterable[int], Ks: Iterable[int], ms: Iterable[int], max_ratio: float = 1 / 16) -> list[GridPoint]:
    """Qubit grid points with erasure sets on the leading ``log4(m)`` qubits, ``Km <= max_ratio N``."""
    points = []
    for N in Ns:
        for K in Ks:
            for m in ms:
                t = round(math.log(m, 4))
                if 4**t != m:
                    raise ValueError(f"m={m} is not a power of 4")
                if K * m <= max_ratio * N:
                    points.append(GridPoint(N, K, {"kind": "erasure", "params": {"t": t}}))
    return points


# --------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SweepRecord:
    N: int
    K: int
    m: int
    seed: int
    s_min: float
    s_max: float
    delta_emp: float
    delta_pred: float
    decode_residual_max: float | None
    regime_bigK: bool
    elapsed_ms: float
    error: str | None = None
    anomaly: bool = False

    def as_row(self) -> list[str]:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, (bool, np.bool_)):
                return "1" if x else "0"
            if isinstance(x, (int, np.integer)):
                return str(int(x))
            return format(float(x), ".17g")

        return [fmt(getattr(self, name)) for name in CSV_HEADER]


def big_k_regime(N: int, K: int) -> bool:
    return K >= math.log2(N) ** 3


def _decode_channel(es: UnitaryErrorSet, seed: int):
    rng = np.random.default_rng(seed)
    fam = es.ops
    if es.sites is not None:
        d = fam.q ** len(es.sites)
        rank = int(rng.integers(1, min(d * d, 4) + 1))
        return random_local_channel(fam.n, es.sites, fam.q, rank, derive_seed(seed, 1))
    return mixture_channel(es, rng.dirichlet(np.ones(es.m)))


def _run_task(cfg: SweepConfig, gi: int, si: int) -> SweepRecord:
    pt = cfg.grid[gi]
    seed = derive_seed(cfg.master_seed, gi, si)
    es = error_set_for(pt.N, pt.errorset, cfg.base_dir)
    m = es.m
    t0 = time.perf_counter()
    s_min = s_max = delta = float("nan")
    residual = None
    error = None
    try:
        sample = sample_haar_isometry(pt.N, pt.K, seed)
        rep = nondegeneracy_report(sample, es, element_cap=cfg.element_cap)
        s_min, s_max, delta = rep.s_min, rep.s_max, rep.delta_emp
        if "decode" in cfg.checks and delta < 1:
            dec = build_decoder(sample, es, element_cap=cfg.element_cap)
            ch = _decode_channel(es, derive_seed(seed, 2))
            rng = np.random.default_rng(derive_seed(seed, 3))
            states = [random_bipartite_state(pt.K, pt.K, rng) for _ in range(cfg.decode_states)]
            residual = max(lemma_residual(sample, dec, ch, phi) for phi in states)
    except (ArithmeticError, ValueError, MemoryError) as exc:
        error = f"{type(exc).__name__}: {exc}"
        log.warning("task (%d, %d) failed: %s", gi, si, error)
    elapsed = (time.perf_counter() - t0) * 1e3
    anomaly = bool(delta >= 1 and pt.K * m <= ANOMALY_RATIO * pt.N)
    if anomaly:
        log.warning("anomaly: delta=%.6g >= 1 at N=%d K=%d m=%d seed=%d", delta, pt.N, pt.K, m, seed)
    return SweepRecord(
        pt.N, pt.K, m, seed, s_min, s_max, delta, math.sqrt(pt.K * m / pt.N),
        residual, big_k_regime(pt.N, pt.K), elapsed, error, anomaly,
    )


def _run_task_packed(args):
    return _run_task(*args)


def run_sweep(cfg: SweepConfig, workers: int = 1) -> list[SweepRecord]:
    """One record per (grid point, seed), ordered by grid index then seed index."""
    tasks = [(cfg, gi, si) for gi in range(len(cfg.grid)) for si in range(cfg.seeds_per_point)]
    if workers <= 1:
        return [_run_task(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task_packed, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def records_to_csv(records: Sequence[SweepRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.as_row())
    return buf.getvalue()


def write_csv(records: Sequence[SweepRecord], path: str | Path) -> None:
    Path(path).write_text(records_to_csv(records))


# --------------------------------------------------------------------------
# scaling fit


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    residual: float
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)


def fit_scaling(records: Sequence[SweepRecord], *, big_k_only: bool = False) -> ScalingFit:
    """Least-squares line through ``(log(Km/N), log(mean delta_emp))`` per grid point.

    ``residual`` is the RMS deviation of the points from the line.
    """
    groups: dict[tuple[int, int, int], list[float]] = defaultdict(list)
    for r in records:
        if r.error is None and np.isfinite(r.delta_emp) and (r.regime_bigK or not big_k_only):
            groups[(r.N, r.K, r.m)].append(r.delta_emp)
    keys = sorted(groups)
    x = np.array([k[1] * k[2] / k[0] for k in keys], dtype=float)
    y = np.array([np.mean(groups[k]) for k in keys], dtype=float)
    if len(np.unique(x)) < 5:
        raise ValueError(f"need at least 5 distinct Km/N values, got {len(np.unique(x))}")
    if np.any(y <= 0):
        raise ValueError("mean delta_emp must be positive to fit on a log scale")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return ScalingFit(float(slope), float(intercept), resid, x, y)


def plot_scaling(fit: ScalingFit, path: str | Path) -> None:
    """Scatter of log delta vs log(Km/N) with the fitted line, as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(fit.x, fit.y, "o", label="mean delta_emp")
    xs = np.geomspace(fit.x.min(), fit.x.max(), 50)
    ax.loglog(xs, np.exp(fit.intercept) * xs**fit.slope, "-", label=f"slope {fit.slope:.3f}")
    ax.loglog(xs, np.sqrt(xs), ":", label="sqrt(Km/N)")
    ax.set_xlabel("Km/N")
    ax.set_ylabel("delta")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


# --------------------------------------------------------------------------
# moment identities


@dataclass(frozen=True)
class MomentReport:
    N: int
    K: int
    m: int
    samples: int
    first_moment_dev: float
    second_moment_dev: float
    covariance_norm: float | None
    covariance_target: float
    scale: float


def _shifted_batch(G: np.ndarray, ops) -> np.ndarray:
    """``(b, N, K*m)`` stack of ``sum_i E_i G (x) <i|`` for a batch ``G`` of shape ``(b, N, K)``."""
    b, N, K = G.shape
    flat = G.transpose(1, 0, 2).reshape(N, b * K)
    X = np.stack([apply_operator(E, flat).reshape(N, b, K) for E in ops], axis=3)
    return X.transpose(1, 0, 2, 3).reshape(b, N, -1)


def _herm_norm(A: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh((A + A.conj().T) / 2))))


def moment_check(
    N: int,
    K: int,
    error_set: UnitaryErrorSet,
    samples: int,
    seed: int,
    *,
    covariance: bool | None = None,
    element_cap: int | None = None,
) -> MomentReport:
    """Monte Carlo estimates of ``E[X^dag X]``, ``E[X X^dag]`` and ``E|X><X|``.

    Exact values are ``I_{Km}``, ``(Km/N) I_N`` and an operator of norm ``m/N``.
    """
    if samples < 100:
        raise ValueError("moment_check needs at least 100 samples")
    if error_set.dim != N:
        raise ValueError(f"error set dim {error_set.dim} != N={N}")
    m = error_set.m
    Km = K * m
    if covariance is None:
        covariance = (N * Km) ** 2 <= 2**16
    cap = budget.element_cap(element_cap)
    if covariance:
        budget.check((N * Km) ** 2, "covariance matrix", cap)
    ops = list(error_set.ops)
    batch = max(1, min(samples, cap // (4 * N * Km), 4096))
    rng = np.random.default_rng(seed)
    first = np.zeros((Km, Km), dtype=np.complex128)
    second = np.zeros((N, N), dtype=np.complex128)
    cov = np.zeros((N * Km, N * Km), dtype=np.complex128) if covariance else None
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        parts = rng.standard_normal((2, b, N, K))
        G = (parts[0] + 1j * parts[1]) / np.sqrt(2 * N)
        X = _shifted_batch(G, ops)
        first += np.einsum("bnk,bnl->kl", X.conj(), X)
        second += np.einsum("bnk,bmk->nm", X, X.conj())
        if cov is not None:
            vec = X.reshape(b, -1)
            cov += vec.T @ vec.conj()
        done += b
    first /= samples
    second /= samples
    return MomentReport(
        N, K, m, samples,
        _herm_norm(first - np.eye(Km)),
        _herm_norm(second - (Km / N) * np.eye(N)),
        _herm_norm(cov / samples) if cov is not None else None,
        m / N,
        1 / math.sqrt(samples),
    )


# --------------------------------------------------------------------------
# isometrize perturbation lemma


@dataclass(frozen=True)
class LemmaPoint:
    N: int
    K: int
    m: int
    trials: int
    checked: int
    skipped: int
    violations: int
    max_delta_x: float
    max_bound_ratio: float


@dataclass(frozen=True)
class LemmaRunReport:
    points: tuple[LemmaPoint, ...]

    @property
    def violations(self) -> int:
        return sum(p.violations for p in self.points)

    @property
    def skipped(self) -> int:
        return sum(p.skipped for p in self.points)

    @property
    def checked(self) -> int:
        return sum(p.checked for p in self.points)


def isometrize_lemma_run(
    trials: int,
    points: Sequence[tuple[int, int, UnitaryErrorSet]],
    seed: int,
    *,
    skip_above: float = 0.9,
    slack: float = 1e-8,
) -> LemmaRunReport:
    """Check ``delta_Y <= 2 delta_X / (1 - delta_X)`` on random Gaussian ``G``.

    ``X`` is built from ``G`` and ``Y`` from ``isometrize(G)``; trials with
    ``delta_X >= skip_above`` are skipped and counted.
    """
    out = []
    for pi, (N, K, es) in enumerate(points):
        if K * es.m > N:
            raise ValueError(f"point {pi}: K*m = {K * es.m} exceeds N = {N}")
        checked = skipped = violations = 0
        max_dx = max_ratio = 0.0
        for t in range(trials):
            s = derive_seed(seed, pi, t)
            G = sample_gaussian(N, K, s)
            dx = nondegeneracy_report(CodeSample(N, K, G, s, "gaussian"), es).delta_emp
            if dx >= skip_above:
                skipped += 1
                continue
            V = isometrize(G)
            dy = nondegeneracy_report(CodeSample(N, K, V, s, "gaussian-isometrize"), es).delta_emp
            bound = 2 * dx / (1 - dx)
            checked += 1
            max_dx = max(max_dx, dx)
            if bound > 0:
                max_ratio = max(max_ratio, dy / bound)
            if dy > bound + slack:
                violations += 1
                log.error("isometrize lemma violated: N=%d K=%d trial=%d dX=%.17g dY=%.17g", N, K, t, dx, dy)
        out.append(LemmaPoint(N, K, es.m, trials, checked, skipped, violations, float(max_dx), float(max_ratio)))
    return LemmaRunReport(tuple(out))


# --------------------------------------------------------------------------
# erasure end-to-end


@dataclass(frozen=True)
class ErasureTrial:
    sites: tuple[int, ...]
    seed: int
    delta_cert: float
    entangled_disturbance: float
    residual_max: float
    error: str | None = None


@dataclass(frozen=True)
class ErasureReport:
    n: int
    k: int
    t: int
    q: int
    seed: int
    trials: tuple[ErasureTrial, ...]

    @property
    def worst_disturbance(self) -> float:
        return max((tr.entangled_disturbance for tr in self.trials if tr.error is None), default=float("nan"))

    @property
    def delta_certs(self) -> list[float]:
        return [tr.delta_cert for tr in self.trials]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["worst_disturbance"] = self.worst_disturbance
        return out


def erasure_experiment(
    n: int,
    k: int,
    t: int,
    q: int,
    seed: int,
    trials: int,
    *,
    sites: Sequence[int] | None = None,
    num_states: int = 10,
    element_cap: int | None = None,
) -> ErasureReport:
    """Encode ``k`` qudits into ``n``, erase ``t`` of them, decode, measure.

    Each trial erases a random ``t``-subset (or the fixed ``sites``) by complete
    depolarization, the canonical channel for a located loss.
    """
    N, K = q**n, q**k
    budget.check(N, "Hilbert space", element_cap)
    if K * q ** (2 * t) > N:
        raise ValueError(f"K * q^(2t) = {K * q ** (2 * t)} exceeds N = {N}")
    if sites is not None and len(sites) != t:
        raise ValueError(f"fixed sites {sites} do not have size t={t}")
    results = []
    for tr in range(trials):
        rng = np.random.default_rng(derive_seed(seed, 0, tr))
        S = tuple(sorted(int(s) for s in (sites if sites is not None else rng.choice(n, size=t, replace=False))))
        code_seed = derive_seed(seed, 1, tr)
        sample = sample_haar_isometry(N, K, code_seed)
        ch = depolarizing_erasure(n, S, q)
        try:
            dec = build_decoder(sample, ch.error_set, element_cap=element_cap)
        except NondegenerateRankError as exc:
            delta = nondegeneracy_report(sample, ch.error_set).delta_emp
            results.append(ErasureTrial(S, code_seed, delta, float("nan"), float("nan"), str(exc)))
            continue
        dist = entangled_disturbance(sample, dec, ch)
        states = [np.eye(K) / np.sqrt(K)] + [random_bipartite_state(K, K, rng) for _ in range(num_states)]
        res = max(lemma_residual(sample, dec, ch, phi) for phi in states)
        results.append(ErasureTrial(S, code_seed, dec.delta_cert, dist, res))
    return ErasureReport(n, k, t, q, seed, tuple(results))
