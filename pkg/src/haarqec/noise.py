"""Noise channels with Kraus operators in the span of a unitary error set."""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import budget
from .codes import sample_haar_isometry
from .errorsets import UnitaryErrorSet, dense_from_json, dense_to_json, gen_erasure_set, read_errorset
from .operators import (
    LocalOperator,
    MonomialOperator,
    ScaledOperator,
    apply_operator,
    frobenius_distance,
    operator_dim,
    to_dense,
    trace_inner,
)

CHANNEL_TOL = 1e-8


class ChannelError(ValueError):
    """Kraus family is not CPTP or leaves the span of the error set."""


@dataclass(frozen=True, eq=False)
class NoiseChannel:
    error_set: UnitaryErrorSet
    kraus: tuple
    coeffs: np.ndarray
    residuals: np.ndarray

    @property
    def dim(self) -> int:
        return self.error_set.dim

    @property
    def R(self) -> int:
        return len(self.kraus)

    def c_vector(self) -> np.ndarray:
        """``|c> = sum_{r,i} c_{r,i} |i>|r>`` as an ``(m, R)`` array."""
        return self.coeffs.T


@dataclass(frozen=True, eq=False)
class StinespringIsometry:
    """Row ``a * R + r`` of ``matrix`` is row ``a`` of ``K_r``."""

    matrix: np.ndarray
    R: int


def kraus_coefficients(K, error_set: UnitaryErrorSet) -> tuple[np.ndarray, float]:
    """Least-squares expansion ``K ~ sum_i c_i E_i`` and its Frobenius residual.

    Trace orthogonality makes the projection ``c_i = tr(E_i^dagger K) / N``.
    """
    N = error_set.dim
    if operator_dim(K) != N:
        raise ValueError(f"Kraus operator dim {operator_dim(K)} does not match error set dim {N}")
    coeffs = np.array([trace_inner(E, K) for E in error_set.ops]) / N
    return coeffs, frobenius_distance(K, error_set.ops, coeffs)


def cptp_defect(kraus: Sequence, dim: int) -> float:
    """``||sum_r K_r^dagger K_r - I||`` using the cheapest exact route available."""
    if all(isinstance(K, LocalOperator) for K in kraus) and len({K.sites for K in kraus}) == 1:
        d = kraus[0].factor.shape[0]
        S = sum(K.factor.conj().T @ K.factor for K in kraus)
        return float(np.linalg.norm(S - np.eye(d), 2))
    scaled = [K if isinstance(K, ScaledOperator) else ScaledOperator(1.0, K) for K in kraus]
    if all(isinstance(K.base, MonomialOperator) for K in scaled):
        return abs(sum(abs(K.scale) ** 2 for K in scaled) - 1.0)
    budget.check(dim * dim, "dense CPTP check")
    S = np.zeros((dim, dim), dtype=np.complex128)
    for K in kraus:
        A = to_dense(K)
        S += A.conj().T @ A
    return float(np.linalg.norm(S - np.eye(dim), 2))


def channel_from_kraus(
    kraus: Sequence,
    error_set: UnitaryErrorSet,
    *,
    coeffs: np.ndarray | None = None,
    residuals: np.ndarray | None = None,
    tol: float = CHANNEL_TOL,
) -> NoiseChannel:
    """Validate a Kraus family against ``error_set``.

    Coefficients and residuals are recomputed unless both are supplied by a
    constructor that knows them exactly.
    """
    kraus = tuple(kraus)
    if not kraus:
        raise ChannelError("a channel needs at least one Kraus operator")
    for K in kraus:
        if operator_dim(K) != error_set.dim:
            raise ValueError(f"Kraus dim {operator_dim(K)} does not match error set dim {error_set.dim}")
    defect = cptp_defect(kraus, error_set.dim)
    if defect > tol:
        raise ChannelError(f"sum_r K_r^dagger K_r deviates from I by {defect:.3e}")
    if coeffs is None or residuals is None:
        pairs = [kraus_coefficients(K, error_set) for K in kraus]
        coeffs = np.array([c for c, _ in pairs])
        residuals = np.array([r for _, r in pairs])
    coeffs = np.asarray(coeffs, dtype=np.complex128).reshape(len(kraus), error_set.m)
    residuals = np.asarray(residuals, dtype=float)
    if residuals.max() > tol:
        worst = int(np.argmax(residuals))
        raise ChannelError(f"Kraus operator {worst} leaves span(E) (residual {residuals[worst]:.3e})")
    norm = float(np.sum(np.abs(coeffs) ** 2))
    if abs(norm - 1.0) > tol:
        raise ChannelError(f"sum |c_ri|^2 = {norm:.12g}, expected 1")
    return NoiseChannel(error_set, kraus, coeffs, residuals)


def mixture_channel(error_set: UnitaryErrorSet, probs) -> NoiseChannel:
    """Kraus operators ``sqrt(p_r) E_r``."""
    p = np.asarray(probs, dtype=float)
    if p.shape != (error_set.m,):
        raise ValueError(f"need {error_set.m} probabilities, got shape {p.shape}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("probabilities must be nonnegative and sum to 1")
    idx = np.flatnonzero(p > 0)
    kraus = [ScaledOperator(np.sqrt(p[r]), error_set.ops[r]) for r in idx]
    coeffs = np.zeros((len(idx), error_set.m), dtype=np.complex128)
    coeffs[np.arange(len(idx)), idx] = np.sqrt(p[idx])
    return channel_from_kraus(kraus, error_set, coeffs=coeffs, residuals=np.zeros(len(idx)))


def identity_channel(error_set: UnitaryErrorSet) -> NoiseChannel:
    """Requires ``E_1`` to be the identity."""
    p = np.zeros(error_set.m)
    p[0] = 1.0
    return mixture_channel(error_set, p)


def depolarizing_erasure(n: int, sites: Sequence[int], q: int = 2) -> NoiseChannel:
    """Complete depolarization of ``sites``: uniform mixture over the erasure set."""
    es = gen_erasure_set(n, sites, q)
    return mixture_channel(es, np.full(es.m, 1.0 / es.m))


def random_local_channel(n: int, sites: Sequence[int], q: int, kraus_rank: int, seed: int) -> NoiseChannel:
    """Haar-random rank-``R`` channel on ``sites``, identity elsewhere."""
    sites = tuple(sorted(int(s) for s in sites))
    d = q ** len(sites)
    if not 1 <= kraus_rank <= d * d:
        raise ValueError(f"Kraus rank must be in [1, {d * d}], got {kraus_rank}")
    es = gen_erasure_set(n, sites, q)
    W = sample_haar_isometry(d * kraus_rank, d, seed).V.reshape(d, kraus_rank, d)
    kraus = [LocalOperator(W[:, r, :], sites, n, q) for r in range(kraus_rank)]
    return channel_from_kraus(kraus, es)


def stinespring(ch: NoiseChannel, *, element_cap: int | None = None) -> StinespringIsometry:
    N, R = ch.dim, ch.R
    if cptp_defect(ch.kraus, N) > CHANNEL_TOL:
        raise ChannelError("channel is not trace preserving")
    budget.check(N * R * N, "Stinespring isometry", element_cap)
    blocks = np.stack([to_dense(K) for K in ch.kraus], axis=1)
    return StinespringIsometry(blocks.reshape(N * R, N), R)


def stinespring_apply(ch: NoiseChannel, psi: np.ndarray) -> np.ndarray:
    """``sum_r K_r psi (x) |r>`` as shape ``(N, R) + psi.shape[1:]``."""
    return np.stack([apply_operator(K, psi) for K in ch.kraus], axis=1)


def apply_channel(ch: NoiseChannel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (ch.dim, ch.dim):
        raise ValueError(f"state must be {ch.dim}x{ch.dim}, got {rho.shape}")
    out = np.zeros_like(rho)
    for K in ch.kraus:
        Krho = apply_operator(K, rho)
        out += apply_operator(K, Krho.conj().T).conj().T
    return out


def write_channel(ch: NoiseChannel, path: str | Path, errorset_path: str) -> None:
    obj = {"dim": ch.dim, "kraus": [dense_to_json(to_dense(K)) for K in ch.kraus], "errorset": errorset_path}
    Path(path).write_text(json.dumps(obj) + "\n")


def read_channel(path: str | Path) -> NoiseChannel:
    """Load a channel file; coefficients and residuals are always recomputed."""
    path = Path(path)
    obj = json.loads(path.read_text())
    try:
        dim = int(obj["dim"])
        es_path = Path(obj["errorset"])
        raw = obj["kraus"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"channel file missing field: {exc}") from exc
    if not es_path.is_absolute():
        es_path = path.parent / es_path
    es = read_errorset(es_path)
    if es.dim != dim:
        raise ValueError(f"channel dim {dim} does not match error set dim {es.dim}")
    return channel_from_kraus([dense_from_json(k, dim) for k in raw], es)
