"""Recovery quality: isometry residuals and entangled-input disturbance.

The diamond-norm disturbance is never computed exactly. It is bracketed
below by the disturbance on the maximally entangled input and above by the
certified ``delta`` of the code.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import budget
from .codes import CodeSample
from .decoder import Decoder
from .noise import NoiseChannel, stinespring_apply
from .operators import apply_operator

log = logging.getLogger(__name__)


def trace_norm(A: np.ndarray) -> float:
    """Schatten 1-norm of a Hermitian matrix."""
    A = np.asarray(A)
    return float(np.abs(np.linalg.eigvalsh((A + A.conj().T) / 2)).sum())


def pure_state_trace_norm(u: np.ndarray, v: np.ndarray) -> float:
    """``|| |u><u| - |v><v| ||_1 = 2 sqrt(1 - |<u|v>|^2)`` for unit vectors.

    The sine of the angle is taken as the norm of the component of ``u``
    orthogonal to ``v``, which stays accurate for nearly parallel states.
    """
    u = np.ravel(u)
    v = np.ravel(v)
    perp = u - v * np.vdot(v, u)
    return float(2 * min(np.linalg.norm(perp), 1.0))


def partial_trace(rho: np.ndarray, dims: tuple[int, ...], keep: tuple[int, ...]) -> np.ndarray:
    """Trace out every subsystem of ``rho`` not listed in ``keep``."""
    n = len(dims)
    t = np.asarray(rho).reshape(dims + dims)
    gone = [k for k in range(n) if k not in keep]
    for k in sorted(gone, reverse=True):
        t = np.trace(t, axis1=k, axis2=k + t.ndim // 2)
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d, d)


def _as_bipartite(phi: np.ndarray, K: int) -> np.ndarray:
    phi = np.asarray(phi, dtype=np.complex128)
    if phi.ndim == 1:
        if phi.size % K:
            raise ValueError(f"state of size {phi.size} does not factor through message dim {K}")
        phi = phi.reshape(K, -1)
    if phi.shape[0] != K:
        raise ValueError(f"state has message dim {phi.shape[0]}, expected {K}")
    return phi


def _check_compatible(sample: CodeSample, dec: Decoder, ch: NoiseChannel) -> None:
    if (sample.N, sample.K) != (dec.N, dec.K) or ch.dim != dec.N or ch.error_set.m != dec.m:
        raise ValueError("code, decoder and channel dimensions disagree")


def lemma_residual(sample: CodeSample, dec: Decoder, ch: NoiseChannel, phi: np.ndarray) -> float:
    """``|| (D E_N V) |phi> - |phi>|c> ||`` with ``|c> = sum c_{r,i} |i>|r>``.

    ``phi`` lives on message (dim K) times a reference register; registers of
    the output are ordered (message, syndrome i, environment r, reference).
    """
    _check_compatible(sample, dec, ch)
    Phi = _as_bipartite(phi, sample.K)
    B = Phi.shape[1]
    branches = stinespring_apply(ch, sample.V @ Phi)
    out = (dec.D @ branches.reshape(dec.N, -1)).reshape(dec.K, dec.m, ch.R, B)
    target = np.einsum("jb,ri->jirb", Phi, ch.coeffs)
    return float(np.linalg.norm(out - target))


def entangled_output(sample: CodeSample, dec: Decoder, ch: NoiseChannel, *, element_cap: int | None = None) -> np.ndarray:
    """``(Dec o N o Enc (x) id)(|Phi><Phi|)`` on message (x) reference, ``K^2 x K^2``."""
    _check_compatible(sample, dec, ch)
    K, m = dec.K, dec.m
    budget.check(K**4, "entangled-input density matrix", element_cap)
    Phi = np.eye(K, dtype=np.complex128) / np.sqrt(K)
    VPhi = sample.V @ Phi
    rho = np.zeros((K, K, K, K), dtype=np.complex128)
    sigma_fail = np.zeros((K, K), dtype=np.complex128)
    for Kr in ch.kraus:
        psi = apply_operator(Kr, VPhi)
        dpsi = dec.D @ psi
        t = dpsi.reshape(K, m, K)
        rho += np.einsum("jib,kic->jbkc", t, t.conj())
        # reduced reference state of the rejected branch: (Psi^dag (I - D^dag D) Psi)^T
        sigma_fail += (psi.conj().T @ psi - dpsi.conj().T @ dpsi).T
    rho += np.einsum("jk,bc->jbkc", np.eye(K) / K, sigma_fail)
    return rho.reshape(K * K, K * K)


def entangled_disturbance(sample: CodeSample, dec: Decoder, ch: NoiseChannel, *, element_cap: int | None = None) -> float:
    """Half trace distance between the recovered and original maximally entangled state."""
    K = dec.K
    target = np.eye(K, dtype=np.complex128).ravel() / np.sqrt(K)
    out = entangled_output(sample, dec, ch, element_cap=element_cap)
    return 0.5 * trace_norm(out - np.outer(target, target.conj()))


def random_bipartite_state(K: int, B: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vector on ``C^K (x) C^B`` as a ``K x B`` array."""
    z = rng.standard_normal((2, K, B))
    z = z[0] + 1j * z[1]
    return z / np.linalg.norm(z)


@dataclass(frozen=True)
class DisturbanceReport:
    lemma_residual_max: float
    entangled_trace_dist: float
    upper_bound: float
    num_states: int
    clamped: bool = False
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def disturbance_report(
    sample: CodeSample,
    dec: Decoder,
    ch: NoiseChannel,
    num_random_states: int,
    seed: int,
    *,
    provenance: dict | None = None,
) -> DisturbanceReport:
    """Residual maximum over random states (plus the entangled one) and the disturbance bracket."""
    rng = np.random.default_rng(seed)
    K = sample.K
    states = [np.eye(K) / np.sqrt(K)]
    states += [random_bipartite_state(K, K, rng) for _ in range(num_random_states)]
    res = max(lemma_residual(sample, dec, ch, phi) for phi in states)
    raw = entangled_disturbance(sample, dec, ch)
    dist = min(max(raw, 0.0), 1.0)
    clamped = dist != raw
    if clamped:
        log.warning("entangled disturbance %.17g clamped to [0, 1]", raw)
    return DisturbanceReport(res, dist, dec.delta_cert, len(states), clamped, dict(provenance or {}))
