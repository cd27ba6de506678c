"""The SVD-rounded decoder and its three-step decoding channel."""

from __future__ import annotations

import warnings
from pathlib import Path
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .codes import CodeSample, HammingBoundWarning, report_from_gram, shifted_basis_matrix, write_matrix
from .errorsets import UnitaryErrorSet
from .linalg import gram, partial_isometry_round

STATE_TOL = 1e-8


class NondegenerateRankError(ArithmeticError):
    """The code is not delta-approximately nondegenerate for any delta < 1."""


@dataclass(frozen=True, eq=False)
class Decoder:
    """Partial isometry ``D: C^N -> C^K (x) C^m`` with ``D D^dagger = I``.

    ``D_hat`` is the unrounded ``sum_i V^dagger E_i^dagger (x) |i>``; row
    ``j * m + i`` of both corresponds to ``|j>|i>``.
    """

    D: np.ndarray
    D_hat: np.ndarray = field(repr=False)
    delta_cert: float
    dims: tuple[int, int, int]

    @property
    def N(self) -> int:
        return self.dims[0]

    @property
    def K(self) -> int:
        return self.dims[1]

    @property
    def m(self) -> int:
        return self.dims[2]

    @cached_property
    def domain_projector(self) -> np.ndarray:
        """``D^dagger D``; dense ``N x N``, built on first access."""
        return self.D.conj().T @ self.D


def build_decoder(sample: CodeSample, error_set: UnitaryErrorSet, *, element_cap: int | None = None) -> Decoder:
    """Round the singular values of ``Y^dagger`` to one.

    Raises:
        NondegenerateRankError: if ``delta >= 1`` or a singular value of
            ``D_hat`` falls below the rank tolerance.
    """
    N, K, m = sample.N, sample.K, error_set.m
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HammingBoundWarning)
        Y = shifted_basis_matrix(sample, error_set, element_cap=element_cap)
    rep = report_from_gram(gram(Y), N, K, m)
    if rep.delta_emp >= 1.0:
        raise NondegenerateRankError(
            f"delta = {rep.delta_emp:.6g} >= 1 (s_min = {rep.s_min:.3e}); rounding is ill-defined"
        )
    D_hat = Y.conj().T
    D, rank = partial_isometry_round(D_hat)
    if rank != K * m:
        raise NondegenerateRankError(f"D_hat has rank {rank}, expected K*m = {K * m}")
    return Decoder(D, D_hat, rep.delta_emp, (N, K, m))


def _check_density(rho: np.ndarray, N: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (N, N):
        raise ValueError(f"density operator must be {N}x{N}, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > STATE_TOL:
        raise ValueError("density operator is not Hermitian")
    if abs(np.trace(rho) - 1.0) > STATE_TOL:
        raise ValueError(f"density operator has trace {np.trace(rho).real:.12g}")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0] < -STATE_TOL:
        raise ValueError("density operator is not positive semidefinite")
    return rho


def decode_density(dec: Decoder, rho: np.ndarray) -> np.ndarray:
    """Measure ``{D^dagger D, I - D^dagger D}``, apply ``D``, trace out the syndrome.

    The failed branch outputs the maximally mixed state ``I_K / K``.
    """
    rho = _check_density(rho, dec.N)
    K, m = dec.K, dec.m
    # D Pi = D, so the accepted branch is just D rho D^dagger
    inner = dec.D @ rho @ dec.D.conj().T
    accepted = np.einsum("aibi->ab", inner.reshape(K, m, K, m))
    p_fail = float(np.real(np.trace(rho) - np.trace(inner)))
    return accepted + p_fail * np.eye(K) / K


def decode_pure_with_syndrome(dec: Decoder, psi: np.ndarray) -> np.ndarray:
    """Apply ``D (x) I_ancilla`` to ``psi`` (length ``N * A`` or shape ``(N, A)``).

    Returns shape ``(K, m, A)``; no projective measurement is performed.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    mat = psi.reshape(dec.N, -1) if psi.ndim == 1 else psi
    if mat.shape[0] != dec.N or psi.size % dec.N:
        raise ValueError(f"state of shape {psi.shape} does not factor through dim {dec.N}")
    if abs(np.linalg.norm(mat) - 1.0) > STATE_TOL:
        raise ValueError(f"state has norm {np.linalg.norm(mat):.12g}")
    return (dec.D @ mat).reshape(dec.K, dec.m, -1)


def write_decoder(dec: Decoder, path: str | Path) -> None:
    """Dump ``D`` (``Km x N``) in the HAARQEC1 matrix layout."""
    write_matrix(path, dec.D)
