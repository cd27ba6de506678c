"""Dense complex linear algebra kernels.

Singular extrema come from the Hermitian eigendecomposition of the (smaller)
Gram matrix. Rounding operations (isometrize, partial-isometry rounding) go
through a reduced QR followed by an SVD of the small triangular factor, which
keeps rank decisions accurate well below the ``sqrt(eps)`` floor of the Gram
route while costing the same ``O(rows * cols**2)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

RANK_RTOL = 1e-8


class RankDeficiencyError(ValueError):
    """Raised when a matrix that must have full column rank does not."""


@dataclass(frozen=True)
class SingularExtrema:
    s_min: float
    s_max: float

    def __post_init__(self):
        if not 0.0 <= self.s_min <= self.s_max:
            raise ValueError(f"invalid singular extrema ({self.s_min}, {self.s_max})")


@dataclass(frozen=True)
class IsometryReport:
    extrema: SingularExtrema
    delta: float
    dims: tuple[int, int]

    @property
    def s_min(self) -> float:
        return self.extrema.s_min

    @property
    def s_max(self) -> float:
        return self.extrema.s_max

    def is_approx_isometry(self, delta: float) -> bool:
        return delta >= self.delta


def as_matrix(M, *, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D complex128 array and reject non-finite entries."""
    A = np.asarray(M)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {A.shape}")
    A = A.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def _tall(M) -> np.ndarray:
    A = as_matrix(M)
    if A.shape[0] < A.shape[1]:
        raise ValueError(f"expected rows >= cols, got shape {A.shape}")
    return A


def hermitize(A: np.ndarray) -> np.ndarray:
    return (A + A.conj().T) / 2


def gram(M: np.ndarray) -> np.ndarray:
    """``M^dagger M``, explicitly re-Hermitized."""
    return hermitize(M.conj().T @ M)


def extrema_from_gram(G: np.ndarray, rows: int | None = None) -> SingularExtrema:
    """Singular extrema of ``M`` given its Gram matrix ``G = M^dagger M``.

    Eigenvalues below the Gram round-off floor (``cols * eps * lambda_max``)
    are treated as exact zeros. If ``rows`` is given and smaller than the Gram
    size, the map has a kernel and ``s_min`` is zero by dimension count.
    """
    cols = G.shape[0]
    evals = np.linalg.eigvalsh(hermitize(G))
    lam_max = max(float(evals[-1]), 0.0)
    lam_min = float(evals[0])
    if lam_min <= cols * np.finfo(float).eps * lam_max:
        lam_min = 0.0
    if rows is not None and rows < cols:
        lam_min = 0.0
    return SingularExtrema(np.sqrt(lam_min), np.sqrt(lam_max))


def singular_extrema(M) -> SingularExtrema:
    """Smallest and largest singular values of a tall matrix."""
    A = _tall(M)
    return extrema_from_gram(gram(A))


def singular_values(M) -> np.ndarray:
    """All singular values of a tall matrix, descending, via the Gram matrix."""
    A = _tall(M)
    evals = np.linalg.eigvalsh(gram(A))[::-1]
    return np.sqrt(np.clip(evals, 0.0, None))


def isometry_report_from_extrema(ext: SingularExtrema, dims: tuple[int, int]) -> IsometryReport:
    delta = max(ext.s_max - 1.0, 1.0 - ext.s_min, 0.0)
    return IsometryReport(ext, delta, dims)


def approx_isometry_report(M) -> IsometryReport:
    """Smallest ``delta`` for which ``M`` is a delta-approximate isometry."""
    A = _tall(M)
    return isometry_report_from_extrema(extrema_from_gram(gram(A)), A.shape)


def operator_norm(M) -> float:
    """Spectral norm, via the Gram matrix of the smaller side."""
    A = as_matrix(M)
    if A.shape[0] < A.shape[1]:
        A = A.conj().T
    return extrema_from_gram(gram(A)).s_max


def robust_svd(A: np.ndarray):
    """``np.linalg.svd(A, full_matrices=False)``, retried on ``A^dagger`` if LAPACK fails.

    The divide-and-conquer driver occasionally reports non-convergence on
    perfectly conditioned complex matrices; the transposed problem takes a
    different path through the same driver.
    """
    try:
        return np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError:
        log.debug("SVD of %s matrix did not converge; retrying on the adjoint", A.shape)
    U, s, Vh = np.linalg.svd(A.conj().T, full_matrices=False)
    return Vh.conj().T, s, U.conj().T


def _reduced_svd(A: np.ndarray):
    # A = Q R, R = Ur S Vh  =>  A = (Q Ur) S Vh
    Q, R = np.linalg.qr(A, mode="reduced")
    Ur, s, Vh = robust_svd(R)
    return Q @ Ur, s, Vh


def isometrize(M) -> np.ndarray:
    """Replace every singular value of a full-column-rank matrix by one.

    With thin SVD ``M = W S U`` this returns ``W U``, which equals
    ``M (M^dagger M)^{-1/2}``.

    Raises:
        RankDeficiencyError: if the smallest singular value is below
            ``RANK_RTOL * s_max``.
    """
    A = _tall(M)
    W, s, U = _reduced_svd(A)
    if s[-1] <= RANK_RTOL * s[0]:
        raise RankDeficiencyError(
            f"matrix of shape {A.shape} is rank deficient "
            f"(s_min={s[-1]:.3e}, s_max={s[0]:.3e})"
        )
    return W @ U


def partial_isometry_round(M) -> tuple[np.ndarray, int]:
    """Round singular values above the rank tolerance to 1 and the rest to 0.

    Returns the rounded matrix and the number of singular values set to 1.
    """
    A = as_matrix(M)
    if A.shape[0] < A.shape[1]:
        D, rank = partial_isometry_round(A.conj().T)
        return D.conj().T, rank
    W, s, U = _reduced_svd(A)
    keep = s > RANK_RTOL * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    rank = int(keep.sum())
    return W[:, keep] @ U[keep], rank
