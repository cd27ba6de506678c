"""Haar random encoding isometries and nondegeneracy certification."""

from __future__ import annotations

import json
import logging
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import budget
from .errorsets import UnitaryErrorSet
from .linalg import IsometryReport, extrema_from_gram, hermitize, isometrize, isometry_report_from_extrema
from .operators import apply_operator

log = logging.getLogger(__name__)

MAGIC = b"HAARQEC1"
SAMPLING_METHODS = ("gaussian-isometrize", "qr-haar")


class HammingBoundWarning(UserWarning):
    """``K * m > N``: the shifted basis cannot be linearly independent."""


@dataclass(frozen=True, eq=False)
class CodeSample:
    big_dim: int
    code_dim: int
    V: np.ndarray
    seed: int | None = None
    sampling_method: str = "gaussian-isometrize"

    def __post_init__(self):
        if self.V.shape != (self.big_dim, self.code_dim):
            raise ValueError(f"V has shape {self.V.shape}, expected {(self.big_dim, self.code_dim)}")
        if self.code_dim > self.big_dim:
            raise ValueError("code dimension exceeds ambient dimension")

    @property
    def N(self) -> int:
        return self.big_dim

    @property
    def K(self) -> int:
        return self.code_dim


@dataclass(frozen=True)
class NondegeneracyReport:
    report: IsometryReport
    delta_emp: float
    delta_pred_leading: float
    Km: int
    N: int
    spectrum: np.ndarray | None = field(default=None, repr=False)

    @property
    def s_min(self) -> float:
        return self.report.s_min

    @property
    def s_max(self) -> float:
        return self.report.s_max

    def to_dict(self) -> dict:
        out = {
            "N": self.N,
            "Km": self.Km,
            "s_min": self.s_min,
            "s_max": self.s_max,
            "delta_emp": self.delta_emp,
            "delta_pred_leading": self.delta_pred_leading,
        }
        if self.spectrum is not None:
            out["spectrum"] = self.spectrum.tolist()
        return out


def _check_dims(N: int, K: int) -> None:
    if not (isinstance(N, (int, np.integer)) and isinstance(K, (int, np.integer))) or not 1 <= K <= N:
        raise ValueError(f"need integers 1 <= K <= N, got N={N}, K={K}")


def sample_gaussian(N: int, K: int, seed: int) -> np.ndarray:
    """``N x K`` matrix of i.i.d. complex Gaussians with mean 0 and variance ``1/N``."""
    _check_dims(N, K)
    budget.check(2 * N * K, "Gaussian sample", None)
    rng = np.random.default_rng(seed)
    parts = rng.standard_normal((2, N, K))
    return (parts[0] + 1j * parts[1]) / np.sqrt(2 * N)


def sample_haar_isometry(N: int, K: int, seed: int, method: str = "gaussian-isometrize") -> CodeSample:
    """Haar random isometry ``C^K -> C^N``.

    ``gaussian-isometrize`` isometrizes a Gaussian matrix; ``qr-haar`` takes
    the Q factor of the same Gaussian draw with the diagonal of R made
    positive (Mezzadri's phase fix).
    """
    G = sample_gaussian(N, K, seed)
    if method == "gaussian-isometrize":
        V = isometrize(G)
    elif method == "qr-haar":
        Q, R = np.linalg.qr(G)
        d = np.diag(R)
        V = Q * (d / np.abs(d))
    else:
        raise ValueError(f"unknown sampling method {method!r}; choose from {SAMPLING_METHODS}")
    return CodeSample(N, K, V, seed, method)


def _shifted_blocks(V: np.ndarray, ops) -> np.ndarray:
    """``(N, K, len(ops))`` array with ``[:, j, i] = E_i v_j``."""
    return np.stack([apply_operator(E, V) for E in ops], axis=2)


def shifted_basis_matrix(sample: CodeSample, error_set: UnitaryErrorSet, *, element_cap: int | None = None) -> np.ndarray:
    """``Y = sum_i E_i V (x) <i|``; column ``j * m + i`` holds ``E_i |v_j>``."""
    N, K, m = sample.N, sample.K, error_set.m
    if error_set.dim != N:
        raise ValueError(f"error set acts on dim {error_set.dim}, code on {N}")
    if K * m > N:
        warnings.warn(f"K*m = {K * m} exceeds N = {N}; delta >= 1 is forced", HammingBoundWarning, stacklevel=2)
    budget.check(N * K * m, "shifted-basis matrix", element_cap)
    return _shifted_blocks(sample.V, error_set.ops).reshape(N, K * m)


def shifted_basis_gram(sample: CodeSample, error_set: UnitaryErrorSet, *, element_cap: int | None = None) -> np.ndarray:
    """``Y^dagger Y`` without materializing ``Y`` when it exceeds the cap."""
    N, K, m = sample.N, sample.K, error_set.m
    if error_set.dim != N:
        raise ValueError(f"error set acts on dim {error_set.dim}, code on {N}")
    cap = budget.element_cap(element_cap)
    budget.check((K * m) ** 2, "shifted-basis Gram matrix", cap)
    if N * K * m <= cap:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HammingBoundWarning)
            Y = shifted_basis_matrix(sample, error_set, element_cap=cap)
        return hermitize(Y.conj().T @ Y)
    chunk = max(1, cap // (2 * N * K))
    G4 = np.empty((K, m, K, m), dtype=np.complex128)
    starts = range(0, m, chunk)
    for a in starts:
        Ya = _shifted_blocks(sample.V, error_set.ops[a : a + chunk])
        for b in starts:
            if b < a:
                continue
            Yb = Ya if b == a else _shifted_blocks(sample.V, error_set.ops[b : b + chunk])
            blk = np.einsum("nji,nkl->jikl", Ya.conj(), Yb)
            G4[:, a : a + chunk, :, b : b + chunk] = blk
            if b != a:
                G4[:, b : b + chunk, :, a : a + chunk] = blk.conj().transpose(2, 3, 0, 1)
    return hermitize(G4.reshape(K * m, K * m))


def nondegeneracy_report(
    sample: CodeSample,
    error_set: UnitaryErrorSet,
    *,
    full_spectrum: bool = False,
    element_cap: int | None = None,
) -> NondegeneracyReport:
    """Certify how far ``{E_i v_j}`` is from an orthonormal basis.

    ``delta_emp`` is the smallest delta for which ``Y`` is a delta-approximate
    isometry; ``delta_pred_leading`` is ``sqrt(K m / N)``.
    """
    N, K, m = sample.N, sample.K, error_set.m
    if K * m > N:
        warnings.warn(f"K*m = {K * m} exceeds N = {N}; delta >= 1 is forced", HammingBoundWarning, stacklevel=2)
    G = shifted_basis_gram(sample, error_set, element_cap=element_cap)
    return report_from_gram(G, N, K, m, full_spectrum=full_spectrum)


def report_from_gram(G: np.ndarray, N: int, K: int, m: int, *, full_spectrum: bool = False) -> NondegeneracyReport:
    rep = isometry_report_from_extrema(extrema_from_gram(G, rows=N), (N, K * m))
    spectrum = None
    if full_spectrum:
        spectrum = np.sqrt(np.clip(np.linalg.eigvalsh(G)[::-1], 0.0, None))
    return NondegeneracyReport(rep, rep.delta, float(np.sqrt(K * m / N)), K * m, N, spectrum)


def write_matrix(path: str | Path, M: np.ndarray) -> None:
    """HAARQEC1 layout: magic, rows and cols as u64 LE, then column-major (re, im) f64 LE."""
    M = np.asarray(M, dtype=np.complex128)
    rows, cols = M.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQ", rows, cols))
        fh.write(M.ravel(order="F").astype("<c16").tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: bad magic {data[:8]!r}")
    rows, cols = struct.unpack("<QQ", data[8:24])
    body = data[24:]
    if len(body) != 16 * rows * cols:
        raise ValueError(f"{path}: expected {16 * rows * cols} payload bytes, found {len(body)}")
    flat = np.frombuffer(body, dtype="<f8")
    return (flat[0::2] + 1j * flat[1::2]).reshape((rows, cols), order="F")


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def write_code(sample: CodeSample, path: str | Path) -> None:
    write_matrix(path, sample.V)
    meta = {"N": sample.N, "K": sample.K, "seed": sample.seed, "sampling_method": sample.sampling_method}
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def read_code(path: str | Path) -> CodeSample:
    V = read_matrix(path)
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    return CodeSample(V.shape[0], V.shape[1], V, meta.get("seed"), meta.get("sampling_method", "unknown"))
