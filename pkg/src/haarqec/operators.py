"""Operator representations shared by error sets and noise channels.

Three lazy forms are supported besides plain dense ``ndarray``:

* :class:`MonomialOperator` -- one unit-modulus entry per column (generalized
  Paulis and other phased permutations), applied in ``O(N)`` per vector.
* :class:`LocalOperator` -- a ``q**|S| x q**|S|`` factor acting on qudits ``S``
  of an ``n``-qudit register, tensored with the identity elsewhere.
* :class:`ScaledOperator` -- ``scale * base`` for any of the above.

Qudit ``0`` is the most significant digit of the computational basis index,
matching ``numpy.kron`` ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNIT_TOL = 1e-12


def _as_columns(v: np.ndarray, dim: int) -> tuple[np.ndarray, bool]:
    v = np.asarray(v)
    if v.shape[0] != dim or v.ndim not in (1, 2):
        raise ValueError(f"dimension mismatch: operator dim {dim}, operand shape {v.shape}")
    return (v[:, None], True) if v.ndim == 1 else (v, False)


@dataclass(frozen=True, eq=False)
class MonomialOperator:
    """Unitary ``M`` with ``M[perm[j], j] = phases[j]`` and zeros elsewhere."""

    perm: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64)
        phases = np.asarray(self.phases, dtype=np.complex128)
        if perm.ndim != 1 or perm.shape != phases.shape or perm.size == 0:
            raise ValueError("perm and phases must be 1-D arrays of equal, nonzero length")
        seen = np.zeros(perm.size, dtype=bool)
        if perm.min() < 0 or perm.max() >= perm.size:
            raise ValueError("perm entries out of range")
        seen[perm] = True
        if not seen.all():
            raise ValueError("perm is not a bijection")
        if np.max(np.abs(np.abs(phases) - 1.0)) > UNIT_TOL:
            raise ValueError("phases must have unit modulus")
        perm.setflags(write=False)
        phases.setflags(write=False)
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "phases", phases)

    @property
    def dim(self) -> int:
        return self.perm.size

    @classmethod
    def identity(cls, dim: int) -> MonomialOperator:
        return cls(np.arange(dim), np.ones(dim, dtype=complex))

    def apply(self, v: np.ndarray) -> np.ndarray:
        cols, flat = _as_columns(v, self.dim)
        out = np.empty(cols.shape, dtype=np.result_type(cols.dtype, np.complex128))
        out[self.perm] = self.phases[:, None] * cols
        return out[:, 0] if flat else out

    def to_dense(self) -> np.ndarray:
        M = np.zeros((self.dim, self.dim), dtype=np.complex128)
        M[self.perm, np.arange(self.dim)] = self.phases
        return M

    def adjoint(self) -> MonomialOperator:
        perm = np.empty_like(self.perm)
        phases = np.empty_like(self.phases)
        perm[self.perm] = np.arange(self.dim)
        phases[self.perm] = self.phases.conj()
        return MonomialOperator(perm, phases)

    def compose(self, other: MonomialOperator) -> MonomialOperator:
        """``self @ other``."""
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return MonomialOperator(self.perm[other.perm], self.phases[other.perm] * other.phases)

    def __matmul__(self, other):
        if isinstance(other, MonomialOperator):
            return self.compose(other)
        return self.apply(other)

    def trace(self) -> complex:
        fixed = self.perm == np.arange(self.dim)
        return complex(self.phases[fixed].sum())


def compose(op1: MonomialOperator, op2: MonomialOperator) -> MonomialOperator:
    return op1.compose(op2)


def adjoint(op: MonomialOperator) -> MonomialOperator:
    return op.adjoint()


def apply_monomial(op: MonomialOperator, v: np.ndarray) -> np.ndarray:
    return op.apply(v)


def _digits(index: np.ndarray, n: int, q: int) -> np.ndarray:
    """Base-``q`` digits of ``index``, most significant first; shape ``(n, len)``."""
    powers = q ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (index[None, :] // powers[:, None]) % q


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """A factor on qudits ``sites`` of ``n`` qudits of dimension ``q``."""

    factor: np.ndarray
    sites: tuple[int, ...]
    n: int
    q: int
    _order: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        sites = tuple(int(s) for s in self.sites)
        if len(set(sites)) != len(sites) or any(not 0 <= s < self.n for s in sites):
            raise ValueError(f"invalid sites {sites} for {self.n} qudits")
        d = self.q ** len(sites)
        factor = np.asarray(self.factor, dtype=np.complex128)
        if factor.shape != (d, d):
            raise ValueError(f"factor must be {d}x{d}, got {factor.shape}")
        rest = tuple(k for k in range(self.n) if k not in sites)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "factor", factor)
        object.__setattr__(self, "_order", sites + rest)

    @property
    def dim(self) -> int:
        return self.q**self.n

    def apply(self, v: np.ndarray) -> np.ndarray:
        cols, flat = _as_columns(v, self.dim)
        ncol = cols.shape[1]
        t = cols.reshape((self.q,) * self.n + (ncol,))
        t = np.transpose(t, self._order + (self.n,))
        shape = t.shape
        d = self.factor.shape[0]
        t = (self.factor @ t.reshape(d, -1)).reshape(shape)
        t = np.transpose(t, tuple(np.argsort(self._order + (self.n,))))
        out = t.reshape(self.dim, ncol)
        return out[:, 0] if flat else out

    def to_dense(self) -> np.ndarray:
        return self.apply(np.eye(self.dim, dtype=np.complex128))

    def matrix_elements(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        dr = _digits(np.asarray(rows), self.n, self.q)
        dc = _digits(np.asarray(cols), self.n, self.q)
        rest = [k for k in range(self.n) if k not in self.sites]
        same = np.all(dr[rest] == dc[rest], axis=0) if rest else np.ones(dr.shape[1], bool)
        k = len(self.sites)
        powers = self.q ** np.arange(k - 1, -1, -1, dtype=np.int64)
        a = (dr[list(self.sites)] * powers[:, None]).sum(0) if k else np.zeros(dr.shape[1], int)
        b = (dc[list(self.sites)] * powers[:, None]).sum(0) if k else np.zeros(dc.shape[1], int)
        return np.where(same, self.factor[a, b], 0.0)


@dataclass(frozen=True, eq=False)
class ScaledOperator:
    scale: complex
    base: object

    @property
    def dim(self) -> int:
        return operator_dim(self.base)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.scale * apply_operator(self.base, v)

    def to_dense(self) -> np.ndarray:
        return self.scale * to_dense(self.base)


def operator_dim(op) -> int:
    if isinstance(op, np.ndarray):
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise ValueError(f"dense operator must be square, got {op.shape}")
        return op.shape[0]
    return op.dim


def apply_operator(op, v: np.ndarray) -> np.ndarray:
    if isinstance(op, np.ndarray):
        v = np.asarray(v)
        if v.shape[0] != op.shape[1]:
            raise ValueError(f"dimension mismatch: operator {op.shape}, operand {v.shape}")
        return op @ v
    return op.apply(v)


def apply_adjoint(op, v: np.ndarray) -> np.ndarray:
    if isinstance(op, np.ndarray):
        return op.conj().T @ v
    if isinstance(op, MonomialOperator):
        return op.adjoint().apply(v)
    if isinstance(op, LocalOperator):
        return LocalOperator(op.factor.conj().T, op.sites, op.n, op.q).apply(v)
    if isinstance(op, ScaledOperator):
        return np.conj(op.scale) * apply_adjoint(op.base, v)
    raise TypeError(f"unsupported operator type {type(op).__name__}")


def to_dense(op) -> np.ndarray:
    if isinstance(op, np.ndarray):
        return op.astype(np.complex128, copy=False)
    return op.to_dense()


def matrix_elements(op, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Entries ``op[rows[k], cols[k]]`` without densifying lazy operators."""
    if isinstance(op, np.ndarray):
        return op[rows, cols]
    if isinstance(op, MonomialOperator):
        return np.where(op.perm[cols] == rows, op.phases[cols], 0.0)
    if isinstance(op, LocalOperator):
        return op.matrix_elements(rows, cols)
    if isinstance(op, ScaledOperator):
        return op.scale * matrix_elements(op.base, rows, cols)
    raise TypeError(f"unsupported operator type {type(op).__name__}")


def trace_inner(E, K) -> complex:
    """Hilbert-Schmidt inner product ``tr(E^dagger K)``."""
    if isinstance(E, MonomialOperator):
        cols = np.arange(E.dim)
        return complex(np.sum(E.phases.conj() * matrix_elements(K, E.perm, cols)))
    if isinstance(E, ScaledOperator):
        return np.conj(E.scale) * trace_inner(E.base, K)
    if isinstance(K, MonomialOperator):
        return np.conj(trace_inner(K, E))
    return complex(np.vdot(to_dense(E), to_dense(K)))


def frobenius_distance(K, ops, coeffs, *, block: int = 256) -> float:
    """``||K - sum_i coeffs[i] ops[i]||_F`` computed over column blocks."""
    dim = operator_dim(K)
    total = 0.0
    for c0 in range(0, dim, block):
        c1 = min(dim, c0 + block)
        idx = np.arange(c0, c1)
        eye = np.zeros((dim, c1 - c0), dtype=np.complex128)
        eye[idx, idx - c0] = 1.0
        diff = apply_operator(K, eye)
        for c, E in zip(coeffs, ops):
            if c == 0:
                continue
            if isinstance(E, MonomialOperator):
                diff[E.perm[idx], idx - c0] -= c * E.phases[idx]
            else:
                diff -= c * apply_operator(E, eye)
        total += float(np.vdot(diff, diff).real)
    return float(np.sqrt(total))
