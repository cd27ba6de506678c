"""Unitary error sets: construction, validation, interchange files.

Generated generalized-Pauli sets keep their tensor-product structure in a
:class:`PauliFamily` (one exponent pair ``(a, b)`` per qudit per operator) and
materialize :class:`~haarqec.operators.MonomialOperator` objects on demand.
That keeps sets such as weight-3 errors on eight qu-5-its (about 790k
operators of dimension 390625) representable, and lets :func:`validate` bound
pairwise overlaps through the single-qudit overlap table, since
``tr((A1 x ... x An)^dagger (B1 x ... x Bn)) = prod_k tr(Ak^dagger Bk)``.
"""

from __future__ import annotations

import itertools
import json
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property
from math import comb
from pathlib import Path

import numpy as np

from . import budget
from .operators import MonomialOperator, _digits, operator_dim, to_dense


def roots_of_unity(q: int) -> np.ndarray:
    """``exp(2 pi i k / q)`` for ``k < q`` with exact zeros on the axes."""
    w = np.exp(2j * np.pi * np.arange(q) / q)
    re = np.where(np.abs(w.real) < 1e-15, 0.0, w.real)
    im = np.where(np.abs(w.imag) < 1e-15, 0.0, w.imag)
    return re + 1j * im


def local_pauli(a: int, b: int, q: int) -> np.ndarray:
    """Dense ``X^a Z^b`` on one qudit; for ``q = 2`` the pair (1, 1) is ``Y = i X Z``."""
    return MonomialOperator(*_local_action(a, b, q)).to_dense()


def _local_action(a: int, b: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    j = np.arange(q)
    phase = roots_of_unity(q)[(b * j) % q]
    if q == 2 and a == 1 and b == 1:
        phase = 1j * phase
    return (j + a) % q, phase


def _label(exps: np.ndarray, q: int) -> str:
    if q == 2:
        names = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
        return "".join(names[(int(a), int(b))] for a, b in exps)
    return " ".join("I" if a == b == 0 else f"X{a}Z{b}" for a, b in exps)


class PauliFamily(Sequence):
    """Lazily materialized generalized Paulis on ``n`` qudits of dimension ``q``.

    ``exponents[i, k] = (a, b)`` means operator ``i`` acts as ``X^a Z^b`` on
    qudit ``k``.
    """

    def __init__(self, n: int, q: int, exponents: np.ndarray, sites: tuple[int, ...] | None = None):
        self.n = int(n)
        self.q = int(q)
        self.exponents = np.asarray(exponents, dtype=np.int16).reshape(-1, self.n, 2)
        self.sites = sites
        self._local = [[_local_action(a, b, q) for b in range(q)] for a in range(q)]

    @property
    def dim(self) -> int:
        return self.q**self.n

    def __len__(self) -> int:
        return self.exponents.shape[0]

    @cached_property
    def _basis_digits(self) -> np.ndarray:
        budget.check(self.dim * self.n, "qudit digit table")
        return _digits(np.arange(self.dim, dtype=np.int64), self.n, self.q)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(len(self)))]
        exps = self.exponents[i]
        digits = self._basis_digits
        N = self.dim
        perm = np.zeros(N, dtype=np.int64)
        phases = np.ones(N, dtype=np.complex128)
        for k, (a, b) in enumerate(exps):
            lperm, lphase = self._local[a][b]
            perm = perm * self.q + lperm[digits[k]]
            if b or (a and self.q == 2):
                phases *= lphase[digits[k]]
        return MonomialOperator(perm, phases)

    def labels(self) -> tuple[str, ...]:
        return tuple(_label(e, self.q) for e in self.exponents)

    def local_matrices(self) -> np.ndarray:
        """All ``q**2`` single-qudit operators indexed by ``a * q + b``."""
        return np.stack([local_pauli(a, b, self.q) for a in range(self.q) for b in range(self.q)])


@dataclass(frozen=True)
class UnitaryErrorSet:
    dim: int
    ops: Sequence
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if len(self.ops) < 1:
            raise ValueError("an error set needs at least one operator")
        if self.labels is not None and len(self.labels) != len(self.ops):
            raise ValueError("labels and ops differ in length")

    @property
    def m(self) -> int:
        return len(self.ops)

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def __getitem__(self, i):
        return self.ops[i]

    @property
    def is_monomial(self) -> bool:
        return isinstance(self.ops, PauliFamily) or all(isinstance(E, MonomialOperator) for E in self.ops)

    @property
    def sites(self) -> tuple[int, ...] | None:
        """Erased qudits when the set is a generated erasure set."""
        return getattr(self.ops, "sites", None)

    def label_list(self) -> tuple[str, ...] | None:
        """Explicit labels, or labels derived from the exponents of a Pauli family."""
        if self.labels is not None:
            return self.labels
        if isinstance(self.ops, PauliFamily):
            return self.ops.labels()
        return None

    def describe(self) -> dict:
        fam = self.ops
        if isinstance(fam, PauliFamily):
            return {"dim": self.dim, "m": self.m, "n": fam.n, "q": fam.q, "sites": fam.sites}
        return {"dim": self.dim, "m": self.m}


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    max_unitarity_defect: float
    max_overlap: float
    worst_pair: tuple[int, int] | None
    m: int
    method: str

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_unitarity_defect": self.max_unitarity_defect,
            "max_overlap": self.max_overlap,
            "worst_pair": list(self.worst_pair) if self.worst_pair else None,
            "m": self.m,
            "method": self.method,
        }


def _unitarity_defect(E) -> float:
    if isinstance(E, MonomialOperator):
        return float(np.max(np.abs(np.abs(E.phases) ** 2 - 1.0)))
    A = to_dense(E)
    return float(np.linalg.norm(A.conj().T @ A - np.eye(A.shape[0]), 2))


def _validate_family(fam: PauliFamily, tol: float) -> ValidationReport:
    q, n, m = fam.q, fam.n, len(fam)
    local = fam.local_matrices()
    eye = np.eye(q)
    loc_defect = max(float(np.linalg.norm(P.conj().T @ P - eye, 2)) for P in local)
    defect = (1.0 + loc_defect) ** n - 1.0
    table = np.abs(np.einsum("uab,vab->uv", local.conj(), local)) / q
    codes = fam.exponents[..., 0].astype(np.int64) * q + fam.exponents[..., 1]
    if (q * q) ** n < 2**62:
        keys = codes @ (q * q) ** np.arange(n, dtype=np.int64)
    else:
        keys = np.unique(codes, axis=0, return_inverse=True)[1].ravel()
    worst_pair = None
    if m == 1:
        overlap = 0.0
    else:
        _, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
        if np.any(counts > 1):
            dup = int(np.flatnonzero(counts > 1)[0])
            i, j = np.flatnonzero(inverse.ravel() == dup)[:2]
            worst_pair = (int(i), int(j))
            overlap = float(np.prod(np.diag(table)[codes[i]]))
        else:
            off = table - np.diag(np.diag(table))
            overlap = float(off.max() * np.diag(table).max() ** (n - 1))
    passed = defect <= tol and overlap <= tol
    return ValidationReport(passed, defect, overlap, worst_pair, m, "tensor-factorized")


def _validate_monomial(ops: Sequence[MonomialOperator], tol: float) -> ValidationReport:
    m = len(ops)
    N = ops[0].dim
    perms = np.stack([E.perm for E in ops])
    phases = np.stack([E.phases for E in ops])
    defect = float(np.max(np.abs(np.abs(phases) ** 2 - 1.0)))
    overlap, worst_pair = 0.0, None
    for i in range(m - 1):
        same = perms[i + 1 :] == perms[i]
        ov = np.abs((phases[i].conj() * phases[i + 1 :] * same).sum(axis=1)) / N
        k = int(np.argmax(ov))
        if ov[k] > overlap:
            overlap, worst_pair = float(ov[k]), (i, i + 1 + k)
    passed = defect <= tol and overlap <= tol
    return ValidationReport(passed, defect, overlap, worst_pair, m, "pairwise-monomial")


def _validate_dense(ops: Sequence, tol: float) -> ValidationReport:
    mats = [to_dense(E) for E in ops]
    N = mats[0].shape[0]
    defect = max(_unitarity_defect(A) for A in mats)
    flat = np.stack([A.ravel() for A in mats], axis=1)
    ov = np.abs(flat.conj().T @ flat) / N
    np.fill_diagonal(ov, 0.0)
    overlap, worst_pair = 0.0, None
    if len(mats) > 1:
        i, j = np.unravel_index(np.argmax(ov), ov.shape)
        overlap, worst_pair = float(ov[i, j]), (int(min(i, j)), int(max(i, j)))
    passed = defect <= tol and overlap <= tol
    return ValidationReport(passed, defect, overlap, worst_pair, len(mats), "pairwise-dense")


def validate(error_set: UnitaryErrorSet, tol: float = 1e-12) -> ValidationReport:
    """Check unitarity and pairwise trace orthogonality.

    Passes iff ``max_i ||E_i^dagger E_i - I|| <= tol`` and
    ``max_{i != j} |tr(E_i^dagger E_j)| / N <= tol``. ``worst_pair`` names the
    operator pair with the largest overlap (or a duplicated pair).
    """
    dims = {operator_dim(E) for E in _iter_sample(error_set.ops)}
    if dims != {error_set.dim}:
        raise ValueError(f"operator dimensions {sorted(dims)} do not match set dim {error_set.dim}")
    if isinstance(error_set.ops, PauliFamily):
        return _validate_family(error_set.ops, tol)
    if all(isinstance(E, MonomialOperator) for E in error_set.ops):
        return _validate_monomial(list(error_set.ops), tol)
    return _validate_dense(list(error_set.ops), tol)


def _iter_sample(ops):
    # a PauliFamily shares one dim; avoid materializing every operator
    if isinstance(ops, PauliFamily):
        return [ops[0]]
    return ops


def weight_set_size(n: int, t: int, q: int) -> int:
    return sum(comb(n, i) * (q * q - 1) ** i for i in range(t + 1))


def _exponent_rows(n: int, q: int, sites: Sequence[int], t: int) -> np.ndarray:
    nonid = np.array([(a, b) for a in range(q) for b in range(q) if (a, b) != (0, 0)], dtype=np.int16)
    blocks = []
    for w in range(t + 1):
        for support in itertools.combinations(sites, w):
            if w:
                choice = np.indices((len(nonid),) * w).reshape(w, -1).T
            else:
                choice = np.zeros((1, 0), dtype=np.intp)
            rows = np.zeros((choice.shape[0], n, 2), dtype=np.int16)
            for pos, site in enumerate(support):
                rows[:, site] = nonid[choice[:, pos]]
            blocks.append(rows)
    return np.concatenate(blocks)


def gen_weight_set(n: int, t: int, q: int = 2, *, element_cap: int | None = None) -> UnitaryErrorSet:
    """All ``n``-qudit generalized Paulis of weight at most ``t``.

    Ordered by weight, then support (lexicographic), then per-site ``(a, b)``.
    """
    if n < 1 or q < 2 or not 0 <= t <= n:
        raise ValueError(f"need n >= 1, q >= 2, 0 <= t <= n; got n={n}, t={t}, q={q}")
    m = weight_set_size(n, t, q)
    budget.check(m * n * 2, f"weight-{t} set on {n} qudits (m={m})", element_cap)
    budget.check(q**n, f"Hilbert space of {n} qudits", element_cap)
    fam = PauliFamily(n, q, _exponent_rows(n, q, range(n), t))
    return UnitaryErrorSet(q**n, fam)


def gen_erasure_set(n: int, sites: Sequence[int], q: int = 2, *, element_cap: int | None = None) -> UnitaryErrorSet:
    """All generalized Paulis supported inside ``sites`` (0-based qudit indices)."""
    sites = tuple(sorted(int(s) for s in sites))
    if n < 1 or q < 2:
        raise ValueError(f"need n >= 1 and q >= 2; got n={n}, q={q}")
    if len(set(sites)) != len(sites) or any(not 0 <= s < n for s in sites):
        raise IndexError(f"erasure sites {sites} out of range for {n} qudits")
    m = q ** (2 * len(sites))
    budget.check(m * n * 2, f"erasure set on {len(sites)} qudits (m={m})", element_cap)
    budget.check(q**n, f"Hilbert space of {n} qudits", element_cap)
    fam = PauliFamily(n, q, _exponent_rows(n, q, sites, len(sites)), sites=sites)
    return UnitaryErrorSet(q**n, fam)


def from_operators(ops: Sequence, labels: Sequence[str] | None = None) -> UnitaryErrorSet:
    ops = [np.asarray(E, dtype=np.complex128) if not isinstance(E, MonomialOperator) else E for E in ops]
    dims = {operator_dim(E) for E in ops}
    if len(dims) != 1:
        raise ValueError(f"operators have mismatched dims {sorted(dims)}")
    return UnitaryErrorSet(dims.pop(), ops, tuple(labels) if labels is not None else None)


def _pairs(z: np.ndarray) -> list[list[float]]:
    return np.stack([z.real, z.imag], axis=-1).tolist()


def _complex(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("complex numbers must be [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def dense_to_json(A: np.ndarray) -> dict:
    return {"entries": _pairs(np.asarray(A).ravel(order="F"))}


def dense_from_json(obj: dict, dim: int) -> np.ndarray:
    z = _complex(obj["entries"])
    if z.size != dim * dim:
        raise ValueError(f"dense operator has {z.size} entries, expected {dim * dim}")
    return z.reshape((dim, dim), order="F")


def errorset_to_json(error_set: UnitaryErrorSet) -> dict:
    ops = list(error_set.ops)
    if all(isinstance(E, MonomialOperator) for E in ops):
        kind = "monomial"
        payload = [{"perm": E.perm.tolist(), "phases": _pairs(E.phases)} for E in ops]
    else:
        kind = "dense"
        payload = [dense_to_json(to_dense(E)) for E in ops]
    out = {"dim": error_set.dim, "kind": kind, "ops": payload}
    out["labels"] = list(error_set.label_list() or [])
    return out


def errorset_from_json(obj: dict) -> UnitaryErrorSet:
    try:
        dim = int(obj["dim"])
        kind = obj["kind"]
        raw_ops = obj["ops"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"error-set file missing field: {exc}") from exc
    if kind == "monomial":
        ops = [MonomialOperator(np.asarray(o["perm"]), _complex(o["phases"])) for o in raw_ops]
    elif kind == "dense":
        ops = [dense_from_json(o, dim) for o in raw_ops]
    else:
        raise ValueError(f"unknown error-set kind {kind!r}")
    labels = obj.get("labels") or None
    es = UnitaryErrorSet(dim, ops, tuple(labels) if labels else None)
    if any(operator_dim(E) != dim for E in ops):
        raise ValueError("operator dimension disagrees with the declared dim")
    return es


def write_errorset(error_set: UnitaryErrorSet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(errorset_to_json(error_set)) + "\n")


def read_errorset(path: str | Path) -> UnitaryErrorSet:
    return errorset_from_json(json.loads(Path(path).read_text()))
