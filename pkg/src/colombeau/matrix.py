"""Square matrices over generalized numbers.

Entries are :class:`~colombeau.numbers.Num` trees, so determinants and
adjugates are exact rule compositions evaluated per test function.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .asymptotics import Verdict
from .numbers import Const, Num, as_num
from .ge import TestBattery, invert_number, strictly_nonzero_verdict
from .testfn import from_record

MAX_COFACTOR = 6


@dataclass(frozen=True)
class MatrixGe:
    rows: tuple[tuple[Num, ...], ...]

    def __post_init__(self):
        m = len(self.rows)
        if m == 0 or any(len(r) != m for r in self.rows):
            raise ValueError("a generalized matrix must be square and non-empty")

    @classmethod
    def of(cls, rows: Sequence[Sequence]) -> "MatrixGe":
        return cls(tuple(tuple(as_num(v) for v in r) for r in rows))

    @classmethod
    def identity(cls, m: int) -> "MatrixGe":
        return cls.of([[1.0 if i == j else 0.0 for j in range(m)] for i in range(m)])

    @property
    def size(self) -> int:
        return len(self.rows)

    def __getitem__(self, ij) -> Num:
        i, j = ij
        return self.rows[i][j]

    def __call__(self, phi) -> np.ndarray:
        return np.array([[v(phi) for v in r] for r in self.rows])

    def minor(self, i: int, j: int) -> "MatrixGe":
        return MatrixGe(tuple(
            tuple(v for c, v in enumerate(r) if c != j) for k, r in enumerate(self.rows) if k != i
        ))

    def __matmul__(self, other: "MatrixGe") -> "MatrixGe":
        return matmul(self, other)

    def sexpr(self) -> str:
        return "(matrix " + " ".join("(" + " ".join(v.sexpr() for v in r) + ")" for r in self.rows) + ")"


def matmul(a: MatrixGe, b: MatrixGe) -> MatrixGe:
    if a.size != b.size:
        raise ValueError("size mismatch")
    m = a.size
    out = []
    for i in range(m):
        row = []
        for j in range(m):
            acc = a[i, 0] * b[0, j]
            for k in range(1, m):
                acc = acc + a[i, k] * b[k, j]
            row.append(acc)
        out.append(tuple(row))
    return MatrixGe(tuple(out))


def det(a: MatrixGe) -> Num:
    """Cofactor expansion along the first row."""
    if a.size > MAX_COFACTOR:
        raise ValueError(
            f"cofactor expansion of a {a.size}x{a.size} matrix is refused (limit {MAX_COFACTOR}); "
            "split the problem into smaller blocks in the scenario"
        )
    if a.size == 1:
        return a[0, 0]
    acc = None
    for j in range(a.size):
        term = a[0, j] * det(a.minor(0, j))
        if j % 2:
            term = -term
        acc = term if acc is None else acc + term
    return acc


def adjugate(a: MatrixGe) -> MatrixGe:
    m = a.size
    if m == 1:
        return MatrixGe(((Const(1.0),),))
    rows = []
    for i in range(m):
        row = []
        for j in range(m):
            c = det(a.minor(j, i))
            row.append(-c if (i + j) % 2 else c)
        rows.append(tuple(row))
    return MatrixGe(tuple(rows))


def adjugate_inverse(a: MatrixGe) -> MatrixGe:
    """adj(A) times the reciprocal-with-0 of det A."""
    s = invert_number(det(a))
    adj = adjugate(a)
    return MatrixGe(tuple(tuple(v * s for v in r) for r in adj.rows))


def nondegenerate_verdict(a: MatrixGe, battery: TestBattery) -> Verdict:
    """A is invertible iff det A is strictly nonzero."""
    v = strictly_nonzero_verdict(det(a), battery)
    v.test = "nondegenerate"
    v.certificates["det"] = det(a).sexpr()
    if v.refuted:
        phi = from_record(v.witness["phi"])
        vals = np.asarray(a(phi), dtype=complex)
        _, sv, vh = np.linalg.svd(vals)
        v.witness["matrix"] = vals.real.tolist() if not np.any(vals.imag) else [
            [[z.real, z.imag] for z in r] for r in vals]
        k = vh[-1].conj()
        v.witness["kernel_vector"] = k.real.tolist() if not np.any(k.imag) else [[z.real, z.imag] for z in k]
        v.witness["smallest_singular_value"] = float(sv[-1])
    return v
