"""
Exact linear algebra over the ground field.

Matrices are dense and immutable. Arithmetic is delegated to sympy's
`DomainMatrix` over `QQ` or `GF(p)`; this module adds the handful of
operations every per-degree computation needs (row reduction, kernels,
quotients by a column span, coordinates in a basis) together with the
empty-shape conventions the degreewise model relies on.
"""
import logging
from typing import Iterable, Sequence

from sympy.polys.matrices import DomainMatrix

from src.constants.field_models import FieldSpec

logger = logging.getLogger(__name__)


class Mat:
    """An immutable rows x cols matrix with exact entries in `field`."""

    __slots__ = ("field", "rows", "cols", "_entries")

    def __init__(self, field: FieldSpec, rows: int, cols: int, entries: Sequence[Sequence]):
        if rows < 0 or cols < 0:
            raise ValueError(f"negative shape {rows}x{cols}")
        if len(entries) != rows or any(len(r) != cols for r in entries):
            raise ValueError(f"entry count does not match shape {rows}x{cols}")
        K = field.domain
        object.__setattr__(self, "field", field)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "_entries", tuple(tuple(K.convert(a) for a in r) for r in entries))

    def __setattr__(self, name, value):
        raise AttributeError("Mat is immutable")

    # construction

    @classmethod
    def zeros(cls, field: FieldSpec, rows: int, cols: int) -> "Mat":
        z = field.domain.zero
        return cls(field, rows, cols, [[z] * cols for _ in range(rows)])

    @classmethod
    def identity(cls, field: FieldSpec, n: int) -> "Mat":
        K = field.domain
        return cls(field, n, n, [[K.one if i == j else K.zero for j in range(n)] for i in range(n)])

    @classmethod
    def from_rows(cls, field: FieldSpec, rows: Sequence[Sequence], cols: int | None = None) -> "Mat":
        rows = [[field.convert(a) for a in r] for r in rows]
        ncols = cols if cols is not None else (len(rows[0]) if rows else 0)
        return cls(field, len(rows), ncols, rows)

    @classmethod
    def from_columns(cls, field: FieldSpec, columns: Sequence[Sequence], rows: int) -> "Mat":
        columns = [[field.convert(a) for a in c] for c in columns]
        return cls(field, rows, len(columns), [[c[i] for c in columns] for i in range(rows)])

    @classmethod
    def unit_column(cls, field: FieldSpec, n: int, index: int) -> "Mat":
        K = field.domain
        return cls(field, n, 1, [[K.one if i == index else K.zero] for i in range(n)])

    @classmethod
    def _from_domain_matrix(cls, field: FieldSpec, dm: DomainMatrix) -> "Mat":
        rows, cols = dm.shape
        return cls(field, rows, cols, dm.to_list())

    def to_domain_matrix(self) -> DomainMatrix:
        # sparse storage: Cech and presentation matrices are mostly zeros
        nonzero = {}
        for i, r in enumerate(self._entries):
            row = {j: a for j, a in enumerate(r) if a != 0}
            if row:
                nonzero[i] = row
        return DomainMatrix(nonzero, (self.rows, self.cols), self.field.domain)

    # access

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, key):
        i, j = key
        return self._entries[i][j]

    def row(self, i: int) -> tuple:
        return self._entries[i]

    def column(self, j: int) -> tuple:
        return tuple(r[j] for r in self._entries)

    def entries(self) -> tuple[tuple, ...]:
        return self._entries

    def is_zero(self) -> bool:
        return all(a == 0 for r in self._entries for a in r)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Mat):
            return NotImplemented
        return self.field == other.field and self.shape == other.shape and self._entries == other._entries

    def __hash__(self) -> int:
        return hash((self.rows, self.cols, self._entries))

    def __repr__(self) -> str:
        K = self.field.domain
        body = "; ".join(", ".join(str(K.to_sympy(a)) for a in r) for r in self._entries)
        return f"Mat({self.rows}x{self.cols}: [{body}])"

    # arithmetic

    def __matmul__(self, other: "Mat") -> "Mat":
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        if 0 in (self.rows, self.cols, other.cols):
            return Mat.zeros(self.field, self.rows, other.cols)
        product = self.to_domain_matrix().matmul(other.to_domain_matrix())
        return Mat._from_domain_matrix(self.field, product)

    def __add__(self, other: "Mat") -> "Mat":
        if self.shape != other.shape:
            raise ValueError(f"cannot add {self.shape} and {other.shape}")
        return Mat(self.field, self.rows, self.cols,
                   [[a + b for a, b in zip(r, s)] for r, s in zip(self._entries, other._entries)])

    def __neg__(self) -> "Mat":
        return Mat(self.field, self.rows, self.cols, [[-a for a in r] for r in self._entries])

    def __sub__(self, other: "Mat") -> "Mat":
        return self + (-other)

    def scale(self, c) -> "Mat":
        c = self.field.convert(c)
        return Mat(self.field, self.rows, self.cols, [[c * a for a in r] for r in self._entries])

    def transpose(self) -> "Mat":
        return Mat(self.field, self.cols, self.rows, [list(c) for c in zip(*self._entries)] if self.rows else
                   [[] for _ in range(self.cols)])

    @property
    def T(self) -> "Mat":
        return self.transpose()

    def hstack(self, *others: "Mat") -> "Mat":
        for o in others:
            if o.rows != self.rows:
                raise ValueError(f"hstack row mismatch {self.shape} vs {o.shape}")
        rows = [list(self._entries[i]) for i in range(self.rows)]
        for o in others:
            for i in range(self.rows):
                rows[i].extend(o._entries[i])
        return Mat(self.field, self.rows, self.cols + sum(o.cols for o in others), rows)

    def vstack(self, *others: "Mat") -> "Mat":
        for o in others:
            if o.cols != self.cols:
                raise ValueError(f"vstack column mismatch {self.shape} vs {o.shape}")
        rows = list(self._entries)
        for o in others:
            rows.extend(o._entries)
        return Mat(self.field, len(rows), self.cols, rows)

    def select_columns(self, indices: Iterable[int]) -> "Mat":
        indices = list(indices)
        return Mat(self.field, self.rows, len(indices), [[r[j] for j in indices] for r in self._entries])

    def select_rows(self, indices: Iterable[int]) -> "Mat":
        indices = list(indices)
        return Mat(self.field, len(indices), self.cols, [self._entries[i] for i in indices])

    def rank(self) -> int:
        return len(rref(self)[1])


def hstack_all(field: FieldSpec, rows: int, mats: Sequence[Mat]) -> Mat:
    """Horizontal concatenation that also accepts an empty list."""
    if not mats:
        return Mat.zeros(field, rows, 0)
    return mats[0].hstack(*mats[1:])


def vstack_all(field: FieldSpec, cols: int, mats: Sequence[Mat]) -> Mat:
    if not mats:
        return Mat.zeros(field, 0, cols)
    return mats[0].vstack(*mats[1:])


def block_diagonal(field: FieldSpec, blocks: Sequence[Mat]) -> Mat:
    rows = sum(b.rows for b in blocks)
    cols = sum(b.cols for b in blocks)
    z = field.domain.zero
    out = [[z] * cols for _ in range(rows)]
    r0 = c0 = 0
    for b in blocks:
        for i in range(b.rows):
            for j in range(b.cols):
                out[r0 + i][c0 + j] = b[i, j]
        r0 += b.rows
        c0 += b.cols
    return Mat(field, rows, cols, out)


def rref(m: Mat) -> tuple[Mat, tuple[int, ...]]:
    """Reduced row echelon form and the strictly increasing pivot columns."""
    if m.rows == 0 or m.cols == 0:
        return m, ()
    reduced, pivots = m.to_domain_matrix().rref()
    return Mat._from_domain_matrix(m.field, reduced), tuple(pivots)


def kernel_basis(m: Mat) -> Mat:
    """Columns form a basis of {v : m v = 0}, one per free column of rref(m)."""
    reduced, pivots = rref(m)
    K = m.field.domain
    free = [j for j in range(m.cols) if j not in pivots]
    columns = []
    for j in free:
        v = [K.zero] * m.cols
        v[j] = K.one
        for i, p in enumerate(pivots):
            v[p] = -reduced[i, j]
        columns.append(v)
    return Mat.from_columns(m.field, columns, m.cols)


def image_quotient(sub: Mat, amb_dim: int) -> tuple[Mat, Mat]:
    """
    Complements the column space of `sub` inside k^amb_dim.

    Returns (coset_basis, projection): coset_basis is amb_dim x q and consists of
    standard basis vectors; projection is q x amb_dim, kills every column of
    `sub` and is the identity on coset_basis.
    """
    if sub.rows != amb_dim:
        raise ValueError(f"sub has {sub.rows} rows, expected {amb_dim}")
    K = sub.field.domain
    reduced, pivots = rref(sub.transpose())
    rest = [j for j in range(amb_dim) if j not in pivots]
    position = {j: k for k, j in enumerate(rest)}
    coset = Mat.from_columns(sub.field, [[K.one if i == j else K.zero for i in range(amb_dim)] for j in rest],
                             amb_dim)
    proj = [[K.zero] * amb_dim for _ in rest]
    for j in rest:
        proj[position[j]][j] = K.one
    for i, p in enumerate(pivots):
        for j in rest:
            proj[position[j]][p] = -reduced[i, j]
    return coset, Mat(sub.field, len(rest), amb_dim, proj)


def independent_columns(m: Mat) -> Mat:
    """The columns of m at the pivot positions of rref(m): a basis of its column space."""
    return m.select_columns(rref(m)[1])


def left_inverse(basis: Mat) -> Mat:
    """L with L @ basis = identity, for a matrix of linearly independent columns."""
    n, k = basis.shape
    if k == 0:
        return Mat.zeros(basis.field, 0, n)
    reduced, pivots = rref(basis.hstack(Mat.identity(basis.field, n)))
    if tuple(pivots[:k]) != tuple(range(k)):
        raise ValueError("basis columns are linearly dependent")
    return reduced.select_rows(range(k)).select_columns(range(k, k + n))


def rank(m: Mat) -> int:
    return m.rank()


def in_span(basis: Mat, vectors: Mat) -> bool:
    """True when every column of `vectors` lies in the column span of `basis`."""
    if vectors.cols == 0:
        return True
    return basis.hstack(vectors).rank() == basis.rank()


def coordinates(basis: Mat, vectors: Mat) -> Mat:
    """Solves basis @ C = vectors for C; `basis` must have independent columns."""
    n, k = basis.shape
    if vectors.rows != n:
        raise ValueError(f"vectors have {vectors.rows} rows, basis has {n}")
    if vectors.cols == 0:
        return Mat.zeros(basis.field, k, 0)
    if k == 0:
        if not vectors.is_zero():
            raise ValueError("nonzero vector in the zero subspace")
        return Mat.zeros(basis.field, 0, vectors.cols)
    reduced, pivots = rref(basis.hstack(vectors))
    if tuple(pivots[:k]) != tuple(range(k)):
        raise ValueError("basis columns are linearly dependent")
    if len(pivots) > k:
        raise ValueError("vector is not in the span of the basis")
    return reduced.select_rows(range(k)).select_columns(range(k, k + vectors.cols))
