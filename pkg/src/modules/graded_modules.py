"""
Graded modules over a standard-graded polynomial ring, realized degreewise.

A module is known through its graded pieces (finite-dimensional spaces with a
labeled basis) and the matrices of multiplication by each variable between
consecutive pieces. Finitely presented modules realize their pieces from a
homogeneous presentation; everything else (kernels, cokernels, Hom, tensor,
sections over opens, Matlis duals) is built on top of other modules.
"""
import itertools
import logging
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from math import comb
from typing import Callable, Optional, Sequence

from sympy import Poly, Symbol
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations
from sympy.polys.orderings import grlex
from sympy.polys.rings import ring as sympy_ring

from src.constants.field_models import FieldSpec
from .errors import InputError, NonHomogeneous, RelationNotKilled, UnknownName
from .exact_linalg import (
    Mat,
    block_diagonal,
    hstack_all,
    image_quotient,
    independent_columns,
    kernel_basis,
    left_inverse,
    vstack_all,
)

logger = logging.getLogger(__name__)

Exponent = tuple[int, ...]


class PolyRing:
    """k[x_1..x_n] with every variable in degree 1."""

    def __init__(self, field: FieldSpec, variables: Sequence[str]):
        variables = tuple(v.strip() for v in variables)
        if not variables:
            raise InputError("a polynomial ring needs at least one variable")
        if len(set(variables)) != len(variables):
            raise InputError(f"duplicate variable names in {variables}")
        for v in variables:
            if not v.isidentifier():
                raise InputError(f"'{v}' is not a valid variable name")
        self.field = field
        self.variables = variables
        self.nvars = len(variables)
        self.domain = field.domain
        self._sring = sympy_ring(",".join(variables), self.domain, grlex)[0]
        self._symbols = {v: Symbol(v) for v in variables}
        self._monomials: dict[int, tuple[Exponent, ...]] = {}
        self._indices: dict[int, dict[Exponent, int]] = {}

    def __eq__(self, other) -> bool:
        return isinstance(other, PolyRing) and (self.field, self.variables) == (other.field, other.variables)

    def __hash__(self) -> int:
        return hash((self.field.label(), self.variables))

    def __repr__(self) -> str:
        return f"{self.field.label()}[{', '.join(self.variables)}]"

    def var_index(self, var) -> int:
        if isinstance(var, int):
            if not 0 <= var < self.nvars:
                raise InputError(f"variable index {var} out of range")
            return var
        try:
            return self.variables.index(var)
        except ValueError:
            raise UnknownName(var) from None

    def dim(self, d: int) -> int:
        return comb(d + self.nvars - 1, self.nvars - 1) if d >= 0 else 0

    def monomials(self, d: int) -> tuple[Exponent, ...]:
        """Exponent vectors of total degree d, in descending graded-lex order."""
        cached = self._monomials.get(d)
        if cached is not None:
            return cached
        if d < 0:
            monos: tuple[Exponent, ...] = ()
        else:
            found = set()
            for combo in itertools.combinations_with_replacement(range(self.nvars), d):
                exp = [0] * self.nvars
                for i in combo:
                    exp[i] += 1
                found.add(tuple(exp))
            monos = tuple(sorted(found, key=grlex, reverse=True))
        self._monomials[d] = monos
        self._indices[d] = {m: k for k, m in enumerate(monos)}
        return monos

    def monomial_index(self, d: int) -> dict[Exponent, int]:
        self.monomials(d)
        return self._indices[d]

    def unit_exponent(self, i: int) -> Exponent:
        return tuple(1 if j == i else 0 for j in range(self.nvars))

    # polynomials

    def poly(self, terms: dict, degree: Optional[int] = None) -> "HomogPoly":
        clean = {}
        for exp, c in terms.items():
            c = self.field.convert(c)
            if c != 0:
                clean[tuple(exp)] = c
        return HomogPoly(self, self._sring.from_dict(clean) if clean else self._sring.zero, degree)

    def zero(self, degree: int) -> "HomogPoly":
        return HomogPoly(self, self._sring.zero, degree)

    def one(self) -> "HomogPoly":
        return self.poly({(0,) * self.nvars: 1})

    def monomial(self, exp: Exponent, coeff=1) -> "HomogPoly":
        return self.poly({tuple(exp): coeff})

    def var(self, var) -> "HomogPoly":
        return self.monomial(self.unit_exponent(self.var_index(var)))

    def poly_from_vector(self, column: Sequence, degree: int) -> "HomogPoly":
        """The polynomial whose coefficients in the monomial basis of R_degree are `column`."""
        monos = self.monomials(degree)
        return self.poly({m: c for m, c in zip(monos, column) if c != 0}, degree)

    def parse(self, text: str, degree: Optional[int] = None) -> "HomogPoly":
        """Reads infix text such as `x^2*y - 3*y^3`; rejects mixed degrees."""
        terms = self._parse_terms(text)
        if degree is None and not any(self.field.convert(c) != 0 for c in terms.values()):
            raise InputError(f"'{text}' is zero and has no degree")
        return self.poly(terms, degree)

    def parse_entry(self, text: str) -> Optional["HomogPoly"]:
        """Like parse, but a zero entry gives None."""
        terms = {e: c for e, c in self._parse_terms(text).items() if self.field.convert(c) != 0}
        return self.poly(terms) if terms else None

    def _parse_terms(self, text: str) -> dict:
        try:
            expr = parse_expr(text, local_dict=dict(self._symbols),
                              transformations=standard_transformations + (convert_xor,))
        except (SyntaxError, TypeError, ValueError) as e:
            raise InputError(f"cannot parse polynomial '{text}'") from e
        stray = sorted(str(s) for s in expr.free_symbols if str(s) not in self._symbols)
        if stray:
            raise UnknownName(stray[0])
        try:
            poly = Poly(expr, *self._symbols.values())
        except Exception as e:
            raise InputError(f"'{text}' is not a polynomial in {', '.join(self.variables)}") from e
        terms = {}
        for exp, c in poly.terms():
            if not c.is_Rational:
                raise InputError(f"coefficient {c} of '{text}' is not rational")
            if c != 0:
                terms[exp] = c
        return terms

    # text

    def format_monomial(self, exp: Sequence[int]) -> str:
        parts = [v if e == 1 else f"{v}^{e}" for v, e in zip(self.variables, exp) if e != 0]
        return "*".join(parts) if parts else "1"

    def format_coefficient(self, c) -> str:
        return str(self.domain.to_sympy(c))


class HomogPoly:
    """A homogeneous polynomial; the zero polynomial carries an explicit degree."""

    __slots__ = ("ring", "element", "degree")

    def __init__(self, ring: PolyRing, element, degree: Optional[int] = None):
        degrees = {sum(m) for m in element.keys()}
        if len(degrees) > 1:
            raise NonHomogeneous(None, f"terms of degrees {sorted(degrees)} in one polynomial")
        if degrees:
            actual = degrees.pop()
            if degree is not None and degree != actual:
                raise NonHomogeneous(None, f"expected degree {degree}, found {actual}")
            degree = actual
        elif degree is None:
            raise ValueError("the zero polynomial needs an explicit degree")
        self.ring = ring
        self.element = element
        self.degree = degree

    def terms(self) -> list[tuple[Exponent, object]]:
        return sorted(self.element.items(), key=lambda t: grlex(t[0]), reverse=True)

    def is_zero(self) -> bool:
        return not self.element

    def is_monomial(self) -> bool:
        return len(self.element) == 1

    def exponent(self) -> Exponent:
        if not self.is_monomial():
            raise ValueError(f"{self} is not a monomial")
        return next(iter(self.element.keys()))

    def key(self):
        return self.degree, tuple(sorted(self.element.items()))

    def __eq__(self, other) -> bool:
        return isinstance(other, HomogPoly) and self.ring == other.ring and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __mul__(self, other: "HomogPoly") -> "HomogPoly":
        return HomogPoly(self.ring, self.element * other.element, self.degree + other.degree)

    def __pow__(self, t: int) -> "HomogPoly":
        return HomogPoly(self.ring, self.element ** t, self.degree * t)

    def __add__(self, other: "HomogPoly") -> "HomogPoly":
        if self.degree != other.degree:
            raise NonHomogeneous(None, f"adding degrees {self.degree} and {other.degree}")
        return HomogPoly(self.ring, self.element + other.element, self.degree)

    def __neg__(self) -> "HomogPoly":
        return HomogPoly(self.ring, -self.element, self.degree)

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        out = []
        for exp, c in self.terms():
            mono = self.ring.format_monomial(exp)
            coeff = self.ring.format_coefficient(c)
            if mono == "1":
                out.append(coeff)
            elif coeff == "1":
                out.append(mono)
            elif coeff == "-1":
                out.append(f"-{mono}")
            else:
                out.append(f"{coeff}*{mono}")
        return " + ".join(out).replace("+ -", "- ")

    __repr__ = __str__


@dataclass(frozen=True)
class GradedPiece:
    """
    One graded piece: a `dim`-dimensional space realized inside (kind="subspace")
    or as a quotient of (kind="quotient") an ambient space of size `ambient_dim`.
    `embed` maps piece coordinates to ambient coordinates (inclusion, or coset
    representatives); `project` maps back.
    """

    degree: int
    dim: int
    labels: tuple[str, ...]
    ambient_dim: int
    embed: Mat
    project: Mat
    kind: str = "quotient"
    keys: tuple = ()

    @classmethod
    def zero(cls, field: FieldSpec, degree: int) -> "GradedPiece":
        z = Mat.zeros(field, 0, 0)
        return cls(degree, 0, (), 0, z, z)

    @classmethod
    def standard(cls, field: FieldSpec, degree: int, dim: int, labels: Sequence[str] = ()) -> "GradedPiece":
        eye = Mat.identity(field, dim)
        labels = tuple(labels) or tuple(f"b{k}" for k in range(dim))
        return cls(degree, dim, labels, dim, eye, eye)

    @classmethod
    def quotient(cls, degree: int, sub: Mat, amb_dim: int, ambient_labels: Sequence[str],
                 ambient_keys: Sequence = ()) -> "GradedPiece":
        coset, proj = image_quotient(sub, amb_dim)
        positions = [next(i for i in range(amb_dim) if coset[i, c] != 0) for c in range(coset.cols)]
        keys = tuple(ambient_keys[i] for i in positions) if ambient_keys else ()
        return cls(degree, coset.cols, tuple(ambient_labels[i] for i in positions), amb_dim, coset, proj,
                   "quotient", keys)

    @classmethod
    def subspace(cls, degree: int, basis: Mat, labels: Sequence[str] = ()) -> "GradedPiece":
        labels = tuple(labels) or tuple(f"v{k}" for k in range(basis.cols))
        return cls(degree, basis.cols, labels, basis.rows, basis, left_inverse(basis), "subspace")

    def coords(self, vectors: Mat) -> Mat:
        """Coordinates of ambient vectors (classes, for a quotient) in this piece's basis."""
        c = self.project @ vectors
        if self.kind == "subspace" and self.embed @ c != vectors:
            raise ValueError(f"vector does not lie in the degree {self.degree} piece")
        return c


class DegreewiseModule(ABC):
    """
    Lazily evaluated graded module: `piece(d)` and `act(var, d)` are memoized.
    `lower_bound` / `upper_bound` are optional support hints; pieces outside
    them are zero without computation.
    """

    def __init__(self, ring: PolyRing, name: str = "", lower_bound: Optional[int] = None,
                 upper_bound: Optional[int] = None):
        self.ring = ring
        self.field = ring.field
        self.name = name or type(self).__name__
        self.lower_bound = lower_bound
        self.upper_bound = upper_bound
        self._pieces: dict[int, GradedPiece] = {}
        self._acts: dict[tuple[int, int], Mat] = {}
        self._monomial_acts: dict[tuple[Exponent, int], Mat] = {}
        self._powers: dict[tuple, Mat] = {}
        # per-module caches for derived constructions (localizations, sections)
        self.derived_cache: dict = {}

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name}>"

    @abstractmethod
    def _build_piece(self, d: int) -> GradedPiece: ...

    @abstractmethod
    def _build_act(self, i: int, d: int) -> Mat: ...

    def vanishes_in(self, d: int) -> bool:
        return (self.lower_bound is not None and d < self.lower_bound) or \
            (self.upper_bound is not None and d > self.upper_bound)

    def piece(self, d: int) -> GradedPiece:
        d = int(d)
        p = self._pieces.get(d)
        if p is None:
            p = GradedPiece.zero(self.field, d) if self.vanishes_in(d) else self._build_piece(d)
            self._pieces[d] = p
        return p

    def dim(self, d: int) -> int:
        return self.piece(d).dim

    def dims(self, lo: int, hi: int) -> dict[int, int]:
        return {d: self.dim(d) for d in range(lo, hi + 1)}

    def act(self, var, d: int) -> Mat:
        """Multiplication by a variable, piece(d) -> piece(d + 1)."""
        i = self.ring.var_index(var)
        key = (i, d)
        m = self._acts.get(key)
        if m is None:
            rows, cols = self.dim(d + 1), self.dim(d)
            m = Mat.zeros(self.field, rows, cols) if rows == 0 or cols == 0 else self._build_act(i, d)
            if m.shape != (rows, cols):
                raise RuntimeError(f"{self.name}: action of {self.ring.variables[i]} in degree {d} "
                                   f"has shape {m.shape}, expected {(rows, cols)}")
            self._acts[key] = m
        return m

    def act_monomial(self, exp: Exponent, d: int) -> Mat:
        exp = tuple(exp)
        key = (exp, d)
        m = self._monomial_acts.get(key)
        if m is None:
            total = sum(exp)
            if total == 0:
                m = Mat.identity(self.field, self.dim(d))
            else:
                i = next(j for j, e in enumerate(exp) if e > 0)
                rest = tuple(e - 1 if j == i else e for j, e in enumerate(exp))
                m = self.act(i, d + total - 1) @ self.act_monomial(rest, d)
            self._monomial_acts[key] = m
        return m

    def act_poly(self, p: HomogPoly, d: int) -> Mat:
        """Multiplication by a homogeneous polynomial, piece(d) -> piece(d + deg p)."""
        acc = Mat.zeros(self.field, self.dim(d + p.degree), self.dim(d))
        for exp, c in p.terms():
            acc = acc + self.act_monomial(exp, d).scale(c)
        return acc

    def act_power(self, f: HomogPoly, t: int, d: int) -> Mat:
        """Multiplication by f^t, piece(d) -> piece(d + t deg f)."""
        key = (f.key(), t, d)
        m = self._powers.get(key)
        if m is None:
            if t == 0:
                m = Mat.identity(self.field, self.dim(d))
            elif f.is_monomial():
                (exp, c), = f.terms()
                m = self.act_monomial(tuple(t * a for a in exp), d)
                if c != 1:
                    m = m.scale(c ** t)
            else:
                m = self.act_poly(f, d + (t - 1) * f.degree) @ self.act_power(f, t - 1, d)
            self._powers[key] = m
        return m


def check_commuting(module: DegreewiseModule, lo: int, hi: int) -> bool:
    """Variable actions pairwise commute on every degree of [lo, hi]."""
    n = module.ring.nvars
    for d in range(lo, hi):
        for i, j in itertools.combinations(range(n), 2):
            if module.act(i, d + 1) @ module.act(j, d) != module.act(j, d + 1) @ module.act(i, d):
                logger.error(f"{module.name}: x{i}, x{j} do not commute in degree {d}")
                return False
    return True


class FPGradedModule(DegreewiseModule):
    """
    Finitely presented graded module: generators in degrees e_1..e_s and
    homogeneous relation columns in the free module (+) R(-e_i).
    """

    def __init__(self, ring: PolyRing, generator_degrees: Sequence[int],
                 relations: Sequence[Sequence[Optional[HomogPoly]]] = (), name: str = ""):
        self.generator_degrees = tuple(int(e) for e in generator_degrees)
        s = len(self.generator_degrees)
        columns, degrees = [], []
        for j, column in enumerate(relations):
            if len(column) != s:
                raise InputError(f"relation {j} has {len(column)} entries, expected {s}")
            entries = [None if (p is None or p.is_zero()) else p for p in column]
            col_degrees = {p.degree + self.generator_degrees[i] for i, p in enumerate(entries) if p is not None}
            if not col_degrees:
                continue
            if len(col_degrees) > 1:
                raise NonHomogeneous(None, f"relation {j} mixes degrees {sorted(col_degrees)}")
            columns.append(tuple(entries))
            degrees.append(col_degrees.pop())
        self.relations = tuple(columns)
        self.relation_degrees = tuple(degrees)
        if s:
            super().__init__(ring, name, lower_bound=min(self.generator_degrees))
        else:
            super().__init__(ring, name or "0", lower_bound=0, upper_bound=-1)

    @classmethod
    def free(cls, ring: PolyRing, degrees: Sequence[int] = (0,), name: str = "") -> "FPGradedModule":
        return cls(ring, degrees, (), name)

    @property
    def ngens(self) -> int:
        return len(self.generator_degrees)

    def is_free_rank_one(self) -> bool:
        return self.generator_degrees == (0,) and not self.relations

    def _free_basis(self, d: int) -> list[tuple[int, Exponent]]:
        return [(g, exp) for g, e in enumerate(self.generator_degrees) for exp in self.ring.monomials(d - e)]

    def _free_label(self, key: tuple[int, Exponent]) -> str:
        g, exp = key
        mono = self.ring.format_monomial(exp)
        if self.ngens == 1:
            return mono
        return f"e{g + 1}" if mono == "1" else f"{mono}*e{g + 1}"

    def free_vector(self, poly_vector: Sequence[Optional[HomogPoly]], degree: int) -> Mat:
        """Coordinates in the free module (+) R_{degree - e_i} of a vector of polynomials."""
        basis = self._free_basis(degree)
        index = {key: k for k, key in enumerate(basis)}
        K = self.field.domain
        column = [K.zero] * len(basis)
        for g, p in enumerate(poly_vector):
            if p is None or p.is_zero():
                continue
            if p.degree + self.generator_degrees[g] != degree:
                raise NonHomogeneous(None, f"entry {g} has degree {p.degree}, expected "
                                           f"{degree - self.generator_degrees[g]}")
            for exp, c in p.terms():
                column[index[(g, exp)]] += c
        return Mat(self.field, len(basis), 1, [[a] for a in column])

    def _relation_span(self, d: int) -> Mat:
        basis = self._free_basis(d)
        index = {key: k for k, key in enumerate(basis)}
        K = self.field.domain
        columns = []
        for column, c in zip(self.relations, self.relation_degrees):
            for mono in self.ring.monomials(d - c):
                vec = [K.zero] * len(basis)
                for g, p in enumerate(column):
                    if p is None:
                        continue
                    for exp, coeff in p.terms():
                        vec[index[(g, tuple(a + b for a, b in zip(exp, mono)))]] += coeff
                columns.append(vec)
        return Mat.from_columns(self.field, columns, len(basis))

    def _build_piece(self, d: int) -> GradedPiece:
        basis = self._free_basis(d)
        piece = GradedPiece.quotient(d, self._relation_span(d), len(basis),
                                     [self._free_label(k) for k in basis], basis)
        logger.debug(f"{self.name}: degree {d} free rank {len(basis)}, piece dim {piece.dim}")
        return piece

    def _build_act(self, i: int, d: int) -> Mat:
        source, target = self.piece(d), self.piece(d + 1)
        index = {key: k for k, key in enumerate(self._free_basis(d + 1))}
        step = self.ring.unit_exponent(i)
        columns = []
        for g, exp in source.keys:
            k = index[(g, tuple(a + b for a, b in zip(exp, step)))]
            columns.append(target.project.column(k))
        return Mat.from_columns(self.field, columns, target.dim)

    def act_monomial(self, exp: Exponent, d: int) -> Mat:
        """Multiplication by a monomial, read off the free basis in one step."""
        exp = tuple(exp)
        key = (exp, d)
        m = self._monomial_acts.get(key)
        if m is None:
            source, target = self.piece(d), self.piece(d + sum(exp))
            if source.dim == 0 or target.dim == 0:
                m = Mat.zeros(self.field, target.dim, source.dim)
            else:
                index = {k: i for i, k in enumerate(self._free_basis(d + sum(exp)))}
                columns = [target.project.column(index[(g, tuple(a + b for a, b in zip(mono, exp)))])
                           for g, mono in source.keys]
                m = Mat.from_columns(self.field, columns, target.dim)
            self._monomial_acts[key] = m
        return m

    def element(self, poly_vector: Sequence[Optional[HomogPoly]], degree: int) -> Mat:
        return self.piece(degree).project @ self.free_vector(poly_vector, degree)

    def generator(self, g: int) -> Mat:
        e = self.generator_degrees[g]
        unit = [None] * self.ngens
        unit[g] = self.ring.one()
        return self.element(unit, e)

    def monomial_torsion_bound(self) -> Optional[int]:
        """
        When every relation column has a single nonzero entry that is a scaled
        monomial, the module is a sum of monomial quotients and multiplication by
        a monomial f has f-torsion killed by f^t for t = the largest exponent in
        the relations. Returns that t, or None when the presentation is not of
        this shape.
        """
        bound = 0
        for column in self.relations:
            entries = [p for p in column if p is not None]
            if len(entries) != 1 or not entries[0].is_monomial():
                return None
            bound = max(bound, max(entries[0].exponent(), default=0))
        return bound


_free_rank_one: dict[tuple[PolyRing, int], FPGradedModule] = {}
_free_rank_one_lock = threading.Lock()


def free_rank_one(ring: PolyRing, degree: int = 0) -> FPGradedModule:
    """
    The shared R(-degree) of a ring; degree 0 is the structure module O.

    Args:
        ring: The polynomial ring.
        degree: Degree of the generator.

    Returns:
        FPGradedModule: One object per (ring, degree), so its localizations and
        sections are computed once per process.
    """
    with _free_rank_one_lock:
        key = (ring, degree)
        m = _free_rank_one.get(key)
        if m is None:
            m = FPGradedModule.free(ring, (degree,), "O" if degree == 0 else f"R({-degree})")
            _free_rank_one[key] = m
        return m


def realize_piece(m: FPGradedModule, d: int) -> GradedPiece:
    return m.piece(d)


def act_matrix(m: DegreewiseModule, var, d: int) -> Mat:
    return m.act(var, d)


class GradedModuleMap:
    """A degree-preserving (up to `shift`) map given by its per-degree matrices."""

    def __init__(self, source: DegreewiseModule, target: DegreewiseModule,
                 matrix_fn: Callable[[int], Mat], shift: int = 0, name: str = ""):
        if source.ring != target.ring:
            raise InputError("source and target live over different rings")
        self.source = source
        self.target = target
        self.shift = shift
        self.name = name or f"{source.name}->{target.name}"
        self._matrix_fn = matrix_fn
        self._matrices: dict[int, Mat] = {}

    def matrix(self, d: int) -> Mat:
        m = self._matrices.get(d)
        if m is None:
            rows, cols = self.target.dim(d + self.shift), self.source.dim(d)
            m = Mat.zeros(self.source.field, rows, cols) if rows == 0 or cols == 0 else self._matrix_fn(d)
            if m.shape != (rows, cols):
                raise RuntimeError(f"{self.name}: matrix in degree {d} has shape {m.shape}, "
                                   f"expected {(rows, cols)}")
            self._matrices[d] = m
        return m

    def compose(self, first: "GradedModuleMap") -> "GradedModuleMap":
        """self after first."""
        if first.target is not self.source:
            raise InputError(f"cannot compose {self.name} after {first.name}")
        return GradedModuleMap(first.source, self.target,
                               lambda d: self.matrix(d + first.shift) @ first.matrix(d),
                               first.shift + self.shift, f"{self.name}*{first.name}")

    def check_natural(self, lo: int, hi: int) -> bool:
        for d in range(lo, hi):
            for i in range(self.source.ring.nvars):
                left = self.target.act(i, d + self.shift) @ self.matrix(d)
                right = self.matrix(d + 1) @ self.source.act(i, d)
                if left != right:
                    logger.error(f"{self.name}: not natural for x{i} in degree {d}")
                    return False
        return True


def identity_map(m: DegreewiseModule) -> GradedModuleMap:
    return GradedModuleMap(m, m, lambda d: Mat.identity(m.field, m.dim(d)), name=f"id_{m.name}")


def zero_map(source: DegreewiseModule, target: DegreewiseModule) -> GradedModuleMap:
    return GradedModuleMap(source, target, lambda d: Mat.zeros(source.field, target.dim(d), source.dim(d)),
                           name="0")


def map_from_gen_images(src: FPGradedModule, tgt: DegreewiseModule, images: Sequence[Mat],
                        name: str = "") -> GradedModuleMap:
    """
    The map sending generator g of `src` to images[g], a column in tgt.piece(e_g).
    Raises RelationNotKilled when some relation of `src` has nonzero image.
    """
    if len(images) != src.ngens:
        raise InputError(f"{len(images)} images for {src.ngens} generators")
    images = list(images)
    for g, (e, img) in enumerate(zip(src.generator_degrees, images)):
        if img.shape != (tgt.dim(e), 1):
            raise InputError(f"image of generator {g} has shape {img.shape}, expected {(tgt.dim(e), 1)}")
    for j, (column, c) in enumerate(zip(src.relations, src.relation_degrees)):
        total = Mat.zeros(src.field, tgt.dim(c), 1)
        for g, p in enumerate(column):
            if p is not None:
                total = total + tgt.act_poly(p, src.generator_degrees[g]) @ images[g]
        if not total.is_zero():
            raise RelationNotKilled(j)

    def matrix(d: int) -> Mat:
        columns = [tgt.act_monomial(exp, src.generator_degrees[g]) @ images[g] for g, exp in src.piece(d).keys]
        return hstack_all(src.field, tgt.dim(d), columns)

    return GradedModuleMap(src, tgt, matrix, name=name)


def map_from_poly_images(src: FPGradedModule, tgt: FPGradedModule,
                         poly_images: Sequence[Sequence[Optional[HomogPoly]]], name: str = "") -> GradedModuleMap:
    """Same as map_from_gen_images with images written as polynomial vectors over tgt's generators."""
    images = [tgt.element(vec, e) for vec, e in zip(poly_images, src.generator_degrees)]
    return map_from_gen_images(src, tgt, images, name)


class KernelModule(DegreewiseModule):
    def __init__(self, f: GradedModuleMap):
        if f.shift:
            raise InputError("kernels are only formed for degree-preserving maps")
        super().__init__(f.source.ring, f"ker({f.name})", f.source.lower_bound, f.source.upper_bound)
        self.map = f
        self.inclusion = GradedModuleMap(self, f.source, lambda d: self.piece(d).embed, name=f"incl_{self.name}")

    def _build_piece(self, d: int) -> GradedPiece:
        return GradedPiece.subspace(d, kernel_basis(self.map.matrix(d)))

    def _build_act(self, i: int, d: int) -> Mat:
        return self.piece(d + 1).coords(self.map.source.act(i, d) @ self.piece(d).embed)


class ImageModule(DegreewiseModule):
    def __init__(self, f: GradedModuleMap):
        if f.shift:
            raise InputError("images are only formed for degree-preserving maps")
        super().__init__(f.source.ring, f"im({f.name})", f.source.lower_bound, f.source.upper_bound)
        self.map = f
        self.inclusion = GradedModuleMap(self, f.target, lambda d: self.piece(d).embed, name=f"incl_{self.name}")
        self.corestriction = GradedModuleMap(f.source, self, lambda d: self.piece(d).coords(f.matrix(d)),
                                             name=f"onto_{self.name}")

    def _build_piece(self, d: int) -> GradedPiece:
        return GradedPiece.subspace(d, independent_columns(self.map.matrix(d)))

    def _build_act(self, i: int, d: int) -> Mat:
        return self.piece(d + 1).coords(self.map.target.act(i, d) @ self.piece(d).embed)


class CokernelModule(DegreewiseModule):
    def __init__(self, f: GradedModuleMap):
        if f.shift:
            raise InputError("cokernels are only formed for degree-preserving maps")
        super().__init__(f.target.ring, f"coker({f.name})", f.target.lower_bound, f.target.upper_bound)
        self.map = f
        self.projection = GradedModuleMap(f.target, self, lambda d: self.piece(d).project,
                                          name=f"proj_{self.name}")

    def _build_piece(self, d: int) -> GradedPiece:
        amb = self.map.target.piece(d)
        return GradedPiece.quotient(d, self.map.matrix(d), amb.dim, amb.labels)

    def _build_act(self, i: int, d: int) -> Mat:
        return self.piece(d + 1).project @ self.map.target.act(i, d) @ self.piece(d).embed


def kernel_dw(f: GradedModuleMap) -> KernelModule:
    return KernelModule(f)


def image_dw(f: GradedModuleMap) -> ImageModule:
    return ImageModule(f)


def cokernel_dw(f: GradedModuleMap) -> CokernelModule:
    return CokernelModule(f)


class DirectSumModule(DegreewiseModule):
    def __init__(self, summands: Sequence[DegreewiseModule], name: str = ""):
        if not summands:
            raise InputError("a direct sum needs at least one summand")
        lows = [m.lower_bound for m in summands]
        highs = [m.upper_bound for m in summands]
        super().__init__(summands[0].ring, name or " + ".join(m.name for m in summands),
                         None if None in lows else min(lows), None if None in highs else max(highs))
        self.summands = tuple(summands)

    def _build_piece(self, d: int) -> GradedPiece:
        labels = [f"{m.name}:{label}" for m in self.summands for label in m.piece(d).labels]
        return GradedPiece.standard(self.field, d, len(labels), labels)

    def _build_act(self, i: int, d: int) -> Mat:
        return block_diagonal(self.field, [m.act(i, d) for m in self.summands])

    def injection(self, k: int) -> GradedModuleMap:
        def matrix(d: int) -> Mat:
            offset = sum(m.dim(d) for m in self.summands[:k])
            width = self.summands[k].dim(d)
            return Mat.identity(self.field, self.dim(d)).select_columns(range(offset, offset + width))
        return GradedModuleMap(self.summands[k], self, matrix, name=f"inj{k}")

    def projection(self, k: int) -> GradedModuleMap:
        def matrix(d: int) -> Mat:
            offset = sum(m.dim(d) for m in self.summands[:k])
            width = self.summands[k].dim(d)
            return Mat.identity(self.field, self.dim(d)).select_rows(range(offset, offset + width))
        return GradedModuleMap(self, self.summands[k], matrix, name=f"pr{k}")


class HomModule(DegreewiseModule):
    """
    Hom(m, n) for finitely presented m: degree-d maps are tuples
    (n_1..n_s) with n_i in n_{d+e_i} annihilating every relation.
    """

    def __init__(self, m: FPGradedModule, n: DegreewiseModule):
        super().__init__(m.ring, f"Hom({m.name},{n.name})")
        self.source_module = m
        self.target_module = n

    def _blocks(self, d: int) -> list[int]:
        return [self.target_module.dim(d + e) for e in self.source_module.generator_degrees]

    def _build_piece(self, d: int) -> GradedPiece:
        m, n = self.source_module, self.target_module
        amb = sum(self._blocks(d))
        rows = []
        for column, c in zip(m.relations, m.relation_degrees):
            blocks = [n.act_poly(p, d + e) if p is not None else Mat.zeros(self.field, n.dim(d + c), n.dim(d + e))
                      for p, e in zip(column, m.generator_degrees)]
            rows.append(hstack_all(self.field, n.dim(d + c), blocks))
        constraints = vstack_all(self.field, amb, rows)
        return GradedPiece.subspace(d, kernel_basis(constraints))

    def _build_act(self, i: int, d: int) -> Mat:
        m, n = self.source_module, self.target_module
        step = block_diagonal(self.field, [n.act(i, d + e) for e in m.generator_degrees])
        return self.piece(d + 1).coords(step @ self.piece(d).embed)


class TensorModule(DegreewiseModule):
    """m (x) n for finitely presented m: ((+) n_{d-e_i}) modulo the relation action."""

    def __init__(self, m: FPGradedModule, n: DegreewiseModule):
        lower = None
        if n.lower_bound is not None and m.generator_degrees:
            lower = n.lower_bound + min(m.generator_degrees)
        super().__init__(m.ring, f"{m.name}(x){n.name}", lower_bound=lower)
        self.left = m
        self.right = n

    def _build_piece(self, d: int) -> GradedPiece:
        m, n = self.left, self.right
        amb = sum(n.dim(d - e) for e in m.generator_degrees)
        relation_images = []
        for column, c in zip(m.relations, m.relation_degrees):
            blocks = [n.act_poly(p, d - c) if p is not None else Mat.zeros(self.field, n.dim(d - e), n.dim(d - c))
                      for p, e in zip(column, m.generator_degrees)]
            relation_images.append(vstack_all(self.field, n.dim(d - c), blocks))
        labels = [f"{label}(x)g{g + 1}" for g, e in enumerate(m.generator_degrees) for label in n.piece(d - e).labels]
        return GradedPiece.quotient(d, hstack_all(self.field, amb, relation_images), amb, labels)

    def _build_act(self, i: int, d: int) -> Mat:
        step = block_diagonal(self.field, [self.right.act(i, d - e) for e in self.left.generator_degrees])
        return self.piece(d + 1).project @ step @ self.piece(d).embed

    def ambient_map(self, d: int, image_of: Callable[[int, int], Mat]) -> Mat:
        """
        The matrix on tensor classes of a map given on (+) n_{d-e_g} blockwise:
        image_of(g, d) is the matrix of n_{d-e_g} -> target_d for generator g.
        """
        blocks = [image_of(g, d) for g in range(self.left.ngens)]
        rows = blocks[0].rows if blocks else 0
        return hstack_all(self.field, rows, blocks) @ self.piece(d).embed


def hom_piece(m: FPGradedModule, n: DegreewiseModule, d: int) -> GradedPiece:
    return HomModule(m, n).piece(d)


def tensor_piece(m: FPGradedModule, n: DegreewiseModule, d: int) -> GradedPiece:
    return TensorModule(m, n).piece(d)


def sequence_homology(f: GradedModuleMap, g: GradedModuleMap, d: int) -> tuple[int, int, int]:
    """
    For composable A -f-> B -g-> C with g f = 0: (dim ker f_d, dim homology at B_d, dim coker g_d).
    """
    if f.target is not g.source:
        raise InputError(f"{g.name} does not start where {f.name} ends")
    fd, gd = f.matrix(d), g.matrix(d)
    if not (gd @ fd).is_zero():
        raise InputError(f"{g.name} after {f.name} is nonzero in degree {d}")
    rf, rg = fd.rank(), gd.rank()
    return f.source.dim(d) - rf, (f.target.dim(d) - rg) - rf, g.target.dim(d) - rg
