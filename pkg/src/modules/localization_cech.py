"""
Localization at homogeneous elements, Cech complexes of distinguished covers,
sections over quasicompact opens and first cohomology.

(M_f)_d is realized at a denominator cap N as M_{d + N deg f} modulo the
stable kernel of multiplication by powers of f: the class of m stands for
m / f^N. Raising the cap multiplies representatives by powers of f.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from src.constants.scenario_models import CapPolicy
from .errors import CapExhausted, InputError
from .exact_linalg import Mat, block_diagonal, kernel_basis, vstack_all
from .graded_modules import (
    DegreewiseModule,
    FPGradedModule,
    GradedModuleMap,
    GradedPiece,
    HomogPoly,
    PolyRing,
)

logger = logging.getLogger(__name__)

CERTIFIED = "certified"
HEURISTIC = "heuristic"


@dataclass(frozen=True)
class OpenSubset:
    """W = D(f_1) u ... u D(f_n) inside Spec R."""

    ring: PolyRing
    denominators: tuple[HomogPoly, ...]

    def __post_init__(self):
        if not self.denominators:
            raise InputError("an open subset needs at least one denominator")
        for f in self.denominators:
            if f.is_zero():
                raise InputError("D(0) is empty; zero denominators are rejected")
            if f.ring != self.ring:
                raise InputError(f"denominator {f} lives over another ring")

    def __len__(self) -> int:
        return len(self.denominators)

    def key(self) -> tuple:
        return tuple(f.key() for f in self.denominators)

    def label(self) -> str:
        return " u ".join(f"D({f})" for f in self.denominators)

    def product(self, indices: Sequence[int]) -> HomogPoly:
        out = self.ring.one()
        for i in indices:
            out = out * self.denominators[i]
        return out


@dataclass(frozen=True)
class LocalizedPiece:
    base: DegreewiseModule
    f: HomogPoly
    degree: int
    cap: int
    source_degree: int
    piece: GradedPiece
    status: str
    stable_exponent: int

    @property
    def dim(self) -> int:
        return self.piece.dim

    @property
    def labels(self) -> tuple[str, ...]:
        return self.piece.labels


def _stable_exponent(m: DegreewiseModule, f: HomogPoly, source_degree: int) -> tuple[int, str]:
    if isinstance(m, FPGradedModule) and f.is_monomial():
        t = m.monomial_torsion_bound()
        if t is not None:
            return t, CERTIFIED
    if f.degree == 0:
        return 0, CERTIFIED
    dim = m.dim(source_degree)
    if dim == 0:
        return 0, CERTIFIED
    previous = dim
    for t in range(1, dim + 2):
        r = m.act_power(f, t, source_degree).rank()
        if r == previous:
            logger.debug(f"{m.name}: f-kernel of {f} stable after {t - 1} steps in degree {source_degree}")
            return t - 1, HEURISTIC
        previous = r
    return dim + 1, HEURISTIC


def _fraction_labels(m: DegreewiseModule, f: HomogPoly, cap: int, source_degree: int) -> list[str]:
    piece = m.piece(source_degree)
    if isinstance(m, FPGradedModule) and f.is_monomial() and piece.keys:
        fexp = f.exponent()
        out = []
        for g, exp in piece.keys:
            mono = m.ring.format_monomial(tuple(a - cap * b for a, b in zip(exp, fexp)))
            if m.ngens == 1:
                out.append(mono)
            else:
                out.append(f"e{g + 1}" if mono == "1" else f"{mono}*e{g + 1}")
        return out
    if cap == 0:
        return list(piece.labels)
    return [f"({label})/({f})^{cap}" for label in piece.labels]


def localize_piece(m: DegreewiseModule, f: HomogPoly, d: int, cap: int) -> LocalizedPiece:
    """(M_f)_d with denominators up to f^cap."""
    if cap < 0:
        raise InputError(f"negative denominator cap {cap}")
    key = ("loc", f.key(), d, cap)
    cached = m.derived_cache.get(key)
    if cached is not None:
        return cached
    source_degree = d + cap * f.degree
    ambient = m.dim(source_degree)
    t, status = _stable_exponent(m, f, source_degree)
    if t == 0 or ambient == 0:
        kernel = Mat.zeros(m.field, ambient, 0)
    else:
        kernel = kernel_basis(m.act_power(f, t, source_degree))
    piece = GradedPiece.quotient(d, kernel, ambient, _fraction_labels(m, f, cap, source_degree),
                                 m.piece(source_degree).keys)
    loc = LocalizedPiece(m, f, d, cap, source_degree, piece, status, t)
    m.derived_cache[key] = loc
    return loc


class LocalizedModule(DegreewiseModule):
    """M_f at a fixed cap, as a degreewise module."""

    def __init__(self, m: DegreewiseModule, f: HomogPoly, cap: int):
        super().__init__(m.ring, f"{m.name}_({f})")
        self.base = m
        self.f = f
        self.cap = cap

    def _build_piece(self, d: int) -> GradedPiece:
        return localize_piece(self.base, self.f, d, self.cap).piece

    def _build_act(self, i: int, d: int) -> Mat:
        src = localize_piece(self.base, self.f, d, self.cap)
        return self.piece(d + 1).project @ self.base.act(i, src.source_degree) @ src.piece.embed


class CechComplex:
    """
    The Cech complex of `module` on the cover of `open` at one denominator cap.
    Components are ordered by index tuples (i) < (i, j) < (i, j, k) in input order;
    (d0 s)_ij = s_j - s_i and (d1 t)_ijk = t_jk - t_ik + t_ij.
    """

    def __init__(self, module: DegreewiseModule, open_set: OpenSubset, cap: int):
        self.module = module
        self.open = open_set
        self.cap = cap
        n = len(open_set)
        self.singles = [(i,) for i in range(n)]
        self.pairs = list(itertools.combinations(range(n), 2))
        self.triples = list(itertools.combinations(range(n), 3))
        self._products = {idx: open_set.product(idx) for idx in self.singles + self.pairs + self.triples}
        self._d0: dict[int, Mat] = {}
        self._d1: dict[int, Mat] = {}

    def component(self, index: tuple[int, ...], d: int) -> LocalizedPiece:
        return localize_piece(self.module, self._products[index], d, self.cap)

    def _dims(self, indices, d: int) -> list[int]:
        return [self.component(idx, d).dim for idx in indices]

    def c0_dim(self, d: int) -> int:
        return sum(self._dims(self.singles, d))

    def c1_dim(self, d: int) -> int:
        return sum(self._dims(self.pairs, d))

    def c2_dim(self, d: int) -> int:
        return sum(self._dims(self.triples, d))

    def restriction(self, src: tuple[int, ...], tgt: tuple[int, ...], d: int) -> Mat:
        """M_{f_src} -> M_{f_tgt}: class of m / f_src^N goes to m g^N / f_tgt^N, g = f_{tgt - src}."""
        extra = self.open.product([i for i in tgt if i not in src])
        s, t = self.component(src, d), self.component(tgt, d)
        return t.piece.project @ self.module.act_power(extra, self.cap, s.source_degree) @ s.piece.embed

    def _differential(self, sources, targets, d: int) -> Mat:
        field_ = self.module.field
        rows = []
        for tgt in targets:
            blocks = []
            for src in sources:
                shape = (self.component(tgt, d).dim, self.component(src, d).dim)
                if set(src) <= set(tgt):
                    omitted = next(k for k, i in enumerate(tgt) if i not in src)
                    block = self.restriction(src, tgt, d)
                    blocks.append(block if omitted % 2 == 0 else -block)
                else:
                    blocks.append(Mat.zeros(field_, *shape))
            rows.append(blocks[0].hstack(*blocks[1:]) if blocks else Mat.zeros(field_, 0, 0))
        width = sum(self.component(src, d).dim for src in sources)
        return vstack_all(field_, width, rows)

    def d0(self, d: int) -> Mat:
        if d not in self._d0:
            self._d0[d] = self._differential(self.singles, self.pairs, d)
        return self._d0[d]

    def d1(self, d: int) -> Mat:
        if d not in self._d1:
            self._d1[d] = self._differential(self.pairs, self.triples, d)
        return self._d1[d]

    def check_d1d0(self, d: int) -> bool:
        return (self.d1(d) @ self.d0(d)).is_zero()

    def h0_dim(self, d: int) -> int:
        return self.c0_dim(d) - self.d0(d).rank()

    def h1_dim(self, d: int) -> int:
        if not self.pairs:
            return 0
        return (self.c1_dim(d) - self.d1(d).rank()) - self.d0(d).rank()

    def c0_act(self, i: int, d: int) -> Mat:
        blocks = []
        for idx in self.singles:
            src, tgt = self.component(idx, d), self.component(idx, d + 1)
            blocks.append(tgt.piece.project @ self.module.act(i, src.source_degree) @ src.piece.embed)
        return block_diagonal(self.module.field, blocks)

    def split_c0(self, vector: Mat, d: int) -> list[Mat]:
        parts, offset = [], 0
        for idx in self.singles:
            width = self.component(idx, d).dim
            parts.append(vector.select_rows(range(offset, offset + width)))
            offset += width
        return parts

    def statuses(self) -> set[str]:
        return {v.status for k, v in self.module.derived_cache.items()
                if k[0] == "loc" and k[3] == self.cap and isinstance(v, LocalizedPiece)}


def cech_at_cap(m: DegreewiseModule, w: OpenSubset, cap: int) -> CechComplex:
    key = ("cech", w.key(), cap)
    cx = m.derived_cache.get(key)
    if cx is None:
        cx = CechComplex(m, w, cap)
        m.derived_cache[key] = cx
    return cx


@dataclass
class CechComplexWindow:
    module: DegreewiseModule
    open: OpenSubset
    window: tuple[int, int]
    cap: int
    c0_dims: dict[int, int]
    c1_dims: dict[int, int]
    c2_dims: dict[int, int]
    h0_dims: dict[int, int]
    h1_dims: dict[int, int]
    differentials_compose_to_zero: bool
    flags: list[str] = field(default_factory=list)


class SectionsModule(DegreewiseModule):
    """Gamma(W, M~) at a fixed cap: piece(d) is the kernel of the Cech differential d0."""

    def __init__(self, m: DegreewiseModule, w: OpenSubset, cap: int):
        super().__init__(m.ring, f"G({w.label()}, {m.name})")
        self.base = m
        self.open = w
        self.cap = cap
        self.complex = cech_at_cap(m, w, cap)

    def _build_piece(self, d: int) -> GradedPiece:
        basis = kernel_basis(self.complex.d0(d))
        logger.debug(f"{self.name}: degree {d} at cap {self.cap} has dim {basis.cols}")
        return GradedPiece.subspace(d, basis)

    def _build_act(self, i: int, d: int) -> Mat:
        return self.piece(d + 1).coords(self.complex.c0_act(i, d) @ self.piece(d).embed)

    def element(self, coords: Mat, d: int) -> "SectionElement":
        return SectionElement(self.base, self.open, d, self.cap, self.piece(d).embed @ coords)

    def coords_of(self, s: "SectionElement") -> Mat:
        if s.cap > self.cap:
            raise InputError(f"section at cap {s.cap} does not fit sections at cap {self.cap}")
        return self.piece(s.degree).coords(raise_cap(s, self.cap).vector)

    def basis_elements(self, d: int) -> list["SectionElement"]:
        embed = self.piece(d).embed
        return [SectionElement(self.base, self.open, d, self.cap, embed.select_columns([k]))
                for k in range(embed.cols)]


def sections_at_cap(m: DegreewiseModule, w: OpenSubset, cap: int) -> SectionsModule:
    key = ("sections", w.key(), cap)
    s = m.derived_cache.get(key)
    if s is None:
        s = SectionsModule(m, w, cap)
        m.derived_cache[key] = s
    return s


def _stabilize(w: OpenSubset, window: tuple[int, int], caps: CapPolicy, measure, what: str) -> tuple[int, list[str]]:
    """Escalates the cap until `measure(cap)` is unchanged for two consecutive increments."""
    lo, hi = window
    start = caps.initial(lo, hi)
    history = []
    cap = start
    for k in range(caps.escalations + 1):
        cap = start + k * caps.step
        history.append(measure(cap))
        if len(history) >= 3 and history[-1] == history[-2] == history[-3]:
            logger.info(f"{what}: dims stable at cap {cap}")
            return cap, [f"cap-stabilized:{cap}"]
    if len(w) > 1:
        raise CapExhausted(cap, f"{what} over {w.label()}")
    logger.warning(f"{what}: affine cover {w.label()} never stabilizes, truncating at cap {cap}")
    return cap, [f"truncated-localization:{cap}"]


def _heuristic_flags(modules: Sequence[DegreewiseModule], w: OpenSubset, cap: int) -> list[str]:
    statuses = set()
    for m in modules:
        statuses |= cech_at_cap(m, w, cap).statuses()
    return ["localization:heuristic"] if HEURISTIC in statuses else []


def common_sections(modules: Sequence[DegreewiseModule], w: OpenSubset, window: tuple[int, int],
                    caps: CapPolicy = CapPolicy()) -> tuple[list[SectionsModule], list[str]]:
    """
    Sections of several modules over W, all realized at one common stable cap.

    Args:
        modules: The modules, realized jointly so maps between them induce maps of sections.
        w: The open.
        window: Degrees whose dims must stabilize.
        caps: Cap escalation policy.

    Returns:
        tuple: The cached sections modules (shared, never mutated here) and the
        stabilization flags of this realization.
    """
    lo, hi = window

    def measure(cap: int):
        return tuple(tuple(sections_at_cap(m, w, cap).dim(d) for d in range(lo, hi + 1)) for m in modules)

    names = ", ".join(m.name for m in modules)
    cap, flags = _stabilize(w, window, caps, measure, f"sections of {names}")
    flags = flags + _heuristic_flags(modules, w, cap)
    return [sections_at_cap(m, w, cap) for m in modules], flags


def sections_window(m: DegreewiseModule, w: OpenSubset, window: tuple[int, int],
                    caps: CapPolicy = CapPolicy()) -> SectionsModule:
    return common_sections([m], w, window, caps)[0][0]


def cech_complex(m: DegreewiseModule, w: OpenSubset, window: tuple[int, int],
                 caps: Union[int, CapPolicy] = CapPolicy()) -> CechComplexWindow:
    lo, hi = window
    if isinstance(caps, CapPolicy):
        (sections,), flags = common_sections([m], w, window, caps)
        cap = sections.cap
    else:
        cap, flags = int(caps), []
    cx = cech_at_cap(m, w, cap)
    degrees = range(lo, hi + 1)
    return CechComplexWindow(
        module=m, open=w, window=(lo, hi), cap=cap,
        c0_dims={d: cx.c0_dim(d) for d in degrees},
        c1_dims={d: cx.c1_dim(d) for d in degrees},
        c2_dims={d: cx.c2_dim(d) for d in degrees},
        h0_dims={d: cx.h0_dim(d) for d in degrees},
        h1_dims={d: cx.h1_dim(d) for d in degrees},
        differentials_compose_to_zero=all(cx.check_d1d0(d) for d in degrees),
        flags=flags,
    )


@dataclass
class CohomologyTable:
    dims: dict[int, int]
    cap: int
    flags: list[str]


def h1_window(m: DegreewiseModule, w: OpenSubset, window: tuple[int, int],
              caps: CapPolicy = CapPolicy()) -> CohomologyTable:
    """
    dim H^1(W, M~)_d for d in the window, at the first cap where the dims repeat.

    Args:
        m: The module.
        w: The open; a single basic open is affine and has no H^1.
        window: Degrees to report.
        caps: Cap escalation policy.

    Returns:
        CohomologyTable: Dims, the cap used and stabilization flags.
    """
    lo, hi = window
    if len(w) == 1:
        return CohomologyTable({d: 0 for d in range(lo, hi + 1)}, 0, ["single-open-cover"])

    def measure(cap: int):
        cx = cech_at_cap(m, w, cap)
        return tuple(cx.h1_dim(d) for d in range(lo, hi + 1))

    cap, flags = _stabilize(w, window, caps, measure, f"H1 of {m.name}")
    cx = cech_at_cap(m, w, cap)
    return CohomologyTable({d: cx.h1_dim(d) for d in range(lo, hi + 1)}, cap,
                           flags + _heuristic_flags([m], w, cap))


def restriction_map(m: DegreewiseModule, sections: SectionsModule) -> GradedModuleMap:
    """M -> Gamma(W, M~): m goes to (m/1) in every component."""
    if sections.base is not m:
        raise InputError(f"{sections.name} are not sections of {m.name}")
    cx = sections.complex

    def matrix(d: int) -> Mat:
        blocks = [cx.component(idx, d).piece.project @ m.act_power(sections.open.denominators[idx[0]], cx.cap, d)
                  for idx in cx.singles]
        return sections.piece(d).coords(vstack_all(m.field, m.dim(d), blocks))

    return GradedModuleMap(m, sections, matrix, name=f"res_{m.name}")


def restriction_to_sections(m: DegreewiseModule, w: OpenSubset, window: tuple[int, int],
                            caps: CapPolicy = CapPolicy()) -> GradedModuleMap:
    return restriction_map(m, sections_window(m, w, window, caps))


def sections_map(f: GradedModuleMap, source: SectionsModule, target: SectionsModule) -> GradedModuleMap:
    """Gamma(W, f): applies f componentwise to the localized pieces."""
    if f.shift:
        raise InputError("sections are only mapped along degree-preserving maps")
    if source.cap != target.cap or source.open != target.open:
        raise InputError("source and target sections must share the open and the cap")
    if source.base is not f.source or target.base is not f.target:
        raise InputError(f"{f.name} does not connect {source.name} and {target.name}")
    cap = source.cap

    def matrix(d: int) -> Mat:
        blocks = []
        for g in source.open.denominators:
            ls, lt = localize_piece(f.source, g, d, cap), localize_piece(f.target, g, d, cap)
            blocks.append(lt.piece.project @ f.matrix(ls.source_degree) @ ls.piece.embed)
        return target.piece(d).coords(block_diagonal(f.source.field, blocks) @ source.piece(d).embed)

    return GradedModuleMap(source, target, matrix, name=f"G({f.name})")


@dataclass(frozen=True)
class SectionElement:
    """A homogeneous element of C0 = (+) M_{f_i} realized at `cap`."""

    module: DegreewiseModule
    open: OpenSubset
    degree: int
    cap: int
    vector: Mat

    def components(self) -> list[Mat]:
        return cech_at_cap(self.module, self.open, self.cap).split_c0(self.vector, self.degree)

    def is_section(self) -> bool:
        return (cech_at_cap(self.module, self.open, self.cap).d0(self.degree) @ self.vector).is_zero()


def restrict_element(m: DegreewiseModule, w: OpenSubset, vector: Mat, degree: int, cap: int = 0) -> SectionElement:
    """The image of an element of M_degree (a column in piece coordinates) in C0."""
    cx = cech_at_cap(m, w, cap)
    blocks = [cx.component(idx, degree).piece.project @ m.act_power(w.denominators[idx[0]], cap, degree) @ vector
              for idx in cx.singles]
    return SectionElement(m, w, degree, cap, vstack_all(m.field, vector.cols, blocks))


def raise_cap(s: SectionElement, cap: int) -> SectionElement:
    if cap < s.cap:
        raise InputError(f"cannot lower a section from cap {s.cap} to {cap}")
    if cap == s.cap:
        return s
    parts = []
    for f, part in zip(s.open.denominators, s.components()):
        old = localize_piece(s.module, f, s.degree, s.cap)
        new = localize_piece(s.module, f, s.degree, cap)
        parts.append(new.piece.project @ s.module.act_power(f, cap - s.cap, old.source_degree)
                     @ old.piece.embed @ part)
    return SectionElement(s.module, s.open, s.degree, cap, vstack_all(s.module.field, 1, parts))


def section_mult(w: OpenSubset, a: SectionElement, s: SectionElement) -> SectionElement:
    """a . s for a section a of the structure sheaf; the product lives at cap a.cap + s.cap."""
    ring_module = a.module
    if not (isinstance(ring_module, FPGradedModule) and ring_module.is_free_rank_one()):
        raise InputError("the left factor must be a section of the structure sheaf")
    if a.open != w or s.open != w:
        raise InputError("both factors must be sections over the same open")
    ring = w.ring
    m = s.module
    cap = a.cap + s.cap
    parts = []
    for f, a_part, s_part in zip(w.denominators, a.components(), s.components()):
        la = localize_piece(ring_module, f, a.degree, a.cap)
        ls = localize_piece(m, f, s.degree, s.cap)
        numerator = ring.poly_from_vector((la.piece.embed @ a_part).column(0), la.source_degree)
        target = localize_piece(m, f, a.degree + s.degree, cap)
        parts.append(target.piece.project @ m.act_poly(numerator, ls.source_degree) @ ls.piece.embed @ s_part)
    return SectionElement(m, w, a.degree + s.degree, cap, vstack_all(m.field, 1, parts))


def section_label(s: SectionElement) -> str:
    """Text for a C0 or C1 style vector: nonzero coefficients against the localized basis labels."""
    parts = []
    cx = cech_at_cap(s.module, s.open, s.cap)
    for idx, part in zip(cx.singles, s.components()):
        text = format_localized(cx.component(idx, s.degree), part)
        if text != "0":
            parts.append(text if len(cx.singles) == 1 else f"[{idx[0]}]:{text}")
    return "; ".join(parts) or "0"


def format_localized(piece: LocalizedPiece, vector: Mat) -> str:
    K = piece.base.field.domain
    terms = []
    for label, c in zip(piece.labels, vector.column(0)):
        if c == 0:
            continue
        coeff = str(K.to_sympy(c))
        if coeff == "1":
            terms.append(label)
        elif coeff == "-1":
            terms.append(f"-{label}")
        else:
            terms.append(f"{coeff}*{label}")
    return " + ".join(terms).replace("+ -", "- ") or "0"
