"""
The scheme X = U u_W V obtained by gluing two copies of Spec R along an open
W = D(f_1) u ... u D(f_n), quasicoherent sheaves on it, and the checks built
on their sections: flat-sections defects, the flat-quotient obstruction,
non-affineness witnesses and exactness of section sequences.
"""
import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

from src.constants.report_models import (
    EXACT,
    LEFT_EXACT_NOT_RIGHT_EXACT,
    NO_OBSTRUCTION,
    NOT_EXACT,
    OBSTRUCTED,
    DefectReport,
    ExactnessReport,
    NonaffineWitness,
    ObstructionCertificate,
    degree_ranges,
)
from src.constants.scenario_models import CapPolicy
from .errors import BufferTooSmall, GluingMismatch, InputError
from .exact_linalg import (
    Mat,
    block_diagonal,
    coordinates,
    hstack_all,
    image_quotient,
    in_span,
    independent_columns,
    kernel_basis,
)
from .graded_modules import (
    DegreewiseModule,
    DirectSumModule,
    FPGradedModule,
    GradedModuleMap,
    KernelModule,
    PolyRing,
    TensorModule,
    free_rank_one,
    sequence_homology,
)
from .localization_cech import (
    OpenSubset,
    SectionElement,
    SectionsModule,
    cech_at_cap,
    common_sections,
    format_localized,
    h1_window,
    raise_cap,
    restrict_element,
    restriction_map,
    section_mult,
    sections_at_cap,
    sections_map,
)

logger = logging.getLogger(__name__)

Open = Literal["X", "U", "V", "W"]


@dataclass(frozen=True)
class DoubleGluedScheme:
    ring: PolyRing
    overlap: OpenSubset

    def __post_init__(self):
        if self.overlap.ring != self.ring:
            raise InputError("the overlap lives over another ring")

    def structure_module(self) -> FPGradedModule:
        return free_rank_one(self.ring)


class QcohSheafOnX:
    """
    A quasicoherent sheaf on X given by its modules over U and V.

    kind="identity": m_V carries the same presentation as m_U and the gluing
    over W is the identity in every localization.
    kind="direct_image": m_V = Gamma(W, m_U~), glued by the canonical identification;
    `flags` records how m_V was realized.
    """

    def __init__(self, scheme: DoubleGluedScheme, m_U: DegreewiseModule, m_V: DegreewiseModule,
                 kind: Literal["identity", "direct_image"], name: str = "", flags: Sequence[str] = ()):
        if kind not in ("identity", "direct_image"):
            raise InputError(f"unknown gluing kind '{kind}'")
        if kind == "direct_image" and not (isinstance(m_V, SectionsModule) and m_V.base is m_U):
            raise InputError("a direct image needs the sections of its U-module as V-module")
        self.scheme = scheme
        self.m_U = m_U
        self.m_V = m_V
        self.kind = kind
        self.name = name or m_U.name
        self.flags = list(flags)

    def __repr__(self) -> str:
        return f"<QcohSheafOnX {self.name} ({self.kind})>"


def direct_image_from_U(x: DoubleGluedScheme, n: DegreewiseModule, window: tuple[int, int],
                        caps: CapPolicy = CapPolicy(), name: str = "") -> QcohSheafOnX:
    """iota_{U,*}(n~): n on U, Gamma(W, n~) on V."""
    (sections,), flags = common_sections([n], x.overlap, window, caps)
    return QcohSheafOnX(x, n, sections, "direct_image", name or f"i_U*({n.name})", flags)


def direct_images(x: DoubleGluedScheme, modules: Sequence[DegreewiseModule], window: tuple[int, int],
                  caps: CapPolicy = CapPolicy(), names: Sequence[str] = ()) -> list[QcohSheafOnX]:
    """Several direct images whose V-modules share one cap, so maps between them can be induced."""
    names = list(names) or [f"i_U*({n.name})" for n in modules]
    sections, flags = common_sections(modules, x.overlap, window, caps)
    return [QcohSheafOnX(x, n, s, "direct_image", name, flags) for n, s, name in zip(modules, sections, names)]


def glue_identity(x: DoubleGluedScheme, m_U: DegreewiseModule, m_V: Optional[DegreewiseModule] = None,
                  name: str = "") -> QcohSheafOnX:
    return QcohSheafOnX(x, m_U, m_V if m_V is not None else m_U, "identity", name)


def structure_sheaf(x: DoubleGluedScheme) -> QcohSheafOnX:
    o = x.structure_module()
    return glue_identity(x, o, o, "O_X")


class SheafMap:
    """A map of sheaves on X, given on both patches."""

    def __init__(self, source: QcohSheafOnX, target: QcohSheafOnX, on_U: GradedModuleMap,
                 on_V: Optional[GradedModuleMap] = None, name: str = ""):
        if on_U.source is not source.m_U or on_U.target is not target.m_U:
            raise InputError(f"{on_U.name} does not connect the U-modules of {source.name} and {target.name}")
        if on_V is None:
            on_V = _induced_on_V(source, target, on_U)
        elif on_V.source is not source.m_V or on_V.target is not target.m_V:
            raise InputError(f"{on_V.name} does not connect the V-modules of {source.name} and {target.name}")
        self.source = source
        self.target = target
        self.on_U = on_U
        self.on_V = on_V
        self.name = name or on_U.name


def _induced_on_V(source: QcohSheafOnX, target: QcohSheafOnX, on_U: GradedModuleMap) -> GradedModuleMap:
    if source.m_V is source.m_U and target.m_V is target.m_U:
        return on_U
    if source.kind == "direct_image" and target.kind == "direct_image":
        if source.m_V.cap != target.m_V.cap:
            raise InputError(f"{source.name} and {target.name} are realized at different caps; "
                             "build them with direct_images")
        return sections_map(on_U, source.m_V, target.m_V)
    if source.kind == "identity" and target.kind == "identity":
        # same presentations on both patches: the U-matrices act on V-coordinates
        return GradedModuleMap(source.m_V, target.m_V, on_U.matrix, on_U.shift, f"{on_U.name}|V")
    raise InputError("maps between sheaves of different gluing kinds need an explicit V-component")


def _w_sections_identity(s: QcohSheafOnX, window: tuple[int, int],
                         caps: CapPolicy) -> tuple[SectionsModule, list[str]]:
    w = s.scheme.overlap
    (from_U,), flags = common_sections([s.m_U], w, window, caps)
    if s.m_V is s.m_U:
        return from_U, flags
    from_V = sections_at_cap(s.m_V, w, from_U.cap)
    lo, hi = window
    for d in range(lo, hi + 1):
        if from_U.piece(d).embed != from_V.piece(d).embed:
            raise GluingMismatch(f"{s.name}: sections over W from U and from V differ in degree {d}")
    return from_U, flags


def sheaf_sections_flagged(s: QcohSheafOnX, open_: Open, window: tuple[int, int],
                           caps: CapPolicy = CapPolicy()) -> tuple[DegreewiseModule, list[str]]:
    """sheaf_sections together with the flags of the realization over W, if one was needed."""
    if open_ == "U":
        return s.m_U, []
    if open_ == "V":
        return s.m_V, list(s.flags)
    if open_ == "W":
        if s.kind == "identity":
            return _w_sections_identity(s, window, caps)
        return s.m_V, list(s.flags)
    if open_ == "X":
        gw, flags = sheaf_sections_flagged(s, "W", window, caps)
        return global_sections(s, gw), flags
    raise InputError(f"unknown open '{open_}', expected X, U, V or W")


def sheaf_sections(s: QcohSheafOnX, open_: Open, window: tuple[int, int],
                   caps: CapPolicy = CapPolicy()) -> DegreewiseModule:
    return sheaf_sections_flagged(s, open_, window, caps)[0]


def _restriction_from_V(s: QcohSheafOnX, gw: SectionsModule) -> GradedModuleMap:
    if s.kind == "direct_image":
        if s.m_V is not gw:
            raise InputError("direct image V-sections must be the W-sections in use")
        return GradedModuleMap(gw, gw, lambda d: Mat.identity(gw.field, gw.dim(d)), name=f"id_{gw.name}")
    return GradedModuleMap(s.m_V, gw, restriction_map(s.m_U, gw).matrix, name=f"res_V_{s.name}")


def global_sections(s: QcohSheafOnX, gw: SectionsModule) -> KernelModule:
    """Gamma(X) as the equalizer of m_U (+) m_V -> Gamma(W): kernel of [res_U | -res_V]."""
    res_U = restriction_map(s.m_U, gw)
    res_V = _restriction_from_V(s, gw)
    pair = DirectSumModule([s.m_U, s.m_V], name=f"{s.name}(U)+{s.name}(V)")
    difference = GradedModuleMap(pair, gw, lambda d: res_U.matrix(d).hstack(-res_V.matrix(d)),
                                 name=f"eq_{s.name}")
    gx = KernelModule(difference)
    gx.name = f"G(X, {s.name})"
    return gx


def sequence_sections(maps: Sequence[SheafMap], open_: Open, window: tuple[int, int],
                      caps: CapPolicy = CapPolicy()) -> tuple[list[GradedModuleMap], list[str]]:
    """The section maps over one open of a chain of sheaf maps, over W and X at one common cap."""
    for first, second in zip(maps, maps[1:]):
        if first.target is not second.source:
            raise InputError(f"{second.name} does not start where {first.name} ends")
    if open_ == "U":
        return [f.on_U for f in maps], []
    sheaves = [maps[0].source] + [f.target for f in maps]
    if open_ == "V":
        flags = sorted({flag for s in sheaves for flag in s.flags})
        return [f.on_V for f in maps], flags
    for s in sheaves:
        if s.kind == "identity" and s.m_V is not s.m_U:
            _w_sections_identity(s, window, caps)
    w = sheaves[0].scheme.overlap
    gws, flags = common_sections([s.m_U for s in sheaves], w, window, caps)
    w_maps = [sections_map(f.on_U, a, b) for f, a, b in zip(maps, gws, gws[1:])]
    if open_ == "W":
        return w_maps, flags
    gxs = [_equalizer_at(s, gw) for s, gw in zip(sheaves, gws)]
    x_maps = []
    for f, a, b in zip(maps, gxs, gxs[1:]):
        on_V = f.on_V if f.source.kind == "identity" else w_maps[len(x_maps)]

        def matrix(d: int, f=f, a=a, b=b, on_V=on_V) -> Mat:
            both = block_diagonal(a.field, [f.on_U.matrix(d), on_V.matrix(d)])
            return b.piece(d).coords(both @ a.piece(d).embed)

        x_maps.append(GradedModuleMap(a, b, matrix, name=f"G(X, {f.name})"))
    return x_maps, flags


def _equalizer_at(s: QcohSheafOnX, gw: SectionsModule) -> KernelModule:
    if s.kind == "direct_image" and s.m_V is not gw:
        s = QcohSheafOnX(s.scheme, s.m_U, gw, "direct_image", s.name)
    return global_sections(s, gw)


def exactness_table(f: GradedModuleMap, g: GradedModuleMap, open_label: str, window: tuple[int, int],
                    flags: Sequence[str] = ()) -> ExactnessReport:
    lo, hi = window
    kernel, homology, cokernel = {}, {}, {}
    for d in range(lo, hi + 1):
        kernel[d], homology[d], cokernel[d] = sequence_homology(f, g, d)
    flags = list(flags)
    for label, table in (("injectivity", kernel), ("middle-exactness", homology), ("surjectivity", cokernel)):
        failing = [d for d, v in table.items() if v]
        flags += [f"{label}-fails:{r}" for r in degree_ranges(failing)]
    if any(kernel.values()) or any(homology.values()):
        verdict = NOT_EXACT
    elif any(cokernel.values()):
        verdict = LEFT_EXACT_NOT_RIGHT_EXACT
    else:
        verdict = EXACT
    return ExactnessReport(open=open_label, window=window, kernel=kernel, homology=homology,
                           cokernel=cokernel, verdict=verdict, flags=flags)


def sequence_report(maps: Sequence[SheafMap], open_: Open, window: tuple[int, int],
                    caps: CapPolicy = CapPolicy()) -> ExactnessReport:
    """Per-degree kernel, middle homology and cokernel of A -> B -> C on sections over an open."""
    if len(maps) != 2:
        raise InputError(f"a sequence report needs two composable maps, got {len(maps)}")
    (f, g), flags = sequence_sections(maps, open_, window, caps)
    report = exactness_table(f, g, open_, window, flags)
    logger.info(f"sequence {maps[0].name}, {maps[1].name} over {open_}: {report.verdict}")
    return report


def flat_sections_defect(f: FPGradedModule, w: OpenSubset, window: tuple[int, int],
                         caps: CapPolicy = CapPolicy()) -> DefectReport:
    """
    Compares (F (x) Gamma(W, O))_d with Gamma(W, F~)_d through the product map
    a (x) g -> a . res(g); defect = dim ker + dim coker.

    Args:
        f: A finitely presented graded module.
        w: The overlap.
        window: Degrees to report.
        caps: Cap escalation policy.

    Returns:
        DefectReport: Per-degree kernel, cokernel and defect. A free module of
        rank above one is the direct sum of its rank-one summands, and the
        product map splits along them, so its tables are the sums of theirs.
    """
    key = ("defect", w.key(), tuple(window), caps)
    cached = f.derived_cache.get(key)
    if cached is not None:
        return cached
    summands = _free_summands(f)
    if summands is not None:
        report = _sum_defects(f, [flat_sections_defect(s, w, window, caps) for s in summands])
    else:
        report = product_map_defect(f, w, window, caps)
    f.derived_cache[key] = report
    return report


def _free_summands(f: FPGradedModule) -> Optional[list[FPGradedModule]]:
    """The shared rank-one summands of a free module, unless f is already one of them."""
    if f.relations or not f.ngens:
        return None
    summands = [free_rank_one(f.ring, e) for e in f.generator_degrees]
    if len(summands) == 1 and summands[0] is f:
        return None
    return summands


def _sum_defects(f: FPGradedModule, parts: Sequence[DefectReport]) -> DefectReport:
    window = parts[0].window
    lo, hi = window
    flags = []
    for part in parts:
        flags += [flag for flag in part.flags if flag not in flags]

    def total(table: str) -> dict[int, int]:
        return {d: sum(getattr(part, table)[d] for part in parts) for d in range(lo, hi + 1)}

    return DefectReport(module=f.name, window=window, kernel=total("kernel"), cokernel=total("cokernel"),
                        defect=total("defect"), flags=flags)


def product_map_defect(f: FPGradedModule, w: OpenSubset, window: tuple[int, int],
                       caps: CapPolicy = CapPolicy()) -> DefectReport:
    """The defect computed directly from the product map, without splitting into summands."""
    lo, hi = window
    o = free_rank_one(f.ring)
    (go, gf), flags = common_sections([o, f], w, window, caps)
    cap = go.cap
    tensor = TensorModule(f, go)
    restricted = [restrict_element(f, w, f.generator(g), e) for g, e in enumerate(f.generator_degrees)]

    def image_of(g: int, d: int) -> Mat:
        e = f.generator_degrees[g]
        columns = [section_mult(w, a, restricted[g]).vector for a in go.basis_elements(d - e)]
        return hstack_all(f.field, cech_at_cap(f, w, cap).c0_dim(d), columns)

    kernel, cokernel, defect = {}, {}, {}
    for d in range(lo, hi + 1):
        product = tensor.ambient_map(d, image_of) if tensor.dim(d) else Mat.zeros(f.field, gf.complex.c0_dim(d), 0)
        r = product.rank()
        kernel[d] = tensor.dim(d) - r
        cokernel[d] = gf.dim(d) - r
        defect[d] = kernel[d] + cokernel[d]
    return DefectReport(module=f.name, window=window, kernel=kernel, cokernel=cokernel, defect=defect,
                        flags=flags)


def _span_generators(m: DegreewiseModule, window: tuple[int, int], buffer: Optional[int]) -> list[tuple[int, Mat]]:
    """(degree, element column) pairs whose O(W)-multiples span the image of m."""
    lo, hi = window
    if isinstance(m, FPGradedModule):
        if buffer is None:
            buffer = max((abs(e) for e in m.generator_degrees), default=0) + 2
        for e in m.generator_degrees:
            if e < lo - buffer or e > hi + buffer:
                raise BufferTooSmall(e, buffer)
        return [(e, m.generator(g)) for g, e in enumerate(m.generator_degrees)]
    if buffer is None:
        buffer = 2
    out = []
    for e in range(lo - buffer, hi + 1):
        eye = Mat.identity(m.field, m.dim(e))
        out += [(e, eye.select_columns([k])) for k in range(eye.cols)]
    return out


def _multiplied_span(w: OpenSubset, go: SectionsModule, generators: list[tuple[int, Mat]],
                     m: DegreewiseModule, d: int) -> Mat:
    """Columns a . res(g) in C0 of m at cap go.cap, for a in Gamma(W, O)_{d - deg g}."""
    columns = []
    for e, vec in generators:
        res = restrict_element(m, w, vec, e)
        columns += [section_mult(w, a, res).vector for a in go.basis_elements(d - e)]
    return hstack_all(m.field, cech_at_cap(m, w, go.cap).c0_dim(d), columns)


def _raised(sections: SectionsModule, cap: int, d: int) -> Mat:
    """The basis of sections.piece(d), moved to C0 at a larger cap."""
    return hstack_all(sections.field, cech_at_cap(sections.base, sections.open, cap).c0_dim(d),
                      [raise_cap(s, cap).vector for s in sections.basis_elements(d)])


def _excess(big: Mat, small: Mat) -> int:
    """dim(span big + span small) - dim span big."""
    return big.hstack(small).rank() - big.rank()


def flat_quotient_obstruction(s: QcohSheafOnX, window: tuple[int, int], caps: CapPolicy = CapPolicy(),
                              buffer: Optional[int] = None) -> ObstructionCertificate:
    """
    A flat sheaf F has F(W) = F(U) (x) O(W) = F(V) (x) O(W), so for any quotient
    F -> M the O(W)-spans of the images of M(U) and M(V) in M(W) coincide.
    Reports per degree how far each span falls short of the other.
    """
    x = s.scheme
    w = x.overlap
    lo, hi = window
    o = x.structure_module()
    (go, gm), realized = common_sections([o, s.m_U], w, window, caps)
    cap, step = go.cap, caps.step
    go_wide = sections_at_cap(o, w, cap + step)
    gm_wide = sections_at_cap(s.m_U, w, cap + step)
    u_generators = _span_generators(s.m_U, window, buffer)
    v_generators = None if s.kind == "direct_image" else _span_generators(s.m_V, window, buffer)
    codim, codim_V, sections = {}, {}, {}
    flags = list(realized)
    unstable = []
    for d in range(lo, hi + 1):
        sections[d] = gm.dim(d)
        if gm_wide.dim(d) != gm.dim(d):
            unstable.append(d)
        u_wide = _multiplied_span(w, go_wide, u_generators, s.m_U, d)
        u_narrow = _raise_columns(s.m_U, w, _multiplied_span(w, go, u_generators, s.m_U, d), cap, cap + step, d)
        if v_generators is None:
            v_narrow = _raised(gm, cap + step, d)
            v_wide = gm_wide.piece(d).embed
        else:
            v_wide = _multiplied_span(w, go_wide, v_generators, s.m_V, d)
            v_narrow = _raise_columns(s.m_V, w, _multiplied_span(w, go, v_generators, s.m_V, d), cap, cap + step, d)
        codim[d] = _excess(u_wide, v_narrow)
        codim_V[d] = _excess(v_wide, u_narrow)
    bad = [d for d in range(lo, hi + 1) if codim[d] or codim_V[d]]
    flags += [f"obstructed-at:{r}" for r in degree_ranges(bad)]
    flags += [f"cap-unstable:{r}" for r in degree_ranges(unstable)]
    verdict = OBSTRUCTED if bad else NO_OBSTRUCTION
    logger.info(f"obstruction for {s.name} over {w.label()}: {verdict}")
    return ObstructionCertificate(window=window, sections=sections, codim=codim, codim_V=codim_V,
                                  verdict=verdict, flags=flags)


def _raise_columns(m: DegreewiseModule, w: OpenSubset, columns: Mat, cap: int, new_cap: int, d: int) -> Mat:
    raised = [raise_cap(SectionElement(m, w, d, cap, columns.select_columns([k])), new_cap).vector
              for k in range(columns.cols)]
    return hstack_all(m.field, cech_at_cap(m, w, new_cap).c0_dim(d), raised)


def witness_nonaffine(w: OpenSubset, window: tuple[int, int], module: Optional[DegreewiseModule] = None,
                      caps: CapPolicy = CapPolicy()) -> Optional[NonaffineWitness]:
    """
    A nonzero class in H^1(W, M~) with an explicit Cech representative, scanning
    degrees downward from the top of the window. None proves nothing.
    """
    if len(w) == 1:
        return None
    m = module if module is not None else free_rank_one(w.ring)
    table = h1_window(m, w, window, caps)
    cx = cech_at_cap(m, w, table.cap)
    lo, hi = window
    for d in range(hi, lo - 1, -1):
        if not table.dims[d]:
            continue
        cocycles = kernel_basis(cx.d1(d))
        boundaries = independent_columns(cx.d0(d))
        coset, _ = image_quotient(coordinates(cocycles, boundaries), cocycles.cols)
        representative = cocycles @ coset.select_columns([0])
        verified = not in_span(cx.d0(d), representative)
        text = _cochain_label(cx, representative, d)
        logger.info(f"H1 witness for {m.name} over {w.label()} in degree {d}: {text}")
        return NonaffineWitness(degree=d, representative=text, verified=verified, h1=table.dims,
                                flags=table.flags + [f"representative:{text}"])
    return None


def _cochain_label(cx, vector: Mat, d: int) -> str:
    parts, offset = [], 0
    for idx in cx.pairs:
        piece = cx.component(idx, d)
        block = vector.select_rows(range(offset, offset + piece.dim))
        offset += piece.dim
        text = format_localized(piece, block)
        if text != "0":
            parts.append(text if len(cx.pairs) == 1 else f"[{idx[0]}{idx[1]}]:{text}")
    return "; ".join(parts) or "0"


def overlap_status(w: OpenSubset, window: tuple[int, int], caps: CapPolicy = CapPolicy()) -> str:
    """Semi-decision for the overlap: affine-certified, non-affine-certified or unknown."""
    if len(w) == 1:
        return "affine-certified"
    if witness_nonaffine(w, window, None, caps) is not None:
        return "non-affine-certified"
    return "unknown"
