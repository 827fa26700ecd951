"""
Graded Matlis duality: M* = Hom(M, E) with E the graded injective hull of
the residue field, realized as the degreewise vector-space dual with
transposed variable actions, and the sheaf-level functor
M+ = iota_{U,*}((M(U)*)~).
"""
import logging
from typing import Optional, Sequence

from src.constants.report_models import BidualReport
from src.constants.scenario_models import CapPolicy
from .errors import InputError
from .exact_linalg import Mat
from .glued_scheme import (
    DoubleGluedScheme,
    QcohSheafOnX,
    SheafMap,
    direct_images,
    exactness_table,
    sequence_report,
)
from .graded_modules import DegreewiseModule, FPGradedModule, GradedModuleMap, GradedPiece, PolyRing

logger = logging.getLogger(__name__)


class DualizedModule(DegreewiseModule):
    """(M*)_d = (M_{-d})*; x_i acts by the transpose of x_i on M_{-d-1}."""

    def __init__(self, base: DegreewiseModule, name: str = ""):
        lower = -base.upper_bound if base.upper_bound is not None else None
        upper = -base.lower_bound if base.lower_bound is not None else None
        super().__init__(base.ring, name or f"{base.name}*", lower, upper)
        self.base = base

    def _build_piece(self, d: int) -> GradedPiece:
        src = self.base.piece(-d)
        return GradedPiece.standard(self.field, d, src.dim, [f"({label})*" for label in src.labels])

    def _build_act(self, i: int, d: int) -> Mat:
        return self.base.act(i, -d - 1).transpose()


class InjectiveHull(DualizedModule):
    """E = R*: E_d is dual to R_{-d}, zero for d > 0."""

    def __init__(self, ring: PolyRing):
        super().__init__(FPGradedModule.free(ring, (0,), "R"), "E")


def matlis_dual(m: DegreewiseModule) -> DualizedModule:
    return DualizedModule(m)


def matlis_dual_map(f: GradedModuleMap, source_dual: Optional[DualizedModule] = None,
                    target_dual: Optional[DualizedModule] = None) -> GradedModuleMap:
    """f: A -> B gives f*: B* -> A* with matrix(d) = f.matrix(-d) transposed."""
    if f.shift:
        raise InputError("only degree-preserving maps are dualized")
    a_dual = source_dual if source_dual is not None else matlis_dual(f.source)
    b_dual = target_dual if target_dual is not None else matlis_dual(f.target)
    if a_dual.base is not f.source or b_dual.base is not f.target:
        raise InputError(f"duals do not match the ends of {f.name}")
    return GradedModuleMap(b_dual, a_dual, lambda d: f.matrix(-d).transpose(), name=f"{f.name}*")


def plus_functor(s: QcohSheafOnX, window: tuple[int, int], caps: CapPolicy = CapPolicy()) -> QcohSheafOnX:
    """M+ = iota_{U,*}((M(U)*)~)."""
    return plus_sheaves([s], window, caps)[0]


def plus_sheaves(sheaves: Sequence[QcohSheafOnX], window: tuple[int, int],
                 caps: CapPolicy = CapPolicy()) -> list[QcohSheafOnX]:
    """The plus functor on several sheaves at once; V-sections share one cap."""
    if not sheaves:
        return []
    x: DoubleGluedScheme = sheaves[0].scheme
    duals = [matlis_dual(s.m_U) for s in sheaves]
    return direct_images(x, duals, window, caps, [f"{s.name}+" for s in sheaves])


def plus_map(phi: SheafMap, source_plus: QcohSheafOnX, target_plus: QcohSheafOnX) -> SheafMap:
    """phi: M -> N gives phi+: N+ -> M+, dual on U and induced on V."""
    if target_plus.m_U.base is not phi.target.m_U or source_plus.m_U.base is not phi.source.m_U:
        raise InputError(f"plus sheaves do not match the ends of {phi.name}")
    on_U = matlis_dual_map(phi.on_U, source_plus.m_U, target_plus.m_U)
    return SheafMap(target_plus, source_plus, on_U, name=f"{phi.name}+")


def bidual_pipeline(maps: Sequence[SheafMap], window: tuple[int, int],
                    caps: CapPolicy = CapPolicy()) -> BidualReport:
    """
    For A -f-> B -g-> C: the sequence C+ -> B+ -> A+ over U, and
    A++ -> B++ -> C++ over V.
    """
    if len(maps) != 2:
        raise InputError(f"the bidual pipeline needs two composable maps, got {len(maps)}")
    f, g = maps
    if f.target is not g.source:
        raise InputError(f"{g.name} does not start where {f.name} ends")
    a, b, c = f.source, f.target, g.target
    a_plus, b_plus, c_plus = plus_sheaves([a, b, c], window, caps)
    f_plus, g_plus = plus_map(f, a_plus, b_plus), plus_map(g, b_plus, c_plus)
    plus_report = exactness_table(g_plus.on_U, f_plus.on_U, "U", window)

    a_pp, b_pp, c_pp = plus_sheaves([a_plus, b_plus, c_plus], window, caps)
    f_pp, g_pp = plus_map(f_plus, b_pp, a_pp), plus_map(g_plus, c_pp, b_pp)
    plusplus_report = sequence_report([f_pp, g_pp], "V", window, caps)
    logger.info(f"bidual pipeline for {f.name}, {g.name}: U+ {plus_report.verdict}, "
                f"V++ {plusplus_report.verdict}")
    return BidualReport(plus_over_U=plus_report, plusplus_over_V=plusplus_report,
                        verdict=plusplus_report.verdict, flags=list(plusplus_report.flags))
