import random

import pytest

from src.constants import CapPolicy
from src.modules.errors import GluingMismatch, InputError
from src.modules.glued_scheme import (
    DoubleGluedScheme,
    SheafMap,
    direct_image_from_U,
    direct_images,
    flat_quotient_obstruction,
    flat_sections_defect,
    glue_identity,
    overlap_status,
    product_map_defect,
    sequence_report,
    sheaf_sections,
    structure_sheaf,
    witness_nonaffine,
)
from src.modules.graded_modules import FPGradedModule, free_rank_one, map_from_poly_images, zero_map
from src.modules.localization_cech import sections_window

WINDOW = (-3, 2)
FREE_CAPS = CapPolicy(start=4, step=1, escalations=3)


def _r_dims(lo, hi):
    return {d: max(d + 1, 0) for d in range(lo, hi + 1)}


def test_direct_image_of_ideal(double_origin, I):
    sheaf = direct_image_from_U(double_origin, I, WINDOW)
    assert sheaf.kind == "direct_image"
    assert sheaf_sections(sheaf, "U", WINDOW).dims(*WINDOW) == I.dims(*WINDOW)
    assert sheaf_sections(sheaf, "V", WINDOW).dims(*WINDOW) == _r_dims(*WINDOW)
    assert sheaf_sections(sheaf, "W", WINDOW).dims(*WINDOW) == _r_dims(*WINDOW)


def test_direct_image_of_r_and_of_skyscraper(double_origin, R, K):
    r_sheaf = direct_image_from_U(double_origin, R, WINDOW)
    assert sheaf_sections(r_sheaf, "V", WINDOW).dims(*WINDOW) == R.dims(*WINDOW)
    k_sheaf = direct_image_from_U(double_origin, K, WINDOW)
    assert set(sheaf_sections(k_sheaf, "V", WINDOW).dims(*WINDOW).values()) == {0}


def test_global_sections_of_structure_sheaf(double_origin):
    gx = sheaf_sections(structure_sheaf(double_origin), "X", WINDOW)
    assert gx.dims(*WINDOW) == _r_dims(*WINDOW)


def test_global_sections_of_direct_image(double_origin, I):
    sheaf = direct_image_from_U(double_origin, I, WINDOW)
    # sections over X of a direct image are the sections over U
    assert sheaf_sections(sheaf, "X", WINDOW).dims(*WINDOW) == I.dims(*WINDOW)


def test_v_sections_of_direct_image_are_w_sections(double_origin, C):
    sheaf = direct_image_from_U(double_origin, C, WINDOW)
    expected = sections_window(C, double_origin.overlap, WINDOW).dims(*WINDOW)
    assert sheaf_sections(sheaf, "V", WINDOW).dims(*WINDOW) == expected


def test_identity_gluing_agrees_from_both_sides(double_origin, ring, y):
    m_U = FPGradedModule(ring, (0,), [[y]], "C")
    m_V = FPGradedModule(ring, (0,), [[y]], "C'")
    sheaf = glue_identity(double_origin, m_U, m_V)
    assert set(sheaf_sections(sheaf, "W", WINDOW).dims(*WINDOW).values()) == {1}


def test_identity_gluing_mismatch(double_origin, R, A):
    sheaf = glue_identity(double_origin, R, A)
    with pytest.raises(GluingMismatch):
        sheaf_sections(sheaf, "W", WINDOW)


def test_unknown_open_rejected(double_origin):
    with pytest.raises(InputError):
        sheaf_sections(structure_sheaf(double_origin), "Z", WINDOW)


def test_free_modules_have_no_defect(ring, punctured):
    cases = [(r, a) for r in range(1, 5) for a in range(-3, 4)]
    rng = random.Random(2021)
    mixed = [tuple(rng.randint(-3, 3) for _ in range(rng.randint(1, 4))) for _ in range(20)]
    modules = [FPGradedModule.free(ring, (a,) * r, f"R({-a})^{r}") for r, a in cases]
    modules += [FPGradedModule.free(ring, shifts, f"F{shifts}") for shifts in mixed]
    assert len(modules) == 48
    for f in modules:
        report = flat_sections_defect(f, punctured, (-2, 2), FREE_CAPS)
        assert report.is_zero, f.name


def test_residue_field_defect(K, punctured):
    report = flat_sections_defect(K, punctured, WINDOW, FREE_CAPS)
    assert report.defect == {-3: 0, -2: 0, -1: 0, 0: 1, 1: 0, 2: 0}
    assert report.kernel[0] == 1


def test_ideal_defect(I, punctured):
    report = flat_sections_defect(I, punctured, WINDOW, FREE_CAPS)
    assert report.cokernel[0] == 1
    assert report.kernel[0] == 0
    assert all(report.defect[d] == 0 for d in (1, 2))


def test_defect_is_additive(ring, x, y, punctured):
    r = FPGradedModule.free(ring, (0,), "R")
    k = FPGradedModule(ring, (0,), [[x], [y]], "K")
    both = FPGradedModule(ring, (0, 0), [[None, x], [None, y]], "R+K")
    defects = [flat_sections_defect(m, punctured, WINDOW, FREE_CAPS).defect for m in (r, k, both)]
    for d in range(WINDOW[0], WINDOW[1] + 1):
        assert defects[2][d] == defects[0][d] + defects[1][d]


def test_obstruction_for_pushed_forward_ideal(double_origin, I):
    sheaf = direct_image_from_U(double_origin, I, WINDOW)
    cert = flat_quotient_obstruction(sheaf, WINDOW)
    assert cert.verdict == "obstructed"
    assert cert.codim[0] == 1
    assert all(cert.codim[d] == 0 for d in range(1, WINDOW[1] + 1))
    assert "obstructed-at:0" in cert.flags


def test_no_obstruction_for_structure_sheaf(double_origin):
    cert = flat_quotient_obstruction(structure_sheaf(double_origin), WINDOW)
    assert cert.verdict == "no-obstruction-in-window"
    assert not cert.obstructed_degrees


def test_no_obstruction_over_affine_overlap(ring, affine):
    scheme = DoubleGluedScheme(ring, affine)
    ideal = FPGradedModule.free(ring, (1,), "(x)")
    sheaf = direct_image_from_U(scheme, ideal, (-2, 2))
    cert = flat_quotient_obstruction(sheaf, (-2, 2))
    assert cert.verdict == "no-obstruction-in-window"


def test_witness_on_punctured_plane(punctured):
    witness = witness_nonaffine(punctured, (-4, 2))
    assert witness is not None
    assert witness.degree == -2
    assert witness.representative == "x^-1*y^-1"
    assert witness.verified
    assert "representative:x^-1*y^-1" in witness.flags


def test_no_witness_over_affine_or_for_k_x(affine, punctured, C):
    assert witness_nonaffine(affine, (-4, 2)) is None
    assert witness_nonaffine(punctured, (-4, 2), C) is None


def test_overlap_status(affine, punctured):
    assert overlap_status(affine, (-3, 1)) == "affine-certified"
    assert overlap_status(punctured, (-3, 1)) == "non-affine-certified"


def _ses(double_origin, A, R, C, y, ring):
    a, o, c = (glue_identity(double_origin, m) for m in (A, R, C))
    f = SheafMap(a, o, map_from_poly_images(A, R, [[y]], "y"))
    g = SheafMap(o, c, map_from_poly_images(R, C, [[ring.one()]], "q"))
    return [f, g]


def test_short_exact_sequence_over_w(double_origin, A, R, C, y, ring):
    report = sequence_report(_ses(double_origin, A, R, C, y, ring), "W", WINDOW)
    assert set(report.kernel.values()) == {0}
    assert set(report.homology.values()) == {0}
    assert report.cokernel == {-3: 1, -2: 1, -1: 1, 0: 0, 1: 0, 2: 0}
    assert report.verdict == "left-exact-not-right-exact"
    assert "surjectivity-fails:-3..-1" in report.flags


@pytest.mark.parametrize("open_", ["U", "V", "X"])
def test_short_exact_sequence_on_affine_patches_and_globally(double_origin, A, R, C, y, ring, open_):
    report = sequence_report(_ses(double_origin, A, R, C, y, ring), open_, WINDOW)
    assert report.verdict == "exact"


def test_direct_image_sequence_over_v(double_origin, A, R, C, y, ring):
    a, o, c = direct_images(double_origin, [A, R, C], WINDOW, names=["A", "O", "C"])
    f = SheafMap(a, o, map_from_poly_images(A, R, [[y]], "y"))
    g = SheafMap(o, c, map_from_poly_images(R, C, [[ring.one()]], "q"))
    report = sequence_report([f, g], "V", WINDOW)
    assert report.verdict == "left-exact-not-right-exact"


def test_zero_sequence_is_exact(double_origin, ring):
    zero = FPGradedModule(ring, (), name="0")
    s = glue_identity(double_origin, zero)
    maps = [SheafMap(s, s, zero_map(zero, zero)), SheafMap(s, s, zero_map(zero, zero))]
    assert sequence_report(maps, "W", WINDOW).verdict == "exact"


def test_mixed_gluing_kinds_need_explicit_v_map(double_origin, A, R, y):
    a = glue_identity(double_origin, A)
    o = direct_image_from_U(double_origin, R, WINDOW)
    with pytest.raises(InputError):
        SheafMap(a, o, map_from_poly_images(A, R, [[y]]))


def test_split_free_defect_matches_product_map(ring, punctured):
    f = FPGradedModule.free(ring, (1, -2), "R(-1)+R(2)")
    split = flat_sections_defect(f, punctured, WINDOW, FREE_CAPS)
    direct = product_map_defect(f, punctured, WINDOW, FREE_CAPS)
    assert split.kernel == direct.kernel
    assert split.cokernel == direct.cokernel
    assert split.is_zero


def test_defect_report_is_cached_per_window(K, punctured):
    first = flat_sections_defect(K, punctured, WINDOW, FREE_CAPS)
    assert flat_sections_defect(K, punctured, WINDOW, FREE_CAPS) is first
    assert flat_sections_defect(K, punctured, (-1, 1), FREE_CAPS) is not first


def test_structure_module_is_shared(ring, double_origin):
    assert double_origin.structure_module() is free_rank_one(ring)
    assert free_rank_one(ring, 2) is free_rank_one(ring, 2)
    assert free_rank_one(ring, 2) is not free_rank_one(ring)
