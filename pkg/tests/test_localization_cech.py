import pytest

from src.constants import CapPolicy, FieldSpec
from src.modules.errors import CapExhausted, InputError
from src.modules.exact_linalg import Mat
from src.modules.graded_modules import FPGradedModule, PolyRing, map_from_poly_images
from src.modules.localization_cech import (
    CERTIFIED,
    HEURISTIC,
    OpenSubset,
    SectionElement,
    cech_at_cap,
    cech_complex,
    common_sections,
    h1_window,
    localize_piece,
    raise_cap,
    restrict_element,
    restriction_to_sections,
    section_label,
    section_mult,
    sections_at_cap,
    sections_map,
    sections_window,
)

WINDOW = (-4, 2)


def test_localized_piece_of_r_at_x(R, x):
    loc = localize_piece(R, x, 0, 3)
    assert loc.dim == 4
    assert loc.labels == ("1", "x^-1*y", "x^-2*y^2", "x^-3*y^3")
    assert loc.status == CERTIFIED


def test_localization_kills_torsion(C, x, y):
    for d in range(-3, 3):
        assert localize_piece(C, y, d, 4).dim == 0
        assert localize_piece(C, x, d, 3).dim == 1
    assert localize_piece(C, x, -3, 3).labels == ("x^-3",)


def test_non_monomial_denominator_is_heuristic(R, x, y):
    loc = localize_piece(R, x + y, 0, 2)
    assert loc.dim == 3
    assert loc.status == HEURISTIC


def test_negative_cap_rejected(R, x):
    with pytest.raises(InputError):
        localize_piece(R, x, 0, -1)


def test_zero_denominator_rejected(ring):
    with pytest.raises(InputError):
        OpenSubset(ring, (ring.zero(1),))


def test_single_open_cover_complex(R, affine):
    cx = cech_complex(R, affine, (-2, 2), caps=3)
    assert all(v == 0 for v in cx.c1_dims.values())
    assert cx.h0_dims == {d: localize_piece(R, affine.denominators[0], d, 3).dim for d in range(-2, 3)}


def test_cech_dims_of_punctured_plane(R, punctured):
    cx = cech_complex(R, punctured, (-2, 2), caps=4)
    for d in range(-2, 3):
        assert cx.c0_dims[d] == 2 * (d + 5)
        assert cx.c1_dims[d] == d + 9
        assert cx.h0_dims[d] == R.dim(d)
    assert cx.differentials_compose_to_zero


def test_zero_module_gives_zero_complex(ring, punctured):
    zero = FPGradedModule(ring, ())
    cx = cech_complex(zero, punctured, (-1, 1), caps=2)
    assert set(cx.c0_dims.values()) == {0}
    assert set(cx.h1_dims.values()) == {0}


def test_d1_d0_vanishes_on_three_element_covers(R, I, ring, x, y):
    w = OpenSubset(ring, (x, y, x + y))
    for m in (R, I):
        cx = cech_at_cap(m, w, 3)
        for d in range(-2, 3):
            assert cx.check_d1d0(d)


def test_sections_of_structure_sheaf(R, punctured):
    (gw,), flags = common_sections([R], punctured, WINDOW)
    assert gw.dims(*WINDOW) == {d: (d + 1 if d >= 0 else 0) for d in range(WINDOW[0], WINDOW[1] + 1)}
    assert any(flag.startswith("cap-stabilized:") for flag in flags)
    assert not hasattr(gw, "flags")


def test_sections_of_ideal_and_of_k_x(I, C, punctured):
    assert sections_window(I, punctured, WINDOW).dims(*WINDOW) == {d: max(d + 1, 0) for d in range(-4, 3)}
    assert set(sections_window(C, punctured, WINDOW).dims(*WINDOW).values()) == {1}


def test_h1_of_punctured_plane(R, C, punctured):
    table = h1_window(R, punctured, WINDOW)
    assert table.dims == {-4: 3, -3: 2, -2: 1, -1: 0, 0: 0, 1: 0, 2: 0}
    assert set(h1_window(C, punctured, WINDOW).dims.values()) == {0}


def test_h1_over_single_open_vanishes(R, affine):
    table = h1_window(R, affine, WINDOW)
    assert set(table.dims.values()) == {0}
    assert "single-open-cover" in table.flags


def test_cohomology_is_additive(ring, y, punctured):
    r = FPGradedModule.free(ring, (0,))
    c = FPGradedModule(ring, (0,), [[y]])
    both = FPGradedModule(ring, (0, 0), [[None, y]])
    window = (-3, 1)
    h1 = {m: h1_window(m, punctured, window).dims for m in (r, c, both)}
    h0 = {m: sections_window(m, punctured, window).dims(*window) for m in (r, c, both)}
    for d in range(-3, 2):
        assert h1[both][d] == h1[r][d] + h1[c][d]
        assert h0[both][d] == h0[r][d] + h0[c][d]


def test_cap_exhaustion_on_two_open_cover(R, punctured):
    with pytest.raises(CapExhausted) as err:
        sections_window(R, punctured, (-1, 1), CapPolicy(start=2, escalations=1))
    assert err.value.max_cap == 4


def test_single_open_cover_truncates(R, affine):
    (gw,), flags = common_sections([R], affine, (0, 1), CapPolicy(start=2, step=2, escalations=2))
    assert gw.cap == 6
    assert "truncated-localization:6" in flags


def test_heuristic_flag_for_non_monomial_cover(ring, x, y):
    w = OpenSubset(ring, (x, x + y))
    _, flags = common_sections([FPGradedModule.free(ring)], w, (-1, 1), CapPolicy(start=3, step=1, escalations=4))
    assert "localization:heuristic" in flags


def test_repeated_realizations_share_modules_not_flags(R, punctured):
    (first,), flags = common_sections([R], punctured, (-1, 1))
    flags.append("seen-by-another-check")
    (second,), again = common_sections([R], punctured, (-1, 1))
    assert second is first
    assert again is not flags
    assert "seen-by-another-check" not in again


def test_restriction_to_sections(R, K, I, punctured):
    res = restriction_to_sections(R, punctured, WINDOW)
    for d in range(0, 3):
        assert res.matrix(d).rank() == R.dim(d) == res.target.dim(d)
    res_k = restriction_to_sections(K, punctured, WINDOW)
    assert res_k.matrix(0).is_zero()
    res_i = restriction_to_sections(I, punctured, WINDOW)
    assert res_i.target.dim(0) == 1
    assert res_i.matrix(0).rank() == 0
    assert res_i.matrix(1).rank() == 2


def test_restricted_elements_are_sections(I, punctured):
    for d in range(1, 3):
        for k in range(I.dim(d)):
            s = restrict_element(I, punctured, Mat.unit_column(I.field, I.dim(d), k), d, cap=2)
            assert s.is_section()


def test_raise_cap_preserves_sections(R, punctured):
    gw = sections_at_cap(R, punctured, 3)
    for s in gw.basis_elements(1):
        raised = raise_cap(s, 5)
        assert raised.cap == 5
        assert raised.is_section()
    with pytest.raises(InputError):
        raise_cap(gw.basis_elements(1)[0], 2)


def test_section_mult_unit(R, I, punctured):
    one = restrict_element(R, punctured, R.generator(0), 0)
    gw = sections_at_cap(I, punctured, 4)
    for s in gw.basis_elements(0):
        assert section_mult(punctured, one, s).vector == s.vector


def test_section_mult_matches_module_action(R, I, punctured, x):
    a = restrict_element(R, punctured, R.element([x], 1), 1)
    gen = I.generator(1)
    s = restrict_element(I, punctured, gen, 1)
    product = section_mult(punctured, a, s)
    expected = restrict_element(I, punctured, I.act("x", 1) @ gen, 2)
    assert product.vector == expected.vector


def test_section_mult_is_bilinear(R, C, punctured):
    go = sections_at_cap(R, punctured, 2)
    gc = sections_at_cap(C, punctured, 2)
    a1, a2 = go.basis_elements(1)
    s = gc.basis_elements(-1)[0]
    total = SectionElement(R, punctured, 1, 2, a1.vector + a2.vector)
    lhs = section_mult(punctured, total, s).vector
    rhs = section_mult(punctured, a1, s).vector + section_mult(punctured, a2, s).vector
    assert lhs == rhs


def test_section_mult_needs_structure_sections(C, punctured):
    gc = sections_at_cap(C, punctured, 2)
    s = gc.basis_elements(0)[0]
    with pytest.raises(InputError):
        section_mult(punctured, s, s)


def test_sections_map_preserves_exactness_over_affine_open(A, R, y, affine):
    f = map_from_poly_images(A, R, [[y]])
    (ga, gr), _ = common_sections([A, R], affine, (-2, 2), CapPolicy(start=3, escalations=0))
    g = sections_map(f, ga, gr)
    for d in range(-2, 3):
        assert g.matrix(d).rank() == ga.dim(d)


def test_section_label_of_laurent_monomial(R, punctured):
    gw = sections_at_cap(R, punctured, 3)
    s = gw.basis_elements(0)[0]
    assert section_label(s) != "0"


def test_localization_in_three_variables():
    ring = PolyRing(FieldSpec(), ["x", "y", "z"])
    r = FPGradedModule.free(ring)
    w = OpenSubset(ring, tuple(ring.var(v) for v in ("x", "y", "z")))
    cx = cech_at_cap(r, w, 2)
    assert cx.c2_dim(0) > 0
    for d in range(-1, 2):
        assert cx.check_d1d0(d)