from math import comb

import pytest

from src.constants import FieldSpec
from src.modules.errors import InputError, NonHomogeneous, RelationNotKilled, UnknownName
from src.modules.exact_linalg import Mat
from src.modules.graded_modules import (
    FPGradedModule,
    GradedModuleMap,
    HomModule,
    PolyRing,
    TensorModule,
    act_matrix,
    check_commuting,
    cokernel_dw,
    hom_piece,
    identity_map,
    image_dw,
    kernel_dw,
    map_from_gen_images,
    map_from_poly_images,
    realize_piece,
    sequence_homology,
    tensor_piece,
    zero_map,
)


def test_hilbert_function_of_polynomial_rings():
    for n in (1, 2, 3):
        ring = PolyRing(FieldSpec(), [f"t{i}" for i in range(n)])
        r = FPGradedModule.free(ring)
        for d in range(-2, 5):
            expected = comb(d + n - 1, n - 1) if d >= 0 else 0
            assert realize_piece(r, d).dim == expected


def test_monomials_in_graded_lex_order(ring):
    assert ring.monomials(2) == ((2, 0), (1, 1), (0, 2))
    assert realize_piece(FPGradedModule.free(ring), 2).labels == ("x^2", "x*y", "y^2")


def test_realized_pieces(I, C):
    assert I.dim(0) == 0
    assert I.dim(1) == 2
    assert I.dim(2) == 3
    assert C.dim(5) == 1
    assert C.piece(5).labels == ("x^5",)


def test_variable_actions(R, C, I):
    a = act_matrix(R, "x", 0)
    assert a.shape == (2, 1) and a.rank() == 1
    for d in range(4):
        assert act_matrix(C, "y", d).is_zero()
    assert act_matrix(I, "x", 1).rank() == 2


def test_actions_commute(R, C, I, K):
    for m in (R, C, I, K):
        assert check_commuting(m, -1, 4)


def test_multiplication_by_y_is_injective(A, R, y):
    f = map_from_poly_images(A, R, [[y]], "y")
    for d in range(-1, 5):
        assert f.matrix(d).rank() == A.dim(d)
    assert f.check_natural(-1, 4)


def test_map_to_residue_field(R, K, ring):
    f = map_from_poly_images(R, K, [[ring.one()]])
    assert f.matrix(0).rank() == 1
    for d in range(1, 4):
        assert f.matrix(d).is_zero()


def test_relation_must_be_killed(C, R, ring):
    with pytest.raises(RelationNotKilled):
        map_from_poly_images(C, R, [[ring.one()]])


def test_cokernel_of_y_is_k_x(A, R, y):
    coker = cokernel_dw(map_from_poly_images(A, R, [[y]]))
    assert coker.dims(-3, 4) == {-3: 0, -2: 0, -1: 0, 0: 1, 1: 1, 2: 1, 3: 1, 4: 1}
    assert check_commuting(coker, 0, 4)


def test_trivial_kernels_and_images(I, R):
    assert all(v == 0 for v in kernel_dw(identity_map(I)).dims(-1, 4).values())
    assert all(v == 0 for v in image_dw(zero_map(I, R)).dims(-1, 4).values())


def test_short_exact_dims_add_up(A, R, y, ring):
    f = map_from_poly_images(A, R, [[y]])
    coker = cokernel_dw(f)
    for d in range(-2, 5):
        assert R.dim(d) == A.dim(d) + coker.dim(d)
        assert sequence_homology(f, coker.projection, d) == (0, 0, 0)


def test_hom_pieces(R, K, I, C):
    for d in range(-1, 4):
        assert hom_piece(R, C, d).dim == C.dim(d)
        assert hom_piece(K, R, d).dim == 0
    assert hom_piece(I, R, 0).dim == 1
    assert check_commuting(HomModule(I, R), 0, 3)


def test_hom_from_shifted_free(ring, I):
    for a in range(-3, 4):
        free = FPGradedModule.free(ring, (a,))
        for d in range(-3, 3):
            assert hom_piece(free, I, d).dim == I.dim(d + a)


def test_tensor_pieces(R, K, I, C):
    for d in range(-1, 4):
        assert tensor_piece(R, C, d).dim == C.dim(d)
    assert tensor_piece(K, R, 0).dim == 1
    assert tensor_piece(K, R, 1).dim == 0
    assert [tensor_piece(I, R, d).dim for d in range(4)] == [0, 2, 3, 4]
    assert check_commuting(TensorModule(I, R), 0, 3)


def test_parse_and_print(ring):
    p = ring.parse("x^2*y - 3*y^3")
    assert p.degree == 3
    assert str(p) == "x^2*y - 3*y^3"
    assert ring.parse_entry("0") is None
    assert ring.parse("0", degree=2).is_zero()


def test_parse_rejects_bad_input(ring):
    with pytest.raises(NonHomogeneous):
        ring.parse("x + y^2")
    with pytest.raises(UnknownName):
        ring.parse("z")
    with pytest.raises(InputError):
        ring.parse("x +* y")
    with pytest.raises(InputError):
        ring.parse("0")


def test_prime_field_parse_drops_vanishing_coefficients():
    ring = PolyRing(FieldSpec(kind="prime", p=5), ["x", "y"])
    assert ring.parse_entry("5*x") is None
    assert str(ring.parse("6*x + y")) == "x + y"


def test_mixed_degree_relation(ring, x, y):
    with pytest.raises(NonHomogeneous):
        FPGradedModule(ring, (0, 0), [[x, y * y]])


def test_sequence_homology_requires_a_complex(R, ring):
    ident = identity_map(R)
    with pytest.raises(InputError):
        sequence_homology(ident, ident, 0)


def test_map_shape_is_checked(R, I):
    bad = GradedModuleMap(R, I, lambda d: Mat.zeros(R.field, 1, 1))
    with pytest.raises(RuntimeError):
        bad.matrix(1)


def test_monomial_torsion_bound(R, C, K, I, ring, x, y):
    assert R.monomial_torsion_bound() == 0
    assert C.monomial_torsion_bound() == 1
    assert K.monomial_torsion_bound() == 1
    assert I.monomial_torsion_bound() is None
    assert FPGradedModule(ring, (0,), [[x * x * y]]).monomial_torsion_bound() == 2


def test_map_from_generator_images_into_a_cokernel(A, R, y, ring):
    coker = cokernel_dw(map_from_poly_images(A, R, [[y]]))
    image = coker.projection.matrix(0) @ R.generator(0)
    f = map_from_gen_images(R, coker, [image], "q")
    for d in range(0, 4):
        assert f.matrix(d).rank() == coker.dim(d) == 1
    assert f.check_natural(0, 3)


def test_monomial_action_matches_chained_variables(R, C, I, K, x, y):
    for m in (R, C, I, K):
        for d in range(-1, 3):
            chained = m.act("y", d + 2) @ m.act("x", d + 1) @ m.act("x", d)
            assert m.act_monomial((2, 1), d) == chained
            assert m.act_power(x * y, 2, d) == m.act_monomial((2, 2), d)
