import threading

import numpy as np
import pytest

from conftest import model
from ncqm.algebra import (AlgebraRep, PreconditionError, algebra_span, antihomomorphism_residual, bimodule_span,
                          center, check_scalarity, commutant, commutant_of, compare_subspaces, gns_self_rep,
                          opposite_span)
from ncqm.numerics import NumericsInputError, hs_norm, op_norm, orthonormalize, project_residual

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def clock_shift(n):
    lam = np.exp(2j * np.pi / n)
    return np.diag(lam ** np.arange(n)), np.roll(np.eye(n), 1, axis=0).astype(complex)


def test_span_of_pauli_pair_is_m2():
    rep = AlgebraRep(2, {"X": SX, "Z": SZ}, degree_cap=2)
    assert algebra_span(rep).rank == 4


def test_span_of_identity_is_one_dimensional():
    for cap in (1, 3):
        assert algebra_span(AlgebraRep(3, {"I": np.eye(3)}, degree_cap=cap)).rank == 1


def test_clock_shift_generates_full_matrix_algebra():
    C, S = clock_shift(5)
    assert algebra_span(AlgebraRep(5, {"C": C, "S": S}, degree_cap=4)).rank == 25


def test_span_is_deterministic():
    C, S = clock_shift(4)
    a = algebra_span(AlgebraRep(4, {"C": C, "S": S}, degree_cap=3))
    b = algebra_span(AlgebraRep(4, {"S": S, "C": C}, degree_cap=3))
    assert np.array_equal(a.vectors, b.vectors)


def test_commutant_examples():
    rep = AlgebraRep(2, {"X": SX, "Z": SZ}, degree_cap=2)
    assert commutant(rep).rank == 1
    assert commutant(AlgebraRep(2, {"P": np.diag([1.0, 0.0])})).rank == 2


def test_commutant_of_left_regular_m2_m3():
    rep, _, _ = gns_self_rep((2, 3))
    com = commutant(rep)
    assert com.rank == 2**2 + 3**2
    opp = orthonormalize(list(rep.opposite_generators.values()) + [np.eye(13)])
    # right multiplications span the commutant
    assert compare_subspaces(opposite_span(rep), com).equal
    assert opp.rank <= com.rank


def test_commutant_non_normal_generator():
    N = np.array([[0, 1], [0, 0]], dtype=complex)
    com = commutant_of([N], 2)
    assert com.rank == 2
    for B in com.matrices():
        assert hs_norm(N @ B - B @ N) < 1e-12


def test_center_examples():
    C, S = clock_shift(3)
    assert center(AlgebraRep(3, {"C": C, "S": S}, degree_cap=4)).rank == 1
    rep, proj, _ = gns_self_rep((2, 3))
    z = center(rep)
    assert z.rank == 2
    assert compare_subspaces(z, orthonormalize(list(proj.values()))).equal


def test_gns_two_point():
    rep, proj, layout = gns_self_rep((1, 1))
    assert rep.hilbert_dim == 2
    assert center(rep).rank == 2
    np.testing.assert_allclose(proj["P1"] + proj["P2"], np.eye(2))


def test_gns_m2_commutant_is_right_multiplication():
    rep, _, _ = gns_self_rep((2,))
    assert rep.hilbert_dim == 4
    com = commutant(rep)
    assert com.rank == 4
    assert compare_subspaces(opposite_span(rep), com).residual < 1e-10


def test_gns_m2_m3_dimensions():
    rep, _, layout = gns_self_rep((2, 3))
    assert rep.hilbert_dim == 13
    assert algebra_span(rep).rank == 13
    assert commutant(rep).rank == 13
    assert bimodule_span(rep).rank == 97
    for idx in range(layout.dim):
        assert layout.index(*layout.quantum_numbers(idx)) == idx


def test_gns_rejects_bad_blocks():
    with pytest.raises(NumericsInputError):
        gns_self_rep((2, 0))
    with pytest.raises(NumericsInputError):
        gns_self_rep(())


def test_scalarity_examples():
    rep, _, _ = gns_self_rep((2,))
    r = check_scalarity(rep)
    assert r.equal and r.dimension_a == r.dimension_b == 4
    nt = model("nc_torus", N=5, theta="1/5")
    r = check_scalarity(nt.rep)
    assert r.equal and r.dimension_a == 25 and r.residual < 1e-9
    plain = AlgebraRep(2, {"X": SX, "Z": SZ}, degree_cap=2, j_conj=np.eye(2))
    r = check_scalarity(plain)
    assert not r.equal and (r.dimension_a, r.dimension_b) == (4, 1)
    with pytest.raises(PreconditionError):
        check_scalarity(AlgebraRep(2, {"X": SX}))


def test_opposite_span_examples():
    # commutative algebra, J = complex conjugation
    D = np.diag([1.0, 2.0, 3.0]).astype(complex)
    rep = AlgebraRep(3, {"D": D}, degree_cap=3, j_conj=np.eye(3))
    assert compare_subspaces(opposite_span(rep), algebra_span(rep)).equal
    rep2, _, _ = gns_self_rep((2, 3))
    assert opposite_span(rep2).rank == 13
    nt = model("nc_torus", N=5, theta="1/5")
    assert compare_subspaces(opposite_span(nt.rep), commutant(nt.rep)).residual < 1e-9
    with pytest.raises(PreconditionError):
        opposite_span(AlgebraRep(2, {"X": SX}))


def test_opposite_is_antihomomorphism():
    rep, _, _ = gns_self_rep((2, 3))
    assert antihomomorphism_residual(rep) < 1e-10
    nt = model("nc_torus", N=5, theta="1/5")
    assert antihomomorphism_residual(nt.rep) < 1e-10


def test_bicommutant_contains_span():
    for rep in (gns_self_rep((2, 3))[0], model("nc_torus", N=5, theta="1/5").rep,
                AlgebraRep(2, {"X": SX, "Z": SZ}, degree_cap=2)):
        com = commutant(rep)
        bicom = commutant_of(com.matrices(), rep.hilbert_dim)
        for B in algebra_span(rep).matrices():
            assert project_residual(B, bicom) < 1e-8


def test_commutant_contains_identity():
    for rep in (gns_self_rep((1, 2))[0], model("nc_torus", N=3, theta="1/3").rep):
        assert project_residual(np.eye(rep.hilbert_dim), commutant(rep)) < 1e-12


def test_generators_commute_with_opposite_generators():
    for rep in (gns_self_rep((2, 3))[0], model("nc_torus", N=5, theta="2/5").rep,
                model("double_torus", N=4).rep):
        for g in rep.generators.values():
            for h in rep.opposite_gens().values():
                assert op_norm(g @ h - h @ g) < 1e-10


def test_structure_chain_for_finite_sums():
    for blocks in ((1, 1), (2,), (1, 2), (2, 3)):
        rep, _, _ = gns_self_rep(blocks)
        z = center(rep)
        assert z.rank == len(blocks)
        bim = bimodule_span(rep)
        assert bim.rank == sum(n**4 for n in blocks)
        r = compare_subspaces(bim, commutant_of(z.matrices(), rep.hilbert_dim))
        assert r.equal and r.residual < 1e-9


def test_span_cache_is_thread_safe():
    C, S = clock_shift(5)
    rep = AlgebraRep(5, {"C": C, "S": S}, degree_cap=4)
    out = []
    threads = [threading.Thread(target=lambda: out.append(algebra_span(rep))) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len({id(b) for b in out}) == 1 and out[0].rank == 25


def test_rep_validates_shapes_and_unitarity():
    with pytest.raises(NumericsInputError):
        AlgebraRep(2, {"X": np.eye(3)})
    with pytest.raises(NumericsInputError):
        AlgebraRep(2, {"X": SX}, j_conj=2 * np.eye(2))
