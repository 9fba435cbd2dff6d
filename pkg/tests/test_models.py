import numpy as np
import pytest

from conftest import model
from ncqm.algebra import algebra_span, center, commutant, compare_subspaces, intersect
from ncqm.models import ModelInputError, ModelSpec, build_model, nc_torus_lambda, parse_theta, relation_residuals
from ncqm.numerics import hs_norm, op_norm, project_residual


def test_parse_theta():
    assert str(parse_theta("2/5")) == "2/5"
    assert parse_theta(0.3) == 0.3
    assert abs(nc_torus_lambda("1/4") - 1j) < 1e-15
    with pytest.raises(ModelInputError):
        parse_theta("one half")


def test_finite_sum_two_point_projections():
    b = model("finite_sum", blocks=(1, 1))
    P1, P2 = b.symbols()["P1"], b.symbols()["P2"]
    np.testing.assert_allclose(P1 + P2, np.eye(2))
    assert op_norm(P1 @ P2) == 0 and op_norm(P1 @ P1 - P1) == 0


def test_finite_sum_pauli_generators():
    b = model("finite_sum", blocks=(2,))
    Ts = [v for k, v in b.named_operators.items() if k.startswith("T")]
    assert len(Ts) == 3
    span = algebra_span(b.rep)
    assert span.rank == 4
    for X in Ts:
        assert op_norm(X - X.conj().T) < 1e-14


def test_finite_sum_center_is_block_projections():
    b = model("finite_sum", blocks=(2, 3))
    P = [b.symbols()["P1"], b.symbols()["P2"]]
    for i in range(2):
        for k in range(2):
            assert op_norm(P[i] @ P[k] - (i == k) * P[i]) < 1e-14
    from ncqm.numerics import orthonormalize
    assert compare_subspaces(b.center_basis(), orthonormalize(P)).equal


def test_finite_sum_rejects_bad_blocks():
    with pytest.raises(ModelInputError):
        build_model({"family": "finite_sum", "params": {"blocks": []}})
    with pytest.raises(ModelInputError):
        build_model({"family": "finite_sum", "params": {"blocks": [2, -1]}})


def test_almost_commutative_relations():
    b = model("almost_commutative", margin=2, M=6, n=2)
    for k, r in relation_residuals(b).items():
        assert r < 1e-12, k
    s = b.symbols()
    T1, T2, T3 = s["T1"], s["T2"], s["T3"]
    # su(2) structure constants in the normalisation of gell_mann(2)
    comm = T1 @ T2 - T2 @ T1
    c = np.vdot(T3, comm) / np.vdot(T3, T3)
    assert abs(c.real) < 1e-14 and abs(c) > 0.1
    assert hs_norm(comm - c * T3) < 1e-12


def test_almost_commutative_center_dimension():
    M, margin = 6, 2
    b = model("almost_commutative", margin=margin, M=M, n=2)
    assert b.center_basis().rank == 2 * (M - margin) + 1


def test_almost_commutative_input_errors():
    for params, margin in (({"M": 3, "n": 2}, 0), ({"M": 6, "n": 1}, 0), ({"M": 6, "n": 2}, 6)):
        with pytest.raises(ModelInputError):
            build_model(ModelSpec("almost_commutative", params, margin))


def test_moyal_relations_on_window():
    theta = 0.7
    b = model("moyal", margin=16, F=64, theta=theta)
    s = b.symbols()
    I = b.identity()
    assert b.compress(s["x1"] @ s["x2"] - s["x2"] @ s["x1"] - 1j * theta * I).hs_norm() < 1e-10
    for k in ("p1", "p2"):
        for l in ("x1", "x2"):
            assert b.compress(s[k] @ s[l] - s[l] @ s[k]).hs_norm() < 1e-10
    # [d_k, x_l] = -i delta_kl, the Hermitian form of delta_k(x_l) = delta_kl
    for k in (1, 2):
        for l in (1, 2):
            C = s[f"d{k}"] @ s[f"x{l}"] - s[f"x{l}"] @ s[f"d{k}"] + 1j * (k == l) * I
            assert b.compress(C).hs_norm() < 1e-10


def test_moyal_input_errors():
    for params, margin in (({"F": 4, "theta": 1.0}, 0), ({"F": 16, "theta": -1.0}, 0), ({"F": 16, "theta": 1.0}, 15)):
        with pytest.raises(ModelInputError):
            build_model(ModelSpec("moyal", params, margin))


def test_double_torus_relations_exact():
    b = model("double_torus", N=4)
    for k, r in relation_residuals(b).items():
        assert r < 1e-12, k


def test_double_torus_span_is_twice_function_space():
    N = 4
    b = model("double_torus", N=N)
    assert algebra_span(b.rep).rank == 2 * N * N


def test_double_torus_center_is_sigma_invariant():
    b = model("double_torus", N=4)
    sigma = b.symbols()["sigma"]
    z = b.center_basis()
    oracle = intersect(algebra_span(b.rep), commutant(b.rep))
    assert compare_subspaces(z, oracle).equal
    for Z in z.matrices():
        assert op_norm(sigma @ Z @ sigma - Z) < 1e-12


def test_double_torus_truncated_window_relations():
    b = model("double_torus", margin=1, N=3, mode="truncated")
    for k, r in relation_residuals(b).items():
        assert r < 1e-10, k


def test_nc_torus_relations_exact():
    b = model("nc_torus", N=5, theta="1/5")
    res = relation_residuals(b)
    assert res["U1U2-lam*U2U1"] < 1e-12
    assert res["[U1,U2o]"] < 1e-12
    assert max(res.values()) < 1e-12


def test_nc_torus_derivations_on_opposite_generators():
    b = model("nc_torus", margin=1, N=5, theta="1/5")
    s = b.symbols()
    for k in (1, 2):
        for l in (1, 2):
            d, U = s[f"d{k}"], s[f"U{l}o"]
            assert op_norm(b.compress(d @ U - U @ d - (k == l) * U)) < 1e-10


def test_nc_torus_span_and_commutant():
    b = model("nc_torus", N=5, theta="2/5")
    assert algebra_span(b.rep).rank == 25
    from ncqm.algebra import opposite_span
    assert compare_subspaces(commutant(b.rep), opposite_span(b.rep)).residual < 1e-9


def test_nc_torus_truncated_relations_on_window():
    b = model("nc_torus", margin=1, N=3, theta=0.3, mode="truncated")
    for k, r in relation_residuals(b).items():
        assert r < 1e-10, k


def test_nc_torus_input_errors():
    with pytest.raises(ModelInputError):
        build_model({"family": "nc_torus", "params": {"N": 5, "theta": 0.3}})
    with pytest.raises(ModelInputError):
        build_model({"family": "nc_torus", "params": {"N": 5, "theta": "1/3"}})
    with pytest.raises(ModelInputError):
        build_model({"family": "nc_torus", "params": {"N": 2, "theta": 0.3, "mode": "truncated"}, "window_margin": 2})
    with pytest.raises(ModelInputError):
        build_model({"family": "klein_bottle", "params": {}})


def test_builders_are_deterministic():
    for fam, params in (("nc_torus", {"N": 5, "theta": "1/5"}), ("double_torus", {"N": 3}),
                        ("almost_commutative", {"M": 5, "n": 2})):
        a = build_model(ModelSpec(fam, dict(params), 1))
        c = build_model(ModelSpec(fam, dict(params), 1))
        for k, v in a.symbols().items():
            assert np.array_equal(v, c.symbols()[k])


def test_layout_round_trip():
    for b in (model("nc_torus", N=5, theta="1/5"), model("double_torus", N=3), model("finite_sum", blocks=(2, 3))):
        for idx in range(b.dim):
            assert b.index_of(b.quantum_numbers(idx)) == idx
        for name, X in b.named_operators.items():
            assert X.shape == (b.dim, b.dim), name


def test_polynomial_and_membership():
    b = model("nc_torus", N=5, theta="1/5")
    X = b.polynomial([{"word": ["U1", "U2"], "coeff": [0.5, 0.5]}, {"word": ["U1*"]}])
    s = b.symbols()
    assert op_norm(X - ((0.5 + 0.5j) * s["U1"] @ s["U2"] + s["U1*"])) < 1e-14
    assert b.membership(X, "algebra")[1] < 1e-10
    assert b.membership(s["U1o"], "algebra")[1] > 0.1
    with pytest.raises(ModelInputError):
        b.polynomial([{"word": ["W"]}])
    assert project_residual(np.eye(b.dim), b.center_basis()) < 1e-12
