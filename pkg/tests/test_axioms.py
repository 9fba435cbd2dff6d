import numpy as np
import pytest

from conftest import SQ5, model
from ncqm.algebra import PreconditionError
from ncqm.axioms import (check_positivity_nontriviality, check_reality, check_strong_uncertainty,
                         check_weak_strong_equivalence, check_weak_uncertainty, reality_residuals,
                         weak_uncertainty_residuals)
from ncqm.dynamics import HamiltonianSpec, assemble_hamiltonian, velocity
from ncqm.numerics import dagger, hs_norm, random_hermitian


def poly(*terms):
    return [{"word": list(w), "coeff": [complex(c).real, complex(c).imag]} for c, *w in terms]


def free_torus(theta="1/5", N=5, margin=1):
    b = model("nc_torus", margin=margin, N=N, theta=theta)
    return b, assemble_hamiltonian(b, HamiltonianSpec("nc_torus"))


def test_weak_commutative_circle():
    b = model("almost_commutative", margin=3, M=10, n=2)
    hs = HamiltonianSpec("almost_commutative", potential=poly((0.4, "U"), (0.4, "U*"), (0.3, "T3")))
    rep = check_weak_uncertainty(b, assemble_hamiltonian(b, hs))
    assert rep.passed and rep.residual_max < 1e-9, rep.worst


def test_weak_finite_sum_bimodule_hamiltonian(rng):
    b = model("finite_sum", blocks=(2, 3))
    bim = b.bimodule_basis()
    c = rng.normal(size=bim.rank) + 1j * rng.normal(size=bim.rank)
    X = (bim.vectors @ c).reshape(b.dim, b.dim)
    H = 0.5 * (X + dagger(X))
    assert check_weak_uncertainty(b, H).passed
    assert check_strong_uncertainty(b, H).passed


def test_weak_two_point_mixing_fails_with_analytic_magnitude():
    b = model("finite_sum", blocks=(1, 1))
    phi = 0.7 + 0.2j
    H = np.array([[0, phi], [np.conj(phi), 0]])
    assert not check_weak_uncertainty(b, H).passed
    P1 = b.symbols()["P1"]
    bd = velocity(b, H, P1)
    X = P1 @ bd - bd @ P1
    ab, _ = b.membership(X, "algebra")
    # off-diagonal entries i phi (a1 - a2)(b1 - b2) up to sign, both of modulus |phi|
    assert abs(ab - np.sqrt(2) * abs(phi)) < 1e-12
    assert abs(abs(X[0, 1]) - abs(phi)) < 1e-12 and abs(X[0, 0]) == 0


def test_strong_free_torus_passes():
    b, H = free_torus()
    rep = check_strong_uncertainty(b, H)
    assert rep.passed, rep.worst
    assert check_weak_uncertainty(b, H).passed


def test_strong_double_torus_sigma_term():
    b = model("double_torus", N=4)
    z4 = poly((0.3, "U", "V"), (0.3, "U*", "V*"), (1,))
    H = assemble_hamiltonian(b, HamiltonianSpec("double_torus", z=[[], [], [], z4]))
    assert check_strong_uncertainty(b, H).passed
    assert check_weak_uncertainty(b, H).passed


@pytest.mark.slow
def test_strong_fails_for_nonconstant_metric():
    b = model("nc_torus", margin=2, N=5, theta=SQ5, mode="truncated", span_cap=2)
    s = b.symbols()
    H0 = assemble_hamiltonian(b, HamiltonianSpec("nc_torus"))
    assert check_strong_uncertainty(b, H0).passed
    d1, U1 = s["d1"], s["U1"]
    rep = check_strong_uncertainty(b, d1 @ (U1 + dagger(U1)) @ d1)
    assert not rep.passed and rep.residual_max > 1e-3


def test_strong_needs_opposite_structure():
    from ncqm.algebra import AlgebraRep
    from ncqm.models import ModelBundle, ModelSpec
    rep = AlgebraRep(2, {"Z": np.diag([1.0, -1.0])})
    b = ModelBundle(ModelSpec("finite_sum", {"blocks": [1, 1]}), rep, {}, [(0,), (1,)])
    with pytest.raises(PreconditionError):
        check_strong_uncertainty(b, np.eye(2))


def test_weak_strong_equivalence_m2_m3():
    b = model("finite_sum", blocks=(2, 3))
    rep = check_weak_strong_equivalence(b, trials=6, seed=3)
    assert rep.passed
    assert "dim A(x)A^o = 97, dim Z' = 97" in rep.notes
    kinds = {t["kind"]: t for t in rep.trials}
    assert kinds["bimodule"]["weak"] < 1e-8 and kinds["generic"]["strong"] > 1e-3


def test_weak_strong_equivalence_small_cases():
    for blocks in ((1, 1), (2,)):
        rep = check_weak_strong_equivalence(model("finite_sum", blocks=blocks), trials=4, seed=0)
        assert rep.passed
        assert all(t["agree"] for t in rep.trials)
    with pytest.raises(PreconditionError):
        check_weak_strong_equivalence(model("nc_torus", N=5, theta="1/5"))


def test_weak_trivial_center_vacuous():
    b = model("finite_sum", blocks=(2,))
    H = random_hermitian(4, np.random.default_rng(9))
    res = weak_uncertainty_residuals(b, H)
    assert max(rel for _, _, rel in res) < 1e-8


def _min_metric_eigenvalue(b, H, a):
    ad = velocity(b, H, a)
    G = b.compress(-1j * (a @ ad - ad @ a))
    return np.linalg.eigvalsh(0.5 * (G + dagger(G)))[0]


def test_positivity_circle_kinetic():
    b = model("almost_commutative", margin=1, M=10, n=2)
    H = assemble_hamiltonian(b, HamiltonianSpec("almost_commutative"))
    rep = check_positivity_nontriviality(b, H, samples=8)
    assert rep.passed, rep.worst
    # functions on the circle: G(a, a) = |a'|^2 >= 0
    b = model("almost_commutative", margin=3, M=10, n=2)
    H = assemble_hamiltonian(b, HamiltonianSpec("almost_commutative"))
    U = b.rep.generators["U"]
    f = U + dagger(U) + 0.3j * (U @ U - dagger(U @ U))
    assert _min_metric_eigenvalue(b, H, f) > -1e-12


def test_positivity_fails_for_matrix_valued_observable():
    b = model("almost_commutative", margin=3, M=10, n=2)
    H = assemble_hamiltonian(b, HamiltonianSpec("almost_commutative"))
    U, s = b.rep.generators["U"], b.symbols()
    a = (U + dagger(U)) @ s["T1"] + s["T2"]
    assert _min_metric_eigenvalue(b, H, a) < -1.0
    assert not check_positivity_nontriviality(b, H, samples=8).passed


def test_positivity_identity_is_vacuous():
    b, H = free_torus("0/1")
    rep = check_positivity_nontriviality(b, H, samples=0)
    labels = [lab for lab, _ in rep.residuals]
    assert labels == ["positivity:I", "nontriviality:I"]
    assert rep.residual_max == 0


def test_positivity_commutative_torus_passes():
    b, H = free_torus("0/1")
    assert check_positivity_nontriviality(b, H, samples=16).passed
    b = model("nc_torus", margin=4, N=6, theta="0/1", mode="truncated")
    H = assemble_hamiltonian(b, HamiltonianSpec("nc_torus"))
    assert check_positivity_nontriviality(b, H, samples=16).passed


def test_positivity_negative_metric_fails():
    b = model("nc_torus", margin=1, N=5, theta="0/1")
    H = assemble_hamiltonian(b, HamiltonianSpec("nc_torus", coeffs=[[-1.0, 0.0], [0.0, -0.5]]))
    rep = check_positivity_nontriviality(b, H, samples=4)
    assert not rep.passed and rep.residual_max > 1e-2


def test_positivity_fails_on_noncommutative_torus():
    b = model("nc_torus", margin=4, N=6, theta=0.2, mode="truncated")
    H = assemble_hamiltonian(b, HamiltonianSpec("nc_torus"))
    s = b.symbols()
    W = s["U1"] @ s["U2"]
    a = W + dagger(W) + 1j * (s["U1"] - s["U1*"])
    assert _min_metric_eigenvalue(b, H, a) < -4.9
    assert not check_positivity_nontriviality(b, H, samples=8).passed


def test_reality_free_hamiltonian_passes():
    b, H = free_torus()
    assert check_reality(b, H).passed
    b0, H0 = free_torus("0/1")
    assert check_reality(b0, H0).passed


def test_reality_commutative_real_hamiltonian():
    b = model("nc_torus", margin=1, N=5, theta="0/1")
    hs = HamiltonianSpec("nc_torus", potential=poly((0.5, "U1"), (0.5, "U1*"), (0.2, "U1", "U2"), (0.2, "U2*", "U1*")))
    H = assemble_hamiltonian(b, hs)
    assert np.abs(H.imag).max() == 0
    assert check_reality(b, H).passed


def test_reality_double_torus_sigma_term_fails():
    # J sigma J^-1 = sigma^o, so the z4 term does not commute with J
    b = model("double_torus", N=4)
    H = assemble_hamiltonian(b, HamiltonianSpec("double_torus", z=[[], [], [], poly((1,))]))
    assert hs_norm(b.rep.j_conjugate(H) - b.symbols()["sigmao"]) < 1e-12
    assert not check_reality(b, H).passed


def test_reality_counterexample_witness():
    b, H0 = free_torus()
    d1 = b.symbols()["d1"]
    K = 1j * d1  # J K J^-1 = +K
    assert hs_norm(b.rep.j_conjugate(K) - K) < 1e-12
    H = H0 + 1j * K
    res = reality_residuals(b, H)
    for lab, a in __import__("ncqm.axioms", fromlist=["algebra_probes"]).algebra_probes(b):
        Ja = b.rep.j_conjugate(a)
        witness = 2 * hs_norm(b.compress(K @ Ja - Ja @ K))
        ab = dict((l, x) for l, x, _ in res)[lab]
        assert abs(ab - witness) < 1e-10 * max(witness, 1)
    assert not check_reality(b, H).passed


def test_reality_fails_for_torus_gauge_field():
    b = model("nc_torus", margin=1, N=5, theta="1/5")
    H = assemble_hamiltonian(b, HamiltonianSpec("nc_torus", gauge=[poly((0.3, "U1"), (0.3, "U1*"))]))
    assert not check_reality(b, H).passed


def test_reality_needs_j():
    b = model("moyal", margin=4, F=12, theta=1.0)
    with pytest.raises(PreconditionError):
        check_reality(b, b.identity())


def test_reports_are_deterministic():
    b, H = free_torus()
    a = check_weak_uncertainty(b, H, seed=4).to_json()
    c = check_weak_uncertainty(b, H, seed=4).to_json()
    assert a == c
