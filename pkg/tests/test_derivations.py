import numpy as np
import pytest

from conftest import SQ5, model
from ncqm.derivations import (DerivationCoeffs, DerivationInputError, ResonanceError, check_diophantine,
                              decompose_derivation, random_derivation, realize_derivation, synthesize)
from ncqm.models import ModelInputError, nc_torus_lambda
from ncqm.numerics import op_norm

LAM = nc_torus_lambda(SQ5)


def zeros(R):
    return np.zeros((2 * R + 1,) * 4, dtype=complex)


def word_coeffs(R, lam, d, m, n, p, q):
    """Hand-derived coefficients of [B, .] for B = d U1^n U2^m (U1^o)^p (U2^o)^q.

    U2^m U1 = lambda^{-m} U1 U2^m and U2 U1^n = lambda^{-n} U1^n U2 give
    [B, U1] = d (lambda^{-m} - 1) U1^{n+1} U2^m (...), [B, U2] = d (1 - lambda^{-n}) U1^n U2^{m+1} (...).
    """
    c1, c2 = zeros(R), zeros(R)
    idx = (m + R, n + R, p + R, q + R)
    c1[idx] = d * (lam ** (-m) - 1)
    c2[idx] = d * (1 - lam ** (-n))
    return DerivationCoeffs(R, c1, c2, lam)


def test_diophantine_golden_theta_passes():
    rep = check_diophantine(LAM, max_n=200)
    assert rep.passed and rep.resonant_n is None
    assert 0 < rep.order < 2


def test_diophantine_detects_resonance():
    assert check_diophantine(np.exp(2j * np.pi / 5), max_n=20).resonant_n == 5
    rep = check_diophantine(-1.0 + 0j, max_n=20)
    assert rep.resonant_n == 2 and not rep.passed


def test_pure_standard_derivation():
    R = 2
    c1, c2 = zeros(R), zeros(R)
    rng = np.random.default_rng(0)
    s1 = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    s2 = rng.normal(size=(5, 5))
    c1[R, R], c2[R, R] = s1, s2
    dec = decompose_derivation(DerivationCoeffs(R, c1, c2, LAM))
    assert np.abs(dec.inner).max() == 0
    np.testing.assert_array_equal(dec.standard[0], s1)
    np.testing.assert_array_equal(dec.standard[1], s2)


def test_inner_derivation_from_known_word():
    R = 2
    for (m, n, p, q) in ((1, 0, 0, 1), (0, 2, -1, 0), (-2, 1, 1, -1)):
        d = 0.7 - 0.3j
        dec = decompose_derivation(word_coeffs(R, LAM, d, m, n, p, q))
        expected = zeros(R)
        expected[m + R, n + R, p + R, q + R] = d
        assert np.abs(dec.inner - expected).max() < 1e-10
        assert np.abs(dec.standard[0]).max() == 0 and np.abs(dec.standard[1]).max() == 0


def test_mixed_standard_and_inner(rng):
    R = 3
    _, inner = random_derivation(R, LAM, rng)
    s1, s2 = np.zeros((7, 7), complex), np.zeros((7, 7), complex)
    s1[R, R], s2[R, R] = 1.0, 2j
    dec = decompose_derivation(synthesize(R, LAM, (s1, s2), inner))
    assert np.abs(dec.inner - inner).max() < 1e-9
    assert np.abs(dec.standard[0] - s1).max() < 1e-9
    assert np.abs(dec.standard[1] - s2).max() < 1e-9


def test_round_trip_and_branch_agreement():
    R = 6
    for seed in range(3):
        rng = np.random.default_rng(seed)
        st, inner = random_derivation(R, LAM, rng)
        coeffs = synthesize(R, LAM, st, inner)
        assert coeffs.consistency_residual()[0] < 1e-12
        dec = decompose_derivation(coeffs)
        assert np.abs(dec.inner - inner).max() < 1e-9
        assert max(np.abs(dec.standard[i] - st[i]).max() for i in range(2)) < 1e-9
        assert dec.branch_agreement < 1e-10 and dec.residual < 1e-9
        assert dec.branch == "m"
        assert np.abs(dec.inner[R, R]).max() == 0


def test_decomposition_is_unique():
    st, inner = random_derivation(3, LAM, np.random.default_rng(7))
    coeffs = synthesize(3, LAM, st, inner)
    a, b = decompose_derivation(coeffs), decompose_derivation(coeffs)
    assert np.array_equal(a.inner, b.inner)
    assert a.to_dict() == b.to_dict()


def test_consistency_violation_names_index():
    coeffs = word_coeffs(2, LAM, 1.0, 1, 1, 0, 0)
    coeffs.c2[2 + 1, 2 + 1, 2, 2] += 0.5
    with pytest.raises(DerivationInputError, match=r"\(1, 1, 0, 0\)"):
        decompose_derivation(coeffs)


def test_resonant_lambda_raises():
    lam = np.exp(2j * np.pi / 5)
    R = 5
    c1, c2 = zeros(R), zeros(R)
    # index (m, n) = (5, 1): consistency forces c1 = 0, c2 is free, and the m-branch divides by lambda^-5 - 1 = 0
    c2[5 + R, 1 + R, R, R] = 1e-3
    with pytest.raises(ResonanceError) as exc:
        decompose_derivation(DerivationCoeffs(R, c1, c2, lam))
    assert exc.value.n == 5


def test_resonance_error_carries_n():
    lam = np.exp(2j * np.pi / 3)
    R = 3
    c1, c2 = zeros(R), zeros(R)
    # m = 3, n = 3: both denominators vanish and the consistency relation holds trivially
    c1[3 + R, 3 + R, R, R] = 1.0
    with pytest.raises(ResonanceError) as exc:
        decompose_derivation(DerivationCoeffs(R, c1, c2, lam))
    assert exc.value.n == 3


def test_coefficient_validation():
    with pytest.raises(DerivationInputError):
        DerivationCoeffs(1, zeros(2), zeros(1), LAM)
    with pytest.raises(DerivationInputError):
        DerivationCoeffs(1, zeros(1), zeros(1), 1.1)
    with pytest.raises(DerivationInputError):
        DerivationCoeffs.from_dict({"R": 1, "c1": [[2, 0, 0, 0, 1.0, 0.0]]}, LAM)
    with pytest.raises(DerivationInputError):
        DerivationCoeffs.from_dict({"R": 1})


def test_json_and_csv_round_trip():
    st, inner = random_derivation(2, LAM, np.random.default_rng(1))
    coeffs = synthesize(2, LAM, st, inner)
    import json
    back = DerivationCoeffs.from_dict(json.loads(coeffs.to_json()))
    np.testing.assert_array_equal(back.c1, coeffs.c1)
    np.testing.assert_array_equal(back.c2, coeffs.c2)
    text = coeffs.to_csv()
    assert text.splitlines()[0] == "tensor,m,n,p,q,re,im"
    back = DerivationCoeffs.from_csv(text, 2, LAM)
    np.testing.assert_array_equal(back.c1, coeffs.c1)
    theta = DerivationCoeffs.from_dict({"R": 1, "theta": "1/4", "c1": []})
    assert abs(theta.lam - 1j) < 1e-15


def realize_model():
    return model("nc_torus", margin=3, N=5, theta=SQ5, mode="truncated", span_cap=1)


def test_realize_zero_derivation():
    b = realize_model()
    dec = decompose_derivation(DerivationCoeffs(1, zeros(1), zeros(1), LAM))
    rep = realize_derivation(b, dec)
    assert rep.passed and rep.residual_max == 0


def test_realize_standard_only():
    b = realize_model()
    c1 = zeros(1)
    c1[1, 1, 1, 1] = 1.0
    dec = decompose_derivation(DerivationCoeffs(1, c1, zeros(1), LAM))
    assert realize_derivation(b, dec).passed
    s = b.symbols()
    # delta_1 acts as [d_1, .]: delta_1(U1) = U1, delta_1(U2) = 0
    d1, U1, U2 = s["d1"], s["U1"], s["U2"]
    assert op_norm(b.compress(d1 @ U1 - U1 @ d1 - U1)) < 1e-12
    assert op_norm(d1 @ U2 - U2 @ d1) == 0


def test_realize_inner_word_matches_direct_commutator():
    b = realize_model()
    d = 0.4 + 0.1j
    dec = decompose_derivation(word_coeffs(1, LAM, d, 0, 1, 0, 1))
    rep = realize_derivation(b, dec)
    assert rep.passed and rep.residual_max < 1e-12
    s = b.symbols()
    B = d * s["U1"] @ s["U2o"]
    direct = B @ s["U1"] - s["U1"] @ B
    # [B, U1] = d (lambda^0 - 1) ... = 0 since m = 0; [B, U2] = d (1 - lambda^{-1}) U1 U2 U2^o
    assert op_norm(b.compress(direct)) < 1e-12
    direct2 = B @ s["U2"] - s["U2"] @ B
    want = d * (1 - LAM ** -1) * s["U1"] @ s["U2"] @ s["U2o"]
    assert op_norm(b.compress(direct2 - want)) < 1e-12


def test_realize_random_derivation(rng):
    st, inner = random_derivation(1, LAM, rng)
    rep = realize_derivation(realize_model(), decompose_derivation(synthesize(1, LAM, st, inner)))
    assert rep.residual_max < 1e-9


def test_realize_input_errors():
    dec = decompose_derivation(DerivationCoeffs(1, zeros(1), zeros(1), LAM))
    with pytest.raises(ModelInputError):
        realize_derivation(model("nc_torus", N=5, theta="1/5"), dec)
    with pytest.raises(ModelInputError):
        realize_derivation(model("nc_torus", margin=1, N=3, theta=SQ5, mode="truncated", span_cap=1), dec)
