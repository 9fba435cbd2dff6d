"""Hamiltonians, Heisenberg evolution, velocities and Dirac operators.

Conventions.  Time evolution is ``a_t = exp(iHt) a exp(-iHt)`` so that
``adot = i[H, a]``; with ``H = p^2/2`` this gives ``[x, xdot] = i`` and a
positive metric ``-i[x, xdot] = 1``.  Derivations enter through Hermitian
generators ``d_k`` (diagonal lattice labels, or the Moyal ad-operators),
so a kinetic term reads ``(d_k - A_k)(d_l - A_l)``.  Kinetic products are
symmetrised as ``(T + T^dagger)/2``; for central coefficients this is the
printed operator itself.  Planck's constant and the mass are set to 1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .kron import KronSum, lr_projection_residual
from .models import ModelBundle, MoyalBundle, ModelInputError
from .numerics import NumericsInputError, dagger, hs_norm, op_norm
from .report import CheckReport

DERIVATION_LABELS = {
    "finite_sum": [],
    "almost_commutative": ["d"],
    "moyal": ["d1", "d2"],
    "double_torus": ["d1", "d2"],
    "nc_torus": ["d1", "d2"],
}

HERMITIAN_TOL = 1e-10
PAULI = [
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


class AssemblyError(ValueError):
    """A Hamiltonian ingredient violates its Hermiticity or centrality requirement."""


@dataclass
class HamiltonianSpec:
    """Recipe for a Hamiltonian.

    Polynomials are lists of ``{"word": [...], "coeff": [re, im]}`` terms in
    the bundle's symbols.  Which fields are read depends on the family:

    * ``coeffs``: numeric kinetic matrix (``c_kl`` on the torus, ``zeta_kl``
      on the Moyal plane);
    * ``metric``: central polynomial ``g`` (circle model);
    * ``gauge``: one polynomial per derivation (on the torus these are the
      ``a_k`` of ``A_k = a_k + a_k^o``);
    * ``potential``: Hermitian ``A_0``;
    * ``z``: the four central coefficients of the double-torus form;
    * ``terms``: any extra polynomial, added after symmetrisation;
    * ``sigmas``: optional 2x2 matrices for the Dirac operator;
    * ``matrix``: an explicit Hermitian matrix (rows of numbers or
      ``[re, im]`` pairs), added last.
    """

    family: str
    coeffs: list | None = None
    metric: list | None = None
    gauge: list | None = None
    potential: list | None = None
    z: list | None = None
    terms: list | None = None
    sigmas: list | None = None
    matrix: list | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "HamiltonianSpec":
        if "family" not in d:
            raise ModelInputError("hamiltonian spec lacks 'family'")
        known = {"family", "coeffs", "metric", "gauge", "potential", "z", "terms", "sigmas", "matrix"}
        extra = set(d) - known
        if extra:
            raise ModelInputError(f"unknown hamiltonian fields {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "HamiltonianSpec":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def parse_matrix(rows) -> np.ndarray:
    """Nested lists of numbers or ``[re, im]`` pairs as a complex matrix."""
    def cplx(x):
        return complex(x[0], x[1]) if isinstance(x, (list, tuple)) else complex(x)

    try:
        return np.array([[cplx(x) for x in row] for row in rows], dtype=complex)
    except (TypeError, ValueError, IndexError) as exc:
        raise ModelInputError(f"malformed matrix: {exc}") from exc


def sym(T):
    """``(T + T^dagger) / 2`` for dense arrays and Kronecker sums alike."""
    if isinstance(T, KronSum):
        return 0.5 * (T + T.dagger())
    return 0.5 * (T + dagger(T))


def _herm_defect(X) -> float:
    if isinstance(X, KronSum):
        return (X - X.dagger()).hs_norm() / max(X.hs_norm(), 1e-300)
    return hs_norm(X - dagger(X)) / max(hs_norm(X), 1e-300)


def _require_hermitian(X, name: str):
    if _herm_defect(X) > HERMITIAN_TOL:
        raise AssemblyError(f"{name} is not Hermitian (relative defect {_herm_defect(X):.2e})")


def _require_central(bundle: ModelBundle, z, name: str):
    for lab, g in bundle.rep.closed_generators().items():
        c = bundle.compress(z @ g - g @ z)
        scale = max(op_norm(z) * op_norm(g), 1e-300)
        if op_norm(c) > 1e-10 * scale:
            raise ModelInputError(f"{name} is not central: commutator with {lab} is {op_norm(c):.2e}")


def momenta(bundle: ModelBundle, hspec: HamiltonianSpec) -> list:
    """``Pi_k = d_k - A_k`` for the family's derivation generators."""
    labels = DERIVATION_LABELS[bundle.family]
    gauge = hspec.gauge or []
    if len(gauge) > len(labels):
        raise ModelInputError(f"{len(gauge)} gauge potentials for {len(labels)} derivations")
    out = []
    for k, lab in enumerate(labels):
        d = bundle.named_operators[lab]
        if k < len(gauge) and gauge[k]:
            a = bundle.polynomial(gauge[k])
            _require_hermitian(a, f"gauge[{k}]")
            if bundle.family == "nc_torus":
                a = a + bundle.rep.opposite(a)
            d = d - a
        out.append(d)
    return out


def _numeric_matrix(coeffs, n: int, name: str) -> np.ndarray:
    c = np.eye(n) if coeffs is None else np.asarray(coeffs, dtype=float)
    if c.shape != (n, n):
        raise ModelInputError(f"{name} must be {n}x{n}")
    return c


def assemble_hamiltonian(bundle: ModelBundle, hspec: HamiltonianSpec):
    """Hermitian Hamiltonian for ``bundle`` from ``hspec``.

    * circle model: ``H = 1/2 sym(g Pi Pi) + A_0``;
    * Moyal plane: ``H = 1/2 sum zeta_kl sym(Pi_k Pi_l) + A_0``;
    * torus: ``H = 1/2 sum c_kl sym(Pi_k Pi_l) + A_0`` with ``A_k = a_k + a_k^o``;
    * double torus: ``H = z1 (d1^2 + d2^2) + z2 d1 d2 + z3 (d1 + d2) + z4 sigma``,
      each product symmetrised;
    * finite sums: ``H = A_0``.

    ``terms`` is added to all of them after symmetrisation.
    """
    if hspec.family != bundle.family:
        raise ModelInputError(f"hamiltonian family {hspec.family} does not match model {bundle.family}")
    fam = bundle.family
    I = bundle.identity() if isinstance(bundle, MoyalBundle) else np.eye(bundle.dim, dtype=complex)
    H = 0.0 * I
    if fam == "almost_commutative":
        (P,) = momenta(bundle, hspec)
        g = bundle.polynomial(hspec.metric) if hspec.metric else I
        _require_hermitian(g, "metric")
        _require_central(bundle, g, "metric")
        H = 0.5 * sym(g @ P @ P)
    elif fam in ("moyal", "nc_torus"):
        P = momenta(bundle, hspec)
        c = _numeric_matrix(hspec.coeffs, len(P), "coeffs")
        if fam == "nc_torus" and np.abs(c - c.T).max() > 1e-12:
            raise ModelInputError("torus kinetic matrix must be symmetric")
        for k in range(len(P)):
            for l in range(len(P)):
                if c[k, l] != 0.0:
                    H = H + (0.5 * c[k, l]) * sym(P[k] @ P[l])
    elif fam == "double_torus":
        if hspec.z is None or len(hspec.z) != 4:
            raise ModelInputError("double_torus hamiltonian needs four central coefficients z")
        d1, d2 = bundle.named_operators["d1"], bundle.named_operators["d2"]
        s = bundle.named_operators["sigma"]
        factors = [d1 @ d1 + d2 @ d2, d1 @ d2, d1 + d2, s]
        for k, (zp, F) in enumerate(zip(hspec.z, factors)):
            if not zp:
                continue
            z = bundle.polynomial(zp)
            _require_central(bundle, z, f"z[{k + 1}]")
            H = H + sym(z @ F)
    if hspec.potential:
        A0 = bundle.polynomial(hspec.potential)
        _require_hermitian(A0, "potential")
        H = H + A0
    if hspec.terms:
        H = H + sym(bundle.polynomial(hspec.terms))
    if hspec.matrix is not None:
        if isinstance(bundle, MoyalBundle):
            raise ModelInputError("explicit matrices are not supported on the Moyal plane")
        M = parse_matrix(hspec.matrix)
        if M.shape != (bundle.dim, bundle.dim):
            raise ModelInputError(f"matrix has shape {M.shape}, model dimension is {bundle.dim}")
        _require_hermitian(M, "matrix")
        H = H + M
    _require_hermitian(H, "assembled Hamiltonian")
    return H


# ---------------------------------------------------------------------------
# velocities and evolution


def velocity(bundle, H, a):
    """``adot = i[H, a]``."""
    if H.shape != a.shape:
        raise NumericsInputError(f"H of shape {H.shape} and observable of shape {a.shape}")
    return 1j * (H @ a - a @ H)


def extract_metric(bundle, H, a, b):
    """``G(a, b) = -i[a, bdot]``, the inverse metric evaluated on ``da, db``."""
    bd = velocity(bundle, H, b)
    return -1j * (a @ bd - bd @ a)


def metric_report(bundle, H, a) -> dict:
    """Hermiticity defect and lowest eigenvalue of the windowed ``G(a, a)``."""
    G = bundle.compress(extract_metric(bundle, H, a, a))
    Gh = 0.5 * (G + dagger(G))
    return {"hermiticity": hs_norm(G - dagger(G)), "min_eigenvalue": float(np.linalg.eigvalsh(Gh)[0])}


class Evolution:
    """Heisenberg evolution under a fixed Hermitian ``H`` (one eigendecomposition)."""

    def __init__(self, H):
        H = np.asarray(H, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise NumericsInputError("H must be square")
        if hs_norm(H - dagger(H)) > HERMITIAN_TOL * max(hs_norm(H), 1.0):
            raise NumericsInputError("evolution needs a Hermitian H")
        self.H = H
        self.w, self.V = np.linalg.eigh(0.5 * (H + dagger(H)))

    def unitary(self, t: float) -> np.ndarray:
        return (self.V * np.exp(1j * self.w * t)) @ dagger(self.V)

    def at(self, a, t: float, label: str = "a") -> "EvolvedObservable":
        # work in the eigenbasis: (a_t)_ij = exp(i(w_i - w_j)t) a_ij
        at = dagger(self.V) @ a @ self.V
        ph = np.exp(1j * np.subtract.outer(self.w, self.w) * t)
        mat = self.V @ (ph * at) @ dagger(self.V)
        return EvolvedObservable(label, float(t), mat, self, np.asarray(a, dtype=complex))


@dataclass
class EvolvedObservable:
    label: str
    t: float
    matrix: np.ndarray
    evolution: Evolution = field(repr=False)
    base: np.ndarray = field(repr=False)
    _fd: dict = field(default_factory=dict, repr=False)

    def velocity(self) -> np.ndarray:
        H = self.evolution.H
        return 1j * (H @ self.matrix - self.matrix @ H)

    def finite_difference(self, h: float = 1e-4) -> np.ndarray:
        """Central difference ``(a_{t+h} - a_{t-h}) / 2h``, cached per step."""
        if h not in self._fd:
            ev = self.evolution
            self._fd[h] = (ev.at(self.base, self.t + h).matrix - ev.at(self.base, self.t - h).matrix) / (2 * h)
        return self._fd[h]


def evolve(H, a, t: float, label: str = "a") -> EvolvedObservable:
    return Evolution(H).at(a, t, label)


# ---------------------------------------------------------------------------
# Moyal plane: velocity decomposition and the consistency relation


def moyal_velocity_decomposition(bundle: MoyalBundle, H, k: int) -> dict:
    """Split ``xdot_k`` into ``sum_l zeta_kl d_l`` plus a left multiplication.

    Only ``d_l`` carries a right-multiplication part, ``-(1/theta) R_{y_l}``
    with ``y_1 = x_2``, ``y_2 = -x_1``; fitting the right factor of the
    windowed velocity against ``y_l`` recovers ``zeta_kl``.  The component of
    the velocity in the commutant is set to zero.
    """
    th = bundle.theta
    x = [bundle.named_operators["x1"], bundle.named_operators["x2"]]
    d = [bundle.named_operators["d1"], bundle.named_operators["d2"]]
    xd = velocity(bundle, H, x[k])
    W = bundle.compress(xd)
    lr_res, _, right = lr_projection_residual(W, left_only=False)
    w = bundle.widx
    yT = [bundle.x_fock[1][np.ix_(w, w)].T, -bundle.x_fock[0][np.ix_(w, w)].T]
    m = len(w)
    cols = [yT[0].reshape(-1), yT[1].reshape(-1), np.eye(m).reshape(-1)]
    M = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(M, right.reshape(-1), rcond=None)
    fit_res = np.linalg.norm(M @ coef - right.reshape(-1)) / max(np.linalg.norm(right), 1e-300)
    zeta = -th * coef[:2]
    A = xd - (zeta[0] * d[0] + zeta[1] * d[1])
    A_res, A_left, _ = lr_projection_residual(bundle.compress(A), left_only=True)
    return {
        "velocity": xd,
        "zeta": zeta,
        "zeta_fit_residual": float(fit_res),
        "gauge": A,
        "gauge_matrix": A_left,
        # scaled by the whole velocity so a vanishing gauge part is not judged on its round-off
        "gauge_residual": float(A_res / max(bundle.compress(A).hs_norm(), W.hs_norm(), 1e-300)),
        "bimodule_residual": float(lr_res),
    }


def moyal_consistency(bundle: MoyalBundle, H, tol: float = 1e-9) -> CheckReport:
    """``i zeta_kl + [x_l, A_k] = i zeta_lk + [x_k, A_l]`` from the decomposed velocities."""
    if not isinstance(bundle, MoyalBundle):
        raise ModelInputError("moyal_consistency needs a Moyal model")
    x = [bundle.named_operators["x1"], bundle.named_operators["x2"]]
    dec = [moyal_velocity_decomposition(bundle, H, k) for k in range(2)]
    Iw = KronSum.identity(len(bundle.widx))
    zeta = np.array([dec[0]["zeta"], dec[1]["zeta"]])

    def side(k, l):
        A = dec[k]["gauge"]
        return 1j * zeta[k, l] * Iw + bundle.compress(x[l] @ A - A @ x[l])

    lhs, rhs = side(0, 1), side(1, 0)
    scale = max(lhs.hs_norm(), rhs.hs_norm(), np.sqrt(bundle.window_dim))
    residuals = [
        ("consistency[1,2]", (lhs - rhs).hs_norm() / scale),
        ("gauge-in-algebra[1]", dec[0]["gauge_residual"]),
        ("gauge-in-algebra[2]", dec[1]["gauge_residual"]),
        ("constant-zeta-fit[1]", dec[0]["zeta_fit_residual"]),
        ("constant-zeta-fit[2]", dec[1]["zeta_fit_residual"]),
    ]
    notes = [
        f"fitted zeta = {np.round(zeta, 12).tolist()}",
        "commutant components omega_k of the velocities are set to zero",
    ]
    return CheckReport("moyal_consistency", bundle.label, residuals, tol, bundle.window_params(), notes)


def consistency_defect(bundle: MoyalBundle, zeta, gauges) -> float:
    """``max_{k,l} ||(i zeta_kl + [x_l, A_k]) - (i zeta_lk + [x_k, A_l])||`` per window state.

    ``gauges`` are Fock-space matrices ``A_k``; this evaluates the relation
    for prescribed data rather than data read off a Hamiltonian.
    """
    w = np.ix_(bundle.widx, bundle.widx)
    xs = bundle.x_fock
    m = len(bundle.widx)
    I = np.eye(m)
    worst = 0.0
    for k in range(2):
        for l in range(2):
            a = 1j * zeta[k][l] * I + (xs[l] @ gauges[k] - gauges[k] @ xs[l])[w]
            b = 1j * zeta[l][k] * I + (xs[k] @ gauges[l] - gauges[l] @ xs[k])[w]
            worst = max(worst, hs_norm(a - b) / np.sqrt(m))
    return worst


# ---------------------------------------------------------------------------
# circle model: the T^a lemma


def lemma_Tdot(bundle: ModelBundle, H, hspec: HamiltonianSpec, tol: float = 1e-8) -> CheckReport:
    """``Tdot^a + (i/2){V, [A, T^a]}`` is an algebra element commuting with ``C(S^1)``.

    ``V = sym(g (d - A))`` is the velocity field of the base coordinate; the
    remainder plays the role of the Hermitian elements ``A_0^a``.
    """
    if bundle.family != "almost_commutative":
        raise ModelInputError("lemma_Tdot needs the circle model")
    (P,) = momenta(bundle, hspec)
    I = np.eye(bundle.dim, dtype=complex)
    g = bundle.polynomial(hspec.metric) if hspec.metric else I
    A = bundle.named_operators["d"] - P
    V = sym(g @ P)
    U = bundle.rep.generators["U"]
    residuals = []
    for lab, T in bundle.named_operators.items():
        if not lab.startswith("T"):
            continue
        Td = velocity(bundle, H, T)
        C = A @ T - T @ A
        R = Td + 0.5j * (V @ C + C @ V)
        scale = max(bundle.window_norm(Td), bundle.window_norm(R), 1.0)
        residuals.append((f"[R,U]:{lab}", bundle.window_norm(R @ U - U @ R) / scale))
        _, rel = bundle.membership(R, "algebra", ref=hs_norm(bundle.compress(R)) + hs_norm(bundle.compress(Td)) + 1e-300)
        residuals.append((f"R-in-A:{lab}", rel))
    return CheckReport("lemma_Tdot", bundle.label, residuals, tol, bundle.window_params(),
                       ["remainder R = Tdot + (i/2){V,[A,T]} with V = sym(g(d - A))"])


# ---------------------------------------------------------------------------
# Dirac operator on the torus


def clifford_sigmas(c: np.ndarray) -> list[np.ndarray]:
    """2x2 Hermitian ``sigma^i`` with ``{sigma^i, sigma^j} = 2 c_ij`` (c positive semidefinite, 2x2)."""
    w, Q = np.linalg.eigh(c)
    if w.min() < -1e-12:
        raise ModelInputError("Clifford data needs a positive semidefinite c")
    L = Q * np.sqrt(np.clip(w, 0, None))
    return [sum(L[i, a] * PAULI[a] for a in range(2)) for i in range(2)]


def dirac_from_momenta(pis: list[np.ndarray], sigmas: list[np.ndarray]) -> np.ndarray:
    return sum(np.kron(P, s) for P, s in zip(pis, sigmas))


def dirac_operator(bundle: ModelBundle, hspec: HamiltonianSpec) -> np.ndarray:
    """``D = sum_i Pi_i (x) sigma^i`` on ``H (x) C^2`` with ``Pi_i = d_i - a_i - a_i^o``.

    ``sigma^i`` come from ``hspec.sigmas`` or, by default, from the Pauli
    matrices twisted so that ``{sigma^i, sigma^j} = 2 c_ij``.
    """
    return _dirac(bundle, hspec)[0]


def _dirac(bundle: ModelBundle, hspec: HamiltonianSpec):
    if bundle.family != "nc_torus":
        raise ModelInputError("dirac_operator needs the torus model")
    c = _numeric_matrix(hspec.coeffs, 2, "coeffs")
    if hspec.sigmas is not None:
        sig = [np.asarray(s, dtype=complex) for s in hspec.sigmas]
        for i in range(2):
            if hs_norm(sig[i] - dagger(sig[i])) > 1e-12:
                raise ModelInputError(f"sigma^{i + 1} is not Hermitian")
            for j in range(2):
                if hs_norm(sig[i] @ sig[j] + sig[j] @ sig[i] - 2 * c[i, j] * np.eye(2)) > 1e-10:
                    raise ModelInputError(f"Clifford relation fails for (i, j) = ({i + 1}, {j + 1})")
    else:
        sig = clifford_sigmas(c)
    D = dirac_from_momenta(momenta(bundle, hspec), sig)
    if hs_norm(D - dagger(D)) > HERMITIAN_TOL * max(hs_norm(D), 1.0):
        raise AssemblyError("Dirac operator is not Hermitian")
    return D, sig


def dirac_identity_residuals(bundle: ModelBundle, hspec: HamiltonianSpec) -> dict[str, float]:
    """Residuals of ``D^2 = sum c_ij Pi_i Pi_j (x) 1 + 1/2 sum Pi_i Pi_j (x) [sigma^i, sigma^j]``.

    Also reports ``||[Pi_1, Pi_2]||`` and the plain identity
    ``D^2 = 2 H_kin (x) 1`` with ``H_kin = 1/2 sum c_ij sym(Pi_i Pi_j)``,
    which holds exactly when the momenta commute.  All norms are windowed.
    """
    D, sig = _dirac(bundle, hspec)
    c = _numeric_matrix(hspec.coeffs, 2, "coeffs")
    P = momenta(bundle, hspec)
    n = bundle.dim
    W = bundle.window if bundle.window is not None else np.eye(n)
    W2 = np.kron(W, np.eye(2))
    D2 = D @ D
    rhs = sum(c[i, j] * np.kron(P[i] @ P[j], np.eye(2)) for i in range(2) for j in range(2))
    rhs = rhs + 0.5 * sum(np.kron(P[i] @ P[j], sig[i] @ sig[j] - sig[j] @ sig[i]) for i in range(2) for j in range(2))
    Hkin = sum(0.5 * c[i, j] * sym(P[i] @ P[j]) for i in range(2) for j in range(2))
    scale = max(op_norm(W2 @ D2 @ W2), 1.0)
    return {
        "corrected": op_norm(W2 @ (D2 - rhs) @ W2) / scale,
        "plain": op_norm(W2 @ (D2 - 2 * np.kron(Hkin, np.eye(2))) @ W2) / scale,
        "momentum_commutator": op_norm(W @ (P[0] @ P[1] - P[1] @ P[0]) @ W),
    }
