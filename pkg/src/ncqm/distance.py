"""Spectral distance between states on a finite model.

``d(chi, phi) = sup { |chi(a) - phi(a)| : a = a* in span(A), ||[D, a]|| <= 1 }``.

The supremum is a convex program in the real coordinates of the Hermitian
part of ``span(A)``.  By homogeneity it equals ``1 / min ||[D, a]||`` over
the slice ``chi(a) - phi(a) = 1``, which is solved with a log-sum-exp
smoothing of the spectral norm and L-BFGS under a shrinking smoothing
parameter.  The lower bound is recomputed from the primal point; the
smoothed gradient is a nuclear-norm dual certificate which, made exactly
feasible, gives the upper bound.  So ``lower <= d <= upper`` holds up to
floating point however accurate the optimizer was.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .dynamics import HamiltonianSpec, dirac_operator
from .models import ModelBundle, ModelInputError
from .numerics import HSBasis, as_cmatrix, op_norm

STATE_TOL = 1e-12


class DistanceInputError(ValueError):
    """Malformed states, non-Hermitian D or incompatible dimensions."""


@dataclass
class StateSpec:
    """A state on ``B(C^n)`` restricted to the algebra: a unit vector or a density matrix."""

    kind: str
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.kind == "pure":
            if self.data.ndim != 1 or abs(np.linalg.norm(self.data) - 1.0) > STATE_TOL:
                raise DistanceInputError("pure state must be a unit vector")
        elif self.kind == "density":
            rho = self.data
            if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
                raise DistanceInputError("density matrix must be square")
            if np.abs(rho - rho.conj().T).max() > STATE_TOL or abs(np.trace(rho) - 1.0) > STATE_TOL:
                raise DistanceInputError("density matrix must be Hermitian with unit trace")
            if np.linalg.eigvalsh(rho).min() < -STATE_TOL:
                raise DistanceInputError("density matrix must be positive semidefinite")
        else:
            raise DistanceInputError(f"unknown state kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def __call__(self, a: np.ndarray) -> complex:
        if self.kind == "pure":
            v = self.data
            return complex(v.conj() @ a @ v)
        return complex(np.trace(self.data @ a))

    @classmethod
    def pure(cls, v) -> "StateSpec":
        v = np.asarray(v, dtype=complex)
        return cls("pure", v / np.linalg.norm(v))

    @classmethod
    def point(cls, n: int, k: int) -> "StateSpec":
        v = np.zeros(n, dtype=complex)
        v[k] = 1.0
        return cls("pure", v)

    @classmethod
    def from_dict(cls, d: dict) -> "StateSpec":
        kind = d.get("kind", "pure")
        raw = d["data"]

        def cplx(x):
            return complex(x[0], x[1]) if isinstance(x, (list, tuple)) else complex(x)

        if kind == "pure":
            return cls("pure", np.array([cplx(x) for x in raw]))
        return cls("density", np.array([[cplx(x) for x in row] for row in raw]))


def hermitian_real_basis(basis: HSBasis, tol: float = 1e-10) -> list[np.ndarray]:
    """Real-orthonormal basis (for ``Re tr(X* Y)``) of the Hermitian elements of a *-closed span."""
    cands = []
    for B in basis.matrices():
        cands.append((B + B.conj().T) / 2)
        cands.append((B - B.conj().T) / 2j)
    n = basis.dim
    X = np.array([np.concatenate([C.real.ravel(), C.imag.ravel()]) for C in cands]).T
    u, s, _ = np.linalg.svd(X, full_matrices=False)
    keep = s > tol * max(s[0], 1.0)
    out = []
    for col in u[:, keep].T:
        H = (col[: n * n] + 1j * col[n * n:]).reshape(n, n)
        out.append((H + H.conj().T) / 2)
    return out


@dataclass
class DistanceResult:
    distance: float
    lower: float
    upper: float
    witness: np.ndarray | None
    infinite: bool = False
    iters: int = 0
    converged: bool = True
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        def num(x):
            return x if math.isfinite(x) else "inf"

        return {"distance": num(self.distance), "lower": num(self.lower), "upper": num(self.upper),
                "iters": self.iters, "infinite": self.infinite, "converged": self.converged,
                "notes": list(self.notes)}


class _Program:
    """Coordinates, constraint operators and objective for one ``(D, chi, phi)``."""

    def __init__(self, herm: list[np.ndarray], D: np.ndarray, chi: StateSpec, phi: StateSpec):
        n = herm[0].shape[0]
        if D.shape[0] % n:
            raise DistanceInputError(f"D of size {D.shape[0]} does not act on C^{n} (x) C^k")
        k = D.shape[0] // n
        self.n, self.k = n, k
        self.herm = herm
        self.D = D
        lift = (lambda h: h) if k == 1 else (lambda h: np.kron(h, np.eye(k)))
        self.lift = lift
        self.M = [1j * (D @ lift(h) - lift(h) @ D) for h in herm]
        self.ell = np.array([(chi(h) - phi(h)).real for h in herm])
        G = np.array([np.concatenate([M.real.ravel(), M.imag.ravel()]) for M in self.M]).T
        _, s, vh = np.linalg.svd(G, full_matrices=False)
        tol = 1e-10 * max(s[0] if s.size else 0.0, 1e-300)
        rank = int(np.sum(s > tol))
        self.range = vh[:rank].T
        self.kernel = vh[rank:].T

    def norm_of(self, x) -> float:
        return op_norm(sum(xj * M for xj, M in zip(x, self.M)))

    def element(self, x) -> np.ndarray:
        return sum(xj * h for xj, h in zip(x, self.herm))

    def ratio(self, x) -> float:
        nrm = self.norm_of(x)
        return float(self.ell @ x) / nrm if nrm > 0 else 0.0


def _smooth_norm(lams: np.ndarray, mu: float):
    """``mu log sum_k (e^{l_k/mu} + e^{-l_k/mu})`` and the signed weights of its gradient."""
    z = np.concatenate([lams, -lams]) / mu
    zmax = z.max()
    w = np.exp(z - zmax)
    tot = w.sum()
    val = mu * (zmax + np.log(tot))
    k = lams.size
    return val, (w[:k] - w[k:]) / tot


def _solve(prog: _Program, tol: float, max_iters: int):
    """Minimize ``||M(x)||`` on ``{l(x) = 1}`` by smoothed L-BFGS with continuation.

    Returns the primal point, a certified upper bound from the dual
    certificate and the number of function evaluations.
    """
    V = prog.range
    r = V.shape[1]
    Mr = np.array([sum(V[j, i] * prog.M[j] for j in range(len(prog.M))) for i in range(r)])
    lr = V.T @ prog.ell
    x0 = lr / (lr @ lr)
    # orthonormal complement of lr inside the range coordinates
    q, _ = np.linalg.qr(np.column_stack([lr, np.eye(r)]))
    Z = q[:, 1:r]
    evals = 0

    def point(w):
        return x0 + Z @ w

    def fg(w, mu):
        nonlocal evals
        evals += 1
        y = point(w)
        lam, vec = np.linalg.eigh(np.tensordot(y, Mr, axes=1))
        val, wt = _smooth_norm(lam, mu)
        G = (vec * wt) @ vec.conj().T
        grad = np.real(np.einsum("ij,kji->k", G, Mr))
        return val, Z.T @ grad

    w = np.zeros(r - 1)
    nrm0 = op_norm(np.tensordot(x0, Mr, axes=1))
    mu = 0.1 * nrm0
    target = tol * 1e-3 * nrm0 / max(np.log(2 * Mr.shape[1]), 1.0)
    per_stage = max(max_iters // 12, 50)
    while True:
        if r > 1:
            res = minimize(fg, w, args=(mu,), jac=True, method="L-BFGS-B",
                           options={"maxiter": per_stage, "gtol": 1e-14, "ftol": 1e-15})
            w = res.x
        if mu <= target or evals >= max_iters:
            break
        mu = max(mu * 0.1, target)
    y = point(w)
    lam, vec = np.linalg.eigh(np.tensordot(y, Mr, axes=1))
    _, wt = _smooth_norm(lam, mu)
    G = (vec * wt) @ vec.conj().T
    g = np.real(np.einsum("ij,kji->k", G, Mr))
    nu = float(g @ lr) / float(lr @ lr)
    Y = G / nu if abs(nu) > 1e-300 else np.zeros_like(G)
    # exact feasibility: tr(Y M_i) = l_i via a least-squares correction inside span{M_i}
    defect = lr - np.real(np.einsum("ij,kji->k", Y, Mr))
    gram = np.real(np.einsum("aij,bji->ab", Mr, Mr))
    coef = np.linalg.lstsq(gram, defect, rcond=None)[0]
    Y = Y + np.tensordot(coef, Mr, axes=1)
    upper = float(np.abs(np.linalg.eigvalsh((Y + Y.conj().T) / 2)).sum())
    return V @ y, upper, evals


def connes_distance(bundle: ModelBundle | HSBasis, D, chi: StateSpec, phi: StateSpec,
                    tol: float = 1e-4, max_iters: int = 10000) -> DistanceResult:
    """Spectral distance with certified bounds; ``distance`` is the lower bound.

    ``D`` acts on ``C^n`` or on ``C^n (x) C^k`` (elements enter as ``a (x) I_k``).
    When ``chi - phi`` does not vanish on the Hermitian elements commuting
    with ``D`` the distance is infinite.
    """
    D = as_cmatrix(D)
    if np.abs(D - D.conj().T).max() > 1e-10 * max(1.0, np.abs(D).max()):
        raise DistanceInputError("D must be Hermitian")
    basis = bundle if isinstance(bundle, HSBasis) else bundle.algebra_basis()
    if chi.dim != basis.dim or phi.dim != basis.dim:
        raise DistanceInputError("states must live on the representation space")
    herm = hermitian_real_basis(basis)
    prog = _Program(herm, D, chi, phi)
    scale = max(np.abs(prog.ell).max(), 1e-300)
    if prog.kernel.shape[1] and np.abs(prog.kernel.T @ prog.ell).max() > 1e-9 * max(scale, 1.0):
        return DistanceResult(math.inf, math.inf, math.inf, None, infinite=True,
                              notes=["states differ on an element commuting with D"])
    if np.abs(prog.ell).max() < 1e-14 or prog.range.shape[1] == 0:
        return DistanceResult(0.0, 0.0, 0.0, np.zeros((basis.dim, basis.dim), complex))
    x, upper, iters = _solve(prog, tol, max_iters)
    nrm = prog.norm_of(x)
    lower = max(float(prog.ell @ x) / nrm, 0.0) if nrm > 0 else 0.0
    gap = upper - lower
    converged = gap <= tol * max(upper, 1e-12)
    notes = [] if converged else [f"bound gap {gap:.3e} exceeds tolerance"]
    return DistanceResult(lower, lower, upper, prog.element(x / nrm), iters=iters,
                          converged=converged, notes=notes)


def brute_force_distance(bundle: ModelBundle | HSBasis, D, chi: StateSpec, phi: StateSpec,
                         samples: int = 20000, refine: int = 8, seed: int = 0) -> float:
    """Oracle: random search over directions then Nelder-Mead on the ratio ``l(x) / ||[D, a(x)]||``."""
    D = as_cmatrix(D)
    basis = bundle if isinstance(bundle, HSBasis) else bundle.algebra_basis()
    prog = _Program(hermitian_real_basis(basis), D, chi, phi)
    if prog.kernel.shape[1] and np.abs(prog.kernel.T @ prog.ell).max() > 1e-9:
        return math.inf
    V = prog.range
    r = V.shape[1]
    if r == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    Y = rng.normal(size=(samples, r))
    vals = np.array([prog.ratio(V @ y) for y in Y])
    best = float(vals.max())
    for i in np.argsort(vals)[-refine:]:
        res = minimize(lambda y: -prog.ratio(V @ y), Y[i], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000 * r})
        best = max(best, -float(res.fun))
    return best


@dataclass
class GaugeSensitivity:
    gauges: list
    results: list[DistanceResult]

    @property
    def distances(self) -> list[float]:
        return [r.distance for r in self.results]

    @property
    def variation(self) -> float:
        d = [x for x in self.distances if math.isfinite(x)]
        return max(d) - min(d) if d else 0.0

    def to_dict(self) -> dict:
        return {"gauges": self.gauges, "results": [r.to_dict() for r in self.results],
                "variation": self.variation}


def gauge_sensitivity(bundle: ModelBundle, hspec: HamiltonianSpec, chi: StateSpec, phi: StateSpec,
                      gauge_list: list, tol: float = 1e-4, jobs: int = 1) -> GaugeSensitivity:
    """Distances for Dirac operators that differ only in the gauge potentials."""
    if bundle.family != "nc_torus":
        raise ModelInputError("gauge_sensitivity needs a torus model")
    Ds = [dirac_operator(bundle, replace(hspec, gauge=g)) for g in gauge_list]

    def run(D):
        return connes_distance(bundle, D, chi, phi, tol=tol)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(run, Ds))
    else:
        results = [run(D) for D in Ds]
    return GaugeSensitivity(list(gauge_list), results)
