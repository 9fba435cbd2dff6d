"""Derivations of the torus into ``A (x) A^o`` and their decomposition.

A derivation is fixed by its values on the generators, expanded as

    delta(U1) = sum c1[m,n,p,q] U1^{n+1} U2^m (U1^o)^p (U2^o)^q
    delta(U2) = sum c2[m,n,p,q] U1^n U2^{m+1} (U1^o)^p (U2^o)^q

with indices in ``[-R..R]^4`` (stored with offset ``R``).  It splits as
``delta = sum_i c^i delta_i + [B, .]``: the standard derivations
``delta_i = [d_i, .]`` with coefficients in ``A^o`` (read off the
``m = n = 0`` slice) and an inner part with

    B = sum d[m,n,p,q] U1^n U2^m (U1^o)^p (U2^o)^q,
    d = c1 / (lambda^{-m} - 1)   (m != 0),
    d = c2 / (1 - lambda^{-n})   (n != 0).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .models import ModelBundle, ModelInputError, nc_torus_lambda, parse_theta
from .numerics import op_norm
from .report import CheckReport

RESONANCE_TOL = 1e-12
NEAR_RESONANCE = 1e-6
BRANCH_TOL = 1e-10


class DerivationInputError(ValueError):
    """Coefficient data violate the consistency relation or are malformed."""


class ResonanceError(RuntimeError):
    """``lambda^n`` is (numerically) 1 at an index the decomposition needs."""

    def __init__(self, n: int, msg: str):
        super().__init__(msg)
        self.n = n


def _grids(R: int):
    r = np.arange(-R, R + 1)
    m, n = np.meshgrid(r, r, indexing="ij")
    return m[:, :, None, None], n[:, :, None, None]


@dataclass
class DerivationCoeffs:
    R: int
    c1: np.ndarray
    c2: np.ndarray
    lam: complex

    def __post_init__(self):
        shape = (2 * self.R + 1,) * 4
        self.c1 = np.asarray(self.c1, dtype=complex)
        self.c2 = np.asarray(self.c2, dtype=complex)
        if self.c1.shape != shape or self.c2.shape != shape:
            raise DerivationInputError(f"coefficient tensors must have shape {shape}")
        if abs(abs(self.lam) - 1.0) > 1e-12:
            raise DerivationInputError("lambda must lie on the unit circle")

    def consistency_residual(self) -> tuple[float, tuple[int, int, int, int]]:
        """Worst ``|c1 (lambda^{-n} - 1) + c2 (lambda^{-m} - 1)|`` and where it occurs."""
        m, n = _grids(self.R)
        lam = self.lam
        res = np.abs(self.c1 * (lam ** (-n) - 1) + self.c2 * (lam ** (-m) - 1))
        idx = np.unravel_index(int(np.argmax(res)), res.shape)
        return float(res[idx]), tuple(int(i) - self.R for i in idx)

    # -- I/O ---------------------------------------------------------------
    def _rows(self, tensor):
        R = self.R
        for idx in zip(*np.nonzero(tensor)):
            v = tensor[idx]
            yield [int(i) - R for i in idx] + [float(v.real), float(v.imag)]

    def to_dict(self) -> dict:
        return {"R": self.R, "lambda": [self.lam.real, self.lam.imag],
                "c1": list(self._rows(self.c1)), "c2": list(self._rows(self.c2))}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["tensor", "m", "n", "p", "q", "re", "im"])
        for name, t in (("c1", self.c1), ("c2", self.c2)):
            for row in self._rows(t):
                w.writerow([name] + row)
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: dict, lam: complex | None = None) -> "DerivationCoeffs":
        R = int(d["R"])
        if lam is None:
            if "lambda" in d:
                lam = complex(*d["lambda"])
            elif "theta" in d:
                lam = nc_torus_lambda(parse_theta(d["theta"]))
            else:
                raise DerivationInputError("coefficient data need lambda or theta")
        shape = (2 * R + 1,) * 4
        out = {"c1": np.zeros(shape, complex), "c2": np.zeros(shape, complex)}
        for name in ("c1", "c2"):
            for row in d.get(name, []):
                m, n, p, q, re, im = row
                idx = tuple(int(v) + R for v in (m, n, p, q))
                if not all(0 <= i < 2 * R + 1 for i in idx):
                    raise DerivationInputError(f"index {(m, n, p, q)} outside radius {R}")
                out[name][idx] += complex(re, im)
        return cls(R, out["c1"], out["c2"], lam)

    @classmethod
    def from_csv(cls, text: str, R: int, lam: complex) -> "DerivationCoeffs":
        rows = {"c1": [], "c2": []}
        reader = csv.DictReader(io.StringIO(text))
        for r in reader:
            rows[r["tensor"]].append([int(r["m"]), int(r["n"]), int(r["p"]), int(r["q"]),
                                      float(r["re"]), float(r["im"])])
        return cls.from_dict({"R": R, **rows}, lam)


@dataclass
class Decomposition:
    """Standard coefficients (``A^o``-polynomials over ``(p, q)``) plus inner tensor ``d``."""

    R: int
    lam: complex
    standard: tuple[np.ndarray, np.ndarray]
    inner: np.ndarray
    residual: float
    branch_agreement: float
    branch: str = "m"
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        R = self.R

        def rows2(t):
            return [[int(p) - R, int(q) - R, float(t[p, q].real), float(t[p, q].imag)]
                    for p, q in zip(*np.nonzero(t))]

        def rows4(t):
            return [[int(i) - R for i in idx] + [float(t[idx].real), float(t[idx].imag)]
                    for idx in zip(*np.nonzero(t))]

        return {"R": R, "lambda": [self.lam.real, self.lam.imag],
                "standard": {"c1": rows2(self.standard[0]), "c2": rows2(self.standard[1])},
                "inner": rows4(self.inner), "residual": self.residual,
                "branch_agreement": self.branch_agreement, "branch": self.branch, "notes": self.notes}


def check_diophantine(lam: complex, max_n: int = 200, order_k: float = 2.0) -> CheckReport:
    """Growth of the small denominators ``q_n = 1 / |1 - lambda^n|``.

    The fitted order is ``k = max_n log(q_n / q_1) / log n`` (so that
    ``q_n <= q_1 n^k`` on the sampled range).  Passes when no resonance
    ``lambda^n = 1`` occurs and ``k <= order_k``.
    """
    lam = complex(lam)
    if abs(abs(lam) - 1.0) > 1e-12 or abs(lam - 1.0) < RESONANCE_TOL:
        raise ModelInputError("lambda must lie on the unit circle and differ from 1")
    ns = np.arange(1, max_n + 1)
    den = np.abs(1.0 - lam**ns)
    notes = []
    resonant = ns[den < RESONANCE_TOL]
    if resonant.size:
        n0 = int(resonant[0])
        notes.append(f"resonance at n = {n0}: rational theta, decomposition denominators vanish")
        rep = CheckReport("diophantine", f"lambda={lam:.6f}", [("resonance", math.inf)], order_k, {}, notes)
        rep.resonant_n = n0
        rep.order = math.inf
        return rep
    q = 1.0 / den
    k_est = max(float(np.max(np.log(q[1:] / q[0]) / np.log(ns[1:]))), 0.0) if max_n > 1 else 0.0
    worst = int(ns[np.argmax(q / ns)])
    notes.append(f"fitted order k = {k_est:.4f}; largest q_n/n at n = {worst}")
    near = ns[den < NEAR_RESONANCE]
    if near.size:
        notes.append(f"near-resonant n: {near[:10].tolist()}")
    rep = CheckReport("diophantine", f"lambda={lam:.6f}", [("fitted_order", k_est)], order_k, {}, notes)
    rep.resonant_n = None
    rep.order = k_est
    return rep


def synthesize(R: int, lam: complex, standard: tuple[np.ndarray, np.ndarray], inner: np.ndarray) -> DerivationCoeffs:
    """Coefficients of ``sum_i c^i delta_i + [B, .]`` from its two parts."""
    m, n = _grids(R)
    lam = complex(lam)
    inner = np.asarray(inner, dtype=complex).copy()
    inner[R, R] = 0.0
    c1 = inner * (lam ** (-m) - 1)
    c2 = inner * (1 - lam ** (-n))
    c1[R, R] += standard[0]
    c2[R, R] += standard[1]
    return DerivationCoeffs(R, c1, c2, lam)


def decompose_derivation(coeffs: DerivationCoeffs, consistency_tol: float = 1e-12) -> Decomposition:
    """Split a derivation into its standard and inner parts.

    Raises :class:`DerivationInputError` when the consistency relation fails
    (naming the worst index) and :class:`ResonanceError` when a populated
    index needs a denominator ``|lambda^k - 1| < 1e-6``.
    """
    R, lam = coeffs.R, complex(coeffs.lam)
    scale = max(np.abs(coeffs.c1).max(), np.abs(coeffs.c2).max(), 1.0)
    worst, where = coeffs.consistency_residual()
    if worst > consistency_tol * scale:
        raise DerivationInputError(f"consistency relation violated by {worst:.3e} at (m,n,p,q) = {where}")
    m, n = _grids(R)
    denm = lam ** (-m) - 1.0
    denn = 1.0 - lam ** (-n)
    populated = (np.abs(coeffs.c1) > 0) | (np.abs(coeffs.c2) > 0)
    populated[R, R] = False
    for arr, grid in ((denm, m), (denn, n)):
        bad = populated & (np.abs(arr) < NEAR_RESONANCE) & (np.broadcast_to(grid, arr.shape * 0 + populated.shape) != 0)
        if bad.any():
            idx = tuple(int(i) for i in np.argwhere(bad)[0])
            k = abs(idx[0] - R) if arr is denm else abs(idx[1] - R)
            raise ResonanceError(k, f"near-resonant denominator at lambda^{k}")
    mb = np.broadcast_to(m != 0, populated.shape)
    nb = np.broadcast_to(n != 0, populated.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        dm = np.where(mb, coeffs.c1 / np.where(mb, denm, 1.0), 0.0)
        dn = np.where(nb, coeffs.c2 / np.where(nb, denn, 1.0), 0.0)
    both = mb & nb
    agreement = float(np.abs(dm - dn)[both].max()) if both.any() else 0.0
    if agreement > BRANCH_TOL * scale:
        raise DerivationInputError(f"branch formulas disagree by {agreement:.3e}")
    d = np.where(mb, dm, dn)
    d[R, R] = 0.0
    standard = (coeffs.c1[R, R].copy(), coeffs.c2[R, R].copy())
    back = synthesize(R, lam, standard, d)
    residual = float(max(np.abs(back.c1 - coeffs.c1).max(), np.abs(back.c2 - coeffs.c2).max()))
    return Decomposition(R, lam, standard, d, residual, agreement, "m",
                         ["m-branch used where both branches are defined; d[0,0,p,q] set to zero"])


def random_derivation(R: int, lam: complex, rng: np.random.Generator, width: float = 1.5,
                      standard_scale: float = 1.0):
    """A known ``(standard, inner)`` pair with a Gaussian-decay inner tail."""
    r = np.arange(-R, R + 1)
    g = np.exp(-(r[:, None, None, None] ** 2 + r[None, :, None, None] ** 2
                 + r[None, None, :, None] ** 2 + r[None, None, None, :] ** 2) / (2 * width**2))
    shape = (2 * R + 1,) * 4
    inner = g * (rng.normal(size=shape) + 1j * rng.normal(size=shape))
    inner[R, R] = 0.0
    g2 = g[R, R]
    standard = tuple(standard_scale * g2 * (rng.normal(size=shape[2:]) + 1j * rng.normal(size=shape[2:]))
                     for _ in range(2))
    return standard, inner


# ---------------------------------------------------------------------------
# realization on a truncated lattice


class _Monomials:
    def __init__(self, bundle: ModelBundle):
        g = bundle.rep.generators
        o = bundle.rep.opposite_generators
        self.base = {"U1": g["U1"], "U2": g["U2"], "U1o": o["U1o"], "U2o": o["U2o"]}
        self._pow: dict = {}

    def power(self, label: str, k: int) -> np.ndarray:
        key = (label, k)
        if key not in self._pow:
            M = self.base[label]
            if k < 0:
                M, k = M.conj().T, -k
            self._pow[key] = np.linalg.matrix_power(M, k)
        return self._pow[key]

    def word(self, a: int, b: int, p: int, q: int) -> np.ndarray:
        return self.power("U1", a) @ self.power("U2", b) @ self.power("U1o", p) @ self.power("U2o", q)


def realize_derivation(bundle: ModelBundle, dec: Decomposition, tol: float = 1e-9) -> CheckReport:
    """Materialize ``delta = sum_i c^i(U^o) [d_i, .] + [B, .]`` and compare with the expansion.

    Needs a truncated torus whose radius is at least ``2R + margin``;
    residuals are windowed and relative to the size of the expected values.
    """
    if bundle.family != "nc_torus" or bundle.spec.params.get("mode", "cyclic") != "truncated":
        raise ModelInputError("realize_derivation needs a truncated torus model")
    R = dec.R
    N = int(bundle.spec.params.get("N"))
    if N < 2 * R + bundle.spec.window_margin or bundle.spec.window_margin < 2 * R + 1:
        raise ModelInputError(f"lattice radius {N} / margin {bundle.spec.window_margin} too small for R = {R}")
    mono = _Monomials(bundle)
    n = bundle.dim
    rng = range(-R, R + 1)

    def aopoly(t):
        out = np.zeros((n, n), dtype=complex)
        for p in rng:
            for q in rng:
                c = t[p + R, q + R]
                if c != 0:
                    out += c * mono.word(0, 0, p, q)
        return out

    B = np.zeros((n, n), dtype=complex)
    for idx in zip(*np.nonzero(dec.inner)):
        m, nn, p, q = (int(i) - R for i in idx)
        B += dec.inner[idx] * mono.word(nn, m, p, q)
    C = [aopoly(dec.standard[0]), aopoly(dec.standard[1])]
    d = [bundle.named_operators["d1"], bundle.named_operators["d2"]]

    def delta(X):
        return sum(C[i] @ (d[i] @ X - X @ d[i]) for i in range(2)) + (B @ X - X @ B)

    coeffs = synthesize(R, dec.lam, dec.standard, dec.inner)
    U1, U2 = mono.base["U1"], mono.base["U2"]
    exp1 = np.zeros((n, n), dtype=complex)
    exp2 = np.zeros((n, n), dtype=complex)
    for idx in zip(*np.nonzero(coeffs.c1)):
        m, nn, p, q = (int(i) - R for i in idx)
        exp1 += coeffs.c1[idx] * mono.word(nn + 1, m, p, q)
    for idx in zip(*np.nonzero(coeffs.c2)):
        m, nn, p, q = (int(i) - R for i in idx)
        exp2 += coeffs.c2[idx] * mono.word(nn, m + 1, p, q)
    residuals = []
    for lab, got, want in (("delta(U1)", delta(U1), exp1), ("delta(U2)", delta(U2), exp2)):
        diff = op_norm(bundle.compress(got - want))
        scale = max(op_norm(bundle.compress(want)), 1.0)
        residuals.append((lab, diff / scale))
    return CheckReport("realize_derivation", bundle.label, residuals, tol, bundle.window_params(),
                       ["inner part acts as [B, .]"])
