"""Builders for the five model families.

Each builder returns a :class:`ModelBundle`: the represented algebra plus
distinguished operators (derivation generators, projections, sigma, ...),
a basis-index layout and, for truncated lattices, the window projector on
which the algebraic relations are asserted.

Lattice models come in two modes.  ``cyclic`` uses clock/shift matrices on
``Z_N`` and satisfies the defining relations exactly (rational theta only).
``truncated`` uses shifts on ``{-N..N}`` that annihilate at the boundary;
relations then hold only inside the window ``|n| <= N - window_margin``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .algebra import (
    AlgebraRep,
    algebra_span,
    bimodule_span,
    center,
    gell_mann,
    gns_self_rep,
)
from .kron import KronSum, lr_projection_residual
from .numerics import HSBasis, NumericsInputError, dagger, hs_norm, op_norm, orthonormalize

FAMILIES = ("finite_sum", "almost_commutative", "moyal", "double_torus", "nc_torus")


class ModelInputError(ValueError):
    """Invalid model parameters or layout."""


def parse_theta(value) -> Fraction | float:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        try:
            if "/" in value:
                p, q = value.split("/")
                return Fraction(int(p), int(q))
            return float(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelInputError(f"cannot parse theta {value!r}") from exc
    if isinstance(value, int):
        return Fraction(value)
    return float(value)


@dataclass
class ModelSpec:
    family: str
    params: dict = field(default_factory=dict)
    window_margin: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModelInputError(f"unknown model family {self.family!r}")
        if self.window_margin < 0:
            raise ModelInputError("window_margin must be nonnegative")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        if "family" not in d:
            raise ModelInputError("model spec lacks 'family'")
        return cls(d["family"], dict(d.get("params", {})), int(d.get("window_margin", 0)))

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        params = {k: (f"{v.numerator}/{v.denominator}" if isinstance(v, Fraction) else v) for k, v in self.params.items()}
        return {"family": self.family, "params": params, "window_margin": self.window_margin}


class Lattice1D:
    """Index set of one lattice direction: ``Z_N`` or ``{-N..N}``."""

    def __init__(self, N: int, mode: str):
        if mode not in ("cyclic", "truncated"):
            raise ModelInputError(f"unknown lattice mode {mode!r}")
        if N < 1:
            raise ModelInputError("lattice size must be positive")
        self.N, self.mode = N, mode
        if mode == "cyclic":
            lo = -(N // 2)
            self.values = list(range(lo, lo + N))
        else:
            self.values = list(range(-N, N + 1))
        self.lo, self.hi = self.values[0], self.values[-1]
        self.size = len(self.values)

    def shift(self, v: int, k: int = 1):
        """Label reached from ``v`` by ``k`` steps, or ``None`` past a truncation edge."""
        w = v + k
        if self.mode == "cyclic":
            return (w - self.lo) % self.N + self.lo
        return w if self.lo <= w <= self.hi else None

    def in_window(self, v: int, margin: int) -> bool:
        return self.lo + margin <= v <= self.hi - margin

    @property
    def radius(self) -> int:
        return self.N if self.mode == "truncated" else self.N // 2


class ModelBundle:
    """A represented algebra together with the operators a model singles out.

    ``exact`` marks finite and cyclic models, where spans saturate and the
    full span bases are used as probes; truncated models probe with
    generators and rely on Leibniz-rule reduction.
    """

    def __init__(self, spec, rep, named_operators, layout, window=None, exact=True,
                 center_elements=None, center_generators=None, label=None, span_cap=None):
        self.spec = spec
        self.rep = rep
        self.named_operators = dict(named_operators)
        self.layout = list(layout)
        self._index = {qn: i for i, qn in enumerate(self.layout)}
        self.window = window
        self.exact = exact
        self.center_elements = center_elements
        self.center_generators = center_generators
        self.label = label or spec.family
        self.span_cap = span_cap if span_cap is not None else rep.degree_cap
        self._cache: dict = {}
        for name, op in self.named_operators.items():
            if op.shape != (rep.hilbert_dim, rep.hilbert_dim):
                raise ModelInputError(f"named operator {name} has wrong size")

    # -- layout -----------------------------------------------------------
    @property
    def metadata(self) -> dict:
        return {"layout": self.layout, "window_dim": self.window_dim, "exact": self.exact}

    def index_of(self, qn) -> int:
        return self._index[tuple(qn) if isinstance(qn, (list, tuple)) else qn]

    def quantum_numbers(self, idx: int):
        return self.layout[idx]

    @property
    def dim(self) -> int:
        return self.rep.hilbert_dim

    @property
    def family(self) -> str:
        return self.spec.family

    # -- windows ----------------------------------------------------------
    @property
    def window_dim(self) -> int:
        return self.dim if self.window is None else int(round(np.real(np.trace(self.window))))

    def compress(self, X):
        if self.window is None:
            return X
        return self.window @ X @ self.window

    def window_norm(self, X) -> float:
        """HS norm of ``W X W`` per window state, so ``||c I|| = |c|``."""
        return hs_norm(self.compress(X)) / math.sqrt(max(self.window_dim, 1))

    def window_params(self) -> dict:
        return {"margin": self.spec.window_margin, "window_dim": self.window_dim, "hilbert_dim": self.dim}

    # -- symbols ----------------------------------------------------------
    def symbols(self) -> dict:
        syms = {"I": np.eye(self.dim, dtype=complex)}
        syms.update(self.rep.closed_generators())
        if self.rep.j_conj is not None or self.rep.opposite_generators is not None:
            syms.update(self.rep.closed_generators(self.rep.opposite_gens()))
        syms.update(self.named_operators)
        return syms

    def polynomial(self, terms) -> np.ndarray:
        """Evaluate ``[{"word": [...], "coeff": [re, im]}, ...]``; ``X*`` is the adjoint of ``X``."""
        syms = self.symbols()
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for term in terms:
            c = term.get("coeff", [1.0, 0.0])
            c = complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)
            M = np.eye(self.dim, dtype=complex)
            for sym in term.get("word", []):
                if sym in syms:
                    M = M @ syms[sym]
                elif sym.endswith("*") and sym[:-1] in syms:
                    M = M @ dagger(syms[sym[:-1]])
                else:
                    raise ModelInputError(f"unknown symbol {sym!r} in word {term.get('word')}")
            out += c * M
        return out

    def resolve(self, label: str):
        syms = self.symbols()
        if label in syms:
            return syms[label]
        raise ModelInputError(f"unknown operator label {label!r}")

    # -- spans ------------------------------------------------------------
    def algebra_basis(self) -> HSBasis:
        return algebra_span(self.rep)

    def bimodule_basis(self) -> HSBasis:
        if "bimodule" not in self._cache:
            self._cache["bimodule"] = bimodule_span(self.rep, 2 * self.span_cap)
        return self._cache["bimodule"]

    def center_basis(self) -> HSBasis:
        if "center" not in self._cache:
            if self.center_elements is not None:
                self._cache["center"] = orthonormalize(self.center_elements)
            else:
                self._cache["center"] = center(self.rep)
        return self._cache["center"]

    def _compressed(self, which: str) -> HSBasis:
        key = "w_" + which
        if key not in self._cache:
            base = {"algebra": self.algebra_basis, "bimodule": self.bimodule_basis, "center": self.center_basis}[which]()
            if self.window is None:
                self._cache[key] = base
            else:
                self._cache[key] = orthonormalize([self.compress(B) for B in base.matrices()], dim=self.dim)
        return self._cache[key]

    def membership(self, X, which: str = "algebra", ref: float | None = None) -> tuple[float, float]:
        """Windowed distance of ``X`` from a span.

        Returns ``(absolute, relative)``: the HS norm of the part of ``W X W``
        outside the compressed span, and that norm divided by ``ref`` (the
        natural size of ``X``; defaults to ``||W X W||``).
        """
        Y = self.compress(X)
        basis = self._compressed(which)
        out = hs_norm(basis.out_of_span(Y))
        scale = hs_norm(Y) if ref is None else ref
        return out, out / max(scale, 1e-300)

    # -- probes -----------------------------------------------------------
    def algebra_probes(self, limit: int | None = None):
        if self.exact:
            mats = self.algebra_basis().matrices()
            items = [(f"A[{k}]", M) for k, M in enumerate(mats)]
        else:
            items = list(self.rep.closed_generators().items())
        return items if limit is None else items[:limit]

    def center_probes(self, limit: int | None = None):
        if self.center_generators is not None and not self.exact:
            items = list(self.center_generators.items())
        else:
            items = [(f"Z[{k}]", M) for k, M in enumerate(self.center_basis().matrices())]
        return items if limit is None else items[:limit]

    def opposite_probes(self, limit: int | None = None):
        gens = self.rep.opposite_gens()
        if self.exact:
            from .algebra import opposite_span

            items = [(f"Ao[{k}]", M) for k, M in enumerate(opposite_span(self.rep).matrices())]
        else:
            items = list(self.rep.closed_generators(gens).items())
        return items if limit is None else items[:limit]

    def weak_pairs(self):
        """``(z, b)`` probe pairs for the weak uncertainty check."""
        return [(z, b) for z in self.center_probes() for b in self.algebra_probes()]


# ---------------------------------------------------------------------------
# finite sums of matrix algebras


def build_finite_sum(spec: ModelSpec) -> ModelBundle:
    if spec.family != "finite_sum":
        raise ModelInputError("build_finite_sum needs family finite_sum")
    blocks = spec.params.get("blocks", spec.params.get("block_sizes"))
    if not blocks:
        raise ModelInputError("finite_sum needs nonempty 'blocks'")
    try:
        rep, projections, layout = gns_self_rep(blocks)
    except NumericsInputError as exc:
        raise ModelInputError(str(exc)) from exc
    named = dict(projections)
    for lab, g in rep.generators.items():
        if lab.startswith("T"):
            named[lab] = g
    return ModelBundle(spec, rep, named, layout.entries, window=None, exact=True,
                       label=f"finite_sum{tuple(layout.block_sizes)}")


# ---------------------------------------------------------------------------
# C(S^1) (x) M_n


def build_almost_commutative(spec: ModelSpec) -> ModelBundle:
    if spec.family != "almost_commutative":
        raise ModelInputError("build_almost_commutative needs family almost_commutative")
    M = int(spec.params.get("M", 12))
    n = int(spec.params.get("n", 2))
    margin = spec.window_margin
    if M < 4 or n < 2:
        raise ModelInputError("almost_commutative needs M >= 4 and n >= 2")
    if margin >= M:
        raise ModelInputError("window_margin must be smaller than the Fourier cutoff M")
    cap = int(spec.params.get("span_cap", 4))
    ks = list(range(-M, M + 1))
    L = len(ks)
    shift = np.zeros((L, L), dtype=complex)
    for i in range(L - 1):
        shift[i + 1, i] = 1.0
    In = np.eye(n)
    U = np.kron(shift, In)
    dk = np.kron(np.diag(np.array(ks, dtype=float)), In).astype(complex)
    Ts = [np.kron(np.eye(L), T) for T in gell_mann(n)]
    gens = {"U": U}
    for a, T in enumerate(Ts):
        gens[f"T{a + 1}"] = T
    flip = np.zeros((L, L), dtype=complex)
    for i in range(L):
        flip[L - 1 - i, i] = 1.0
    K = np.kron(flip, In)
    w = np.array([abs(k) <= M - margin for k in ks], dtype=float)
    W = np.kron(np.diag(w), In).astype(complex)
    rep = AlgebraRep(L * n, gens, degree_cap=cap, j_conj=K, opposite_generators={"Uo": U}, window=W)
    Ustar = dagger(U)
    center_elems = [np.eye(L * n, dtype=complex)]
    P = np.eye(L * n, dtype=complex)
    Q = np.eye(L * n, dtype=complex)
    for _ in range(cap):
        P, Q = U @ P, Ustar @ Q
        center_elems += [P, Q]
    named = {"d": dk}
    for a, T in enumerate(Ts):
        named[f"T{a + 1}"] = T
    layout = [(k, f) for k in ks for f in range(n)]
    return ModelBundle(spec, rep, named, layout, window=W, exact=False,
                       center_elements=center_elems, center_generators={"U": U, "U*": Ustar},
                       label=f"almost_commutative(M={M},n={n})", span_cap=cap)


# ---------------------------------------------------------------------------
# Moyal plane on the left-regular representation of a truncated Fock algebra


class MoyalBundle(ModelBundle):
    """Moyal plane acting on ``HS(C^F) = C^F (x) C^F`` by left multiplication.

    Operators are :class:`ncqm.kron.KronSum` objects.  ``x1, x2`` act from the
    left, ``x1o, x2o`` from the right; ``d1, d2`` are the Hermitian generators
    of the standard derivations (``[x_l, d_k] = i delta_kl``) and
    ``p1, p2`` the commutant elements built from them.
    """

    def __init__(self, spec, F, theta, margin):
        self.F, self.theta = F, theta
        a = np.diag(np.sqrt(np.arange(1, F, dtype=float)), k=1).astype(complex)
        ad = dagger(a)
        s = math.sqrt(theta / 2.0)
        self.x_fock = [s * (a + ad), 1j * s * (ad - a)]
        x1, x2 = (KronSum.left_mult(x) for x in self.x_fock)
        x1o, x2o = (KronSum.right_mult(x) for x in self.x_fock)
        d1 = (x2 - x2o) * (1.0 / theta)
        d2 = (x1 - x1o) * (-1.0 / theta)
        # p_k = d_k - eps_kl x_l / theta commutes with every left multiplication
        p1 = d1 - x2 * (1.0 / theta)
        p2 = d2 + x1 * (1.0 / theta)
        named = {"x1": x1, "x2": x2, "x1o": x1o, "x2o": x2o, "d1": d1, "d2": d2, "p1": p1, "p2": p2}
        self.widx = np.arange(F - margin)
        rep = AlgebraRep.__new__(AlgebraRep)
        rep.hilbert_dim = F * F
        rep.generators = {"x1": x1, "x2": x2}
        rep.degree_cap = 1
        rep.j_conj = None
        rep.opposite_generators = {"x1o": x1o, "x2o": x2o}
        rep.window = None
        rep.star_closed = False
        self.spec = spec
        self.rep = rep
        self.named_operators = named
        self.layout = [(i, j) for i in range(F) for j in range(F)]
        self._index = {qn: i for i, qn in enumerate(self.layout)}
        self.window = None
        self.exact = False
        self.center_elements = None
        self.center_generators = None
        self.label = f"moyal(F={F},theta={theta})"
        self.span_cap = 1
        self._cache = {}

    @property
    def window_dim(self) -> int:
        return len(self.widx) ** 2

    def window_params(self) -> dict:
        return {"margin": self.spec.window_margin, "window_dim": self.window_dim, "hilbert_dim": self.F**2}

    def compress(self, X: KronSum) -> KronSum:
        return X.compress_window(self.widx)

    def window_norm(self, X) -> float:
        return self.compress(X).hs_norm() / math.sqrt(self.window_dim)

    def identity(self) -> KronSum:
        return KronSum.identity(self.F)

    def symbols(self) -> dict:
        syms = {"I": self.identity()}
        syms.update(self.named_operators)
        return syms

    def polynomial(self, terms) -> KronSum:
        syms = self.symbols()
        out = 0.0 * self.identity()
        for term in terms:
            c = term.get("coeff", [1.0, 0.0])
            c = complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)
            M = self.identity()
            for sym in term.get("word", []):
                if sym not in syms:
                    raise ModelInputError(f"unknown symbol {sym!r}")
                M = M @ syms[sym]
            out = out + c * M
        return out

    def membership(self, X, which: str = "algebra", ref: float | None = None):
        if which not in ("algebra", "center", "bimodule"):
            raise ModelInputError(f"unknown subspace {which!r}")
        if which == "bimodule":
            # left and right multiplications generate every operator on HS(C^F)
            return 0.0, 0.0
        Y = self.compress(X)
        if which == "center":
            c = Y.trace() / self.window_dim
            out = (Y - c * KronSum.identity(len(self.widx))).hs_norm()
        else:
            out, _, _ = lr_projection_residual(Y, left_only=True)
        scale = Y.hs_norm() if ref is None else ref
        return out, out / max(scale, 1e-300)

    def algebra_probes(self, limit=None):
        items = list(self.rep.generators.items())
        return items if limit is None else items[:limit]

    def center_probes(self, limit=None):
        return [("I", self.identity())]

    def opposite_probes(self, limit=None):
        return list(self.rep.opposite_generators.items())

    def weak_pairs(self):
        # The Moyal models rest on [x_l, xdot_k] in A for the coordinates;
        # by the Leibniz rule this gives [a, xdot_k] in A for every a.
        xs = list(self.rep.generators.items())
        return [(z, b) for z in xs for b in xs]

    def algebra_basis(self):
        raise NotImplementedError("Moyal spans are handled in Kronecker form")


def build_moyal(spec: ModelSpec) -> MoyalBundle:
    if spec.family != "moyal":
        raise ModelInputError("build_moyal needs family moyal")
    F = int(spec.params.get("F", 32))
    theta = float(parse_theta(spec.params.get("theta", 1.0)))
    if F < 8:
        raise ModelInputError("moyal needs Fock cutoff F >= 8")
    if theta <= 0:
        raise ModelInputError("moyal needs theta > 0")
    if spec.window_margin >= F - 1:
        raise ModelInputError("Fock cutoff too small for the requested window margin")
    return MoyalBundle(spec, F, theta, spec.window_margin)


# ---------------------------------------------------------------------------
# lattices


def _lattice_window(lat: Lattice1D, margin: int, mode: str):
    if mode == "cyclic" and margin == 0:
        return None
    return [lat.in_window(v, margin) for v in lat.values]


def build_double_torus(spec: ModelSpec) -> ModelBundle:
    """Crossed product of C(T^2) by the flip of the two circles.

    Basis ``|n, m, s>`` with ``s = +1 / -1``.  ``U, V`` shift ``n, m``; sigma
    maps ``|n,m,s> -> |m,n,-s>``.  J and the opposite generators follow the
    explicit formulas of the model; ``d1, d2`` multiply by ``n, m``.
    """
    if spec.family != "double_torus":
        raise ModelInputError("build_double_torus needs family double_torus")
    N = int(spec.params.get("N", 6))
    mode = spec.params.get("mode", "cyclic")
    lat = Lattice1D(N, mode)
    margin = spec.window_margin
    if mode == "truncated" and margin >= N:
        raise ModelInputError("window_margin must be smaller than the lattice radius")
    layout = [(n, m, s) for n in lat.values for m in lat.values for s in (1, -1)]
    idx = {qn: i for i, qn in enumerate(layout)}
    D = len(layout)

    def op(action):
        M = np.zeros((D, D), dtype=complex)
        for (n, m, s), j in idx.items():
            r = action(n, m, s)
            if r is None:
                continue
            coeff, tgt = r
            if tgt is None or None in tgt:
                continue
            M[idx[tgt], j] += coeff
        return M

    sh = lat.shift
    U = op(lambda n, m, s: (1.0, (sh(n), m, s)))
    V = op(lambda n, m, s: (1.0, (n, sh(m), s)))
    sigma = op(lambda n, m, s: (1.0, (m, n, -s)))

    def neg(v):
        if mode == "cyclic":
            return sh(0, -v)
        return -v

    K = op(lambda n, m, s: (1.0, (neg(n), neg(m), 1)) if s == 1 else (1.0, (neg(m), neg(n), -1)))
    Uo = op(lambda n, m, s: (1.0, (sh(n), m, 1)) if s == 1 else (1.0, (n, sh(m), -1)))
    Vo = op(lambda n, m, s: (1.0, (n, sh(m), 1)) if s == 1 else (1.0, (sh(n), m, -1)))
    sigmao = op(lambda n, m, s: (1.0, (n, m, -s)))
    d1 = np.diag([float(n) for (n, m, s) in layout]).astype(complex)
    d2 = np.diag([float(m) for (n, m, s) in layout]).astype(complex)
    cap = int(spec.params.get("span_cap", (N + 1) if mode == "cyclic" else 4))
    win = _lattice_window(lat, margin, mode)
    W = None
    if win is not None:
        W = np.diag([1.0 if (win[lat.values.index(n)] and win[lat.values.index(m)]) else 0.0
                     for (n, m, s) in layout]).astype(complex)
    rep = AlgebraRep(D, {"U": U, "V": V, "sigma": sigma}, degree_cap=cap, j_conj=K,
                     opposite_generators={"Uo": Uo, "Vo": Vo, "sigmao": sigmao}, window=W)
    named = {"sigma": sigma, "d1": d1, "d2": d2}
    center_elems = center_gens = None
    if mode == "truncated":
        center_elems = []
        for a in range(-cap, cap + 1):
            for b in range(-cap, cap + 1):
                if abs(a) + abs(b) <= cap:
                    f = _mpow(U, a) @ _mpow(V, b)
                    center_elems.append(f + sigma @ f @ sigma)
        center_gens = {"U+V": U + V, "U*+V*": dagger(U) + dagger(V), "UV": U @ V, "U*V*": dagger(U @ V)}
    return ModelBundle(spec, rep, named, layout, window=W, exact=(mode == "cyclic"),
                       center_elements=center_elems, center_generators=center_gens,
                       label=f"double_torus(N={N},{mode})", span_cap=cap)


def _mpow(U, k):
    if k >= 0:
        return np.linalg.matrix_power(U, k)
    return np.linalg.matrix_power(dagger(U), -k)


def nc_torus_lambda(theta) -> complex:
    if isinstance(theta, str):
        theta = parse_theta(theta)
    if isinstance(theta, Fraction):
        # exact root of unity: reduce the angle before exponentiating
        return complex(np.exp(2j * np.pi * (theta.numerator % theta.denominator) / theta.denominator))
    return complex(np.exp(2j * np.pi * theta))


def build_nc_torus(spec: ModelSpec) -> ModelBundle:
    """Noncommutative torus on ``l^2`` of the lattice.

    ``U1 |n1,n2> = lambda^{n2} |n1+1,n2>``, ``U2 |n1,n2> = |n1,n2+1>``;
    opposite generators ``U1o |n1,n2> = |n1+1,n2>``,
    ``U2o |n1,n2> = lambda^{n1} |n1,n2+1>``.  ``J`` is the modular
    conjugation of the vacuum ``|0,0>``: ``J(a|0,0>) = a^*|0,0>``, which gives
    ``J|n1,n2> = lambda^{n1 n2} |-n1,-n2>`` composed with complex conjugation.
    ``d1, d2`` are the Hermitian generators ``-i delta_k = diag(n_k)``.
    """
    if spec.family != "nc_torus":
        raise ModelInputError("build_nc_torus needs family nc_torus")
    N = int(spec.params.get("N", 5))
    mode = spec.params.get("mode", "cyclic")
    theta = parse_theta(spec.params.get("theta", "1/5"))
    if mode == "cyclic":
        if not isinstance(theta, Fraction):
            raise ModelInputError("cyclic nc_torus requires a rational theta written 'p/q'")
        if N % theta.denominator != 0:
            raise ModelInputError(f"cyclic nc_torus needs q={theta.denominator} to divide N={N}")
    lat = Lattice1D(N, mode)
    margin = spec.window_margin
    if mode == "truncated" and margin >= N:
        raise ModelInputError("window_margin must be smaller than the lattice radius")
    lam = nc_torus_lambda(theta)
    layout = [(n1, n2) for n1 in lat.values for n2 in lat.values]
    idx = {qn: i for i, qn in enumerate(layout)}
    D = len(layout)

    def lam_pow(k):
        if isinstance(theta, Fraction):
            q = theta.denominator
            return complex(np.exp(2j * np.pi * ((theta.numerator * k) % q) / q))
        return complex(lam**k)

    def op(action):
        M = np.zeros((D, D), dtype=complex)
        for (n1, n2), j in idx.items():
            coeff, tgt = action(n1, n2)
            if None in tgt:
                continue
            M[idx[tgt], j] += coeff
        return M

    sh = lat.shift
    U1 = op(lambda n1, n2: (lam_pow(n2), (sh(n1), n2)))
    U2 = op(lambda n1, n2: (1.0, (n1, sh(n2))))
    U1o = op(lambda n1, n2: (1.0, (sh(n1), n2)))
    U2o = op(lambda n1, n2: (lam_pow(n1), (n1, sh(n2))))

    def neg(v):
        return sh(0, -v) if mode == "cyclic" else -v

    K = op(lambda n1, n2: (lam_pow(n1 * n2), (neg(n1), neg(n2))))
    d1 = np.diag([float(n1) for (n1, n2) in layout]).astype(complex)
    d2 = np.diag([float(n2) for (n1, n2) in layout]).astype(complex)
    cap = int(spec.params.get("span_cap", 2 * lat.radius if mode == "cyclic" else 4))
    win = _lattice_window(lat, margin, mode)
    W = None
    if win is not None:
        W = np.diag([1.0 if (win[lat.values.index(a)] and win[lat.values.index(b)]) else 0.0
                     for (a, b) in layout]).astype(complex)
    rep = AlgebraRep(D, {"U1": U1, "U2": U2}, degree_cap=cap, j_conj=K,
                     opposite_generators={"U1o": U1o, "U2o": U2o}, window=W)
    named = {"d1": d1, "d2": d2}
    center_elems = center_gens = None
    if mode == "truncated":
        center_elems = [np.eye(D, dtype=complex)]
        center_gens = {"I": np.eye(D, dtype=complex)}
    return ModelBundle(spec, rep, named, layout, window=W, exact=(mode == "cyclic"),
                       center_elements=center_elems, center_generators=center_gens,
                       label=f"nc_torus(N={N},theta={theta},{mode})", span_cap=cap)


BUILDERS = {
    "finite_sum": build_finite_sum,
    "almost_commutative": build_almost_commutative,
    "moyal": build_moyal,
    "double_torus": build_double_torus,
    "nc_torus": build_nc_torus,
}


def build_model(spec: ModelSpec | dict) -> ModelBundle:
    if isinstance(spec, dict):
        spec = ModelSpec.from_dict(spec)
    return BUILDERS[spec.family](spec)


def relation_residuals(bundle: ModelBundle) -> dict[str, float]:
    """Defining relations of the model, windowed; exact in cyclic mode."""
    ops = bundle.symbols()
    out: dict[str, float] = {}
    fam = bundle.family
    if fam == "nc_torus":
        lam = nc_torus_lambda(parse_theta(bundle.spec.params.get("theta", "1/5")))
        U1, U2, U1o, U2o = ops["U1"], ops["U2"], ops["U1o"], ops["U2o"]
        out["U1U2-lam*U2U1"] = op_norm(bundle.compress(U1 @ U2 - lam * U2 @ U1))
        out["[U1,U2o]"] = op_norm(bundle.compress(U1 @ U2o - U2o @ U1))
        out["[U2,U1o]"] = op_norm(bundle.compress(U2 @ U1o - U1o @ U2))
        out["[U1,U1o]"] = op_norm(bundle.compress(U1 @ U1o - U1o @ U1))
        out["[U2,U2o]"] = op_norm(bundle.compress(U2 @ U2o - U2o @ U2))
        out["U1oU2o-conj(lam)U2oU1o"] = op_norm(bundle.compress(U1o @ U2o - np.conj(lam) * U2o @ U1o))
    elif fam == "double_torus":
        U, V, s = ops["U"], ops["V"], ops["sigma"]
        out["sigmaU-Vsigma"] = op_norm(bundle.compress(s @ U - V @ s))
        out["sigma^2-I"] = op_norm(bundle.compress(s @ s) - bundle.compress(np.eye(bundle.dim)))
        out["sigma-sigma*"] = op_norm(s - dagger(s))
        out["[U,V]"] = op_norm(bundle.compress(U @ V - V @ U))
        for g in ("U", "V", "sigma"):
            for h in ("Uo", "Vo", "sigmao"):
                out[f"[{g},{h}]"] = op_norm(bundle.compress(ops[g] @ ops[h] - ops[h] @ ops[g]))
    elif fam == "almost_commutative":
        U = ops["U"]
        for k, T in bundle.named_operators.items():
            if k.startswith("T"):
                out[f"[U,{k}]"] = op_norm(bundle.compress(U @ T - T @ U))
        d = ops["d"]
        out["[d,U]-U"] = op_norm(bundle.compress(d @ U - U @ d - U))
    return out
