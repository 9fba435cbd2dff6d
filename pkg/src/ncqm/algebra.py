"""Represented algebras: spans of words, commutants, centers, J and opposites."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    RANK_TOL,
    HSBasis,
    NumericsInputError,
    basis_from_columns,
    common_nullspace,
    dagger,
    extend_basis,
    hs_norm,
    is_normal,
    orthonormalize,
    subspace_intersection,
    sylvester_map,
)

SUBSPACE_TOL = 1e-8


class PreconditionError(RuntimeError):
    """An operation was called on a representation lacking required structure."""


@dataclass
class AlgebraRep:
    """An algebra given by generator matrices acting on ``C^hilbert_dim``.

    ``j_conj`` is the unitary part ``K`` of the antiunitary ``J = K o conj``.
    Generators whose label ends in ``*`` are adjoints and are added
    automatically for non-Hermitian generators when ``star_closed`` is set.
    """

    hilbert_dim: int
    generators: dict[str, np.ndarray]
    degree_cap: int = 4
    j_conj: np.ndarray | None = None
    opposite_generators: dict[str, np.ndarray] | None = None
    window: np.ndarray | None = None
    star_closed: bool = True
    _span: HSBasis | None = field(default=None, repr=False, compare=False)
    _opp_span: HSBasis | None = field(default=None, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        n = self.hilbert_dim
        for label, g in self.generators.items():
            if g.shape != (n, n):
                raise NumericsInputError(f"generator {label} has shape {g.shape}, expected {(n, n)}")
        if self.j_conj is not None:
            K = self.j_conj
            if hs_norm(K @ dagger(K) - np.eye(n)) > 1e-10 * np.sqrt(n):
                raise NumericsInputError("unitary part of J is not unitary")

    def closed_generators(self, gens: dict[str, np.ndarray] | None = None) -> dict[str, np.ndarray]:
        gens = dict(self.generators if gens is None else gens)
        if not self.star_closed:
            return gens
        out = {}
        for label, g in gens.items():
            out[label] = g
            if hs_norm(g - dagger(g)) > 1e-12 * max(hs_norm(g), 1.0):
                out[label + "*"] = dagger(g)
        return out

    def j_conjugate(self, X: np.ndarray) -> np.ndarray:
        """``J X J^{-1}`` for ``J = K o conj``."""
        if self.j_conj is None:
            raise PreconditionError("representation has no J")
        K = self.j_conj
        return K @ np.conj(X) @ dagger(K)

    def opposite(self, a: np.ndarray) -> np.ndarray:
        """``a^o = J a^* J^{-1}``."""
        return self.j_conjugate(dagger(a))

    def opposite_gens(self) -> dict[str, np.ndarray]:
        if self.opposite_generators is not None:
            return dict(self.opposite_generators)
        if self.j_conj is None:
            raise PreconditionError("representation has neither J nor opposite generators")
        return {label + "o": self.opposite(g) for label, g in self.generators.items()}


def words_span(gens: dict[str, np.ndarray], n: int, degree_cap: int, tol: float = RANK_TOL) -> HSBasis:
    """Span of all words of length <= ``degree_cap`` in ``gens`` (identity included).

    Built level by level: the words of length ``k`` are spanned by generators
    times the new directions found at length ``k - 1``; the loop stops early
    once a level adds nothing.  Generators are visited in sorted label order so
    the result is deterministic.
    """
    basis = orthonormalize([np.eye(n, dtype=complex)], tol)
    frontier = [basis[0]]
    labels = sorted(gens)
    for _ in range(degree_cap):
        cands = [gens[lab] @ B for lab in labels for B in frontier]
        basis, new = extend_basis(basis, cands, tol)
        if new.shape[1] == 0:
            break
        frontier = [new[:, k].reshape(n, n) for k in range(new.shape[1])]
    return basis


def algebra_span(rep: AlgebraRep) -> HSBasis:
    if rep.degree_cap < 1:
        raise NumericsInputError("degree_cap must be >= 1")
    with rep._lock:
        if rep._span is None:
            rep._span = words_span(rep.closed_generators(), rep.hilbert_dim, rep.degree_cap)
        return rep._span


def opposite_span(rep: AlgebraRep) -> HSBasis:
    with rep._lock:
        if rep._opp_span is None:
            gens = rep.opposite_gens()
            rep._opp_span = words_span(rep.closed_generators(gens), rep.hilbert_dim, rep.degree_cap)
        return rep._opp_span


def bimodule_span(rep: AlgebraRep, degree_cap: int | None = None) -> HSBasis:
    """Span of products ``a b^o``: words in generators and opposite generators."""
    gens = dict(rep.generators)
    gens.update(rep.opposite_gens())
    cap = degree_cap if degree_cap is not None else 2 * rep.degree_cap
    return words_span(rep.closed_generators(gens), rep.hilbert_dim, cap)


def antihomomorphism_residual(rep: AlgebraRep, samples: int = 8, seed: int = 0) -> float:
    """Worst ``||pi^o(ab) - pi^o(b) pi^o(a)||`` over random span elements."""
    if rep.j_conj is None:
        raise PreconditionError("antihomomorphism check needs J")
    span = algebra_span(rep)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        ca = rng.normal(size=span.rank) + 1j * rng.normal(size=span.rank)
        cb = rng.normal(size=span.rank) + 1j * rng.normal(size=span.rank)
        n = rep.hilbert_dim
        a = (span.vectors @ ca).reshape(n, n)
        b = (span.vectors @ cb).reshape(n, n)
        lhs = rep.opposite(a @ b)
        rhs = rep.opposite(b) @ rep.opposite(a)
        worst = max(worst, hs_norm(lhs - rhs) / max(hs_norm(a) * hs_norm(b), 1e-300))
    return worst


def _eigen_blocks(g: np.ndarray, tol: float = 1e-8):
    """Unitary eigenbasis of a normal matrix with eigenvalues grouped into clusters."""
    from scipy.linalg import schur

    T, Z = schur(g, output="complex")
    ev = np.diag(T)
    order = np.lexsort((ev.imag.round(9), ev.real.round(9)))
    ev, Z = ev[order], Z[:, order]
    groups: list[list[int]] = []
    for i, lam in enumerate(ev):
        for grp in groups:
            if abs(ev[grp[0]] - lam) < tol:
                grp.append(i)
                break
        else:
            groups.append([i])
    return Z, groups


def commutant_of(gens: list[np.ndarray], n: int, tol: float = RANK_TOL) -> HSBasis:
    """Orthonormal basis of ``{X : [X, g] = 0 for all g}``.

    When every generator is normal, the first-generator eigenbasis reduces
    the unknowns to block-diagonal matrices before the remaining Sylvester
    maps are imposed; otherwise the stacked Sylvester maps are solved
    directly.
    """
    gens = [np.asarray(g, dtype=complex) for g in gens]
    if not gens:
        return orthonormalize([np.eye(n)])
    if all(is_normal(g) for g in gens):
        best = None
        for g in gens:
            Z, groups = _eigen_blocks(g)
            cost = sum(len(grp) ** 2 for grp in groups)
            if best is None or cost < best[0]:
                best = (cost, Z, groups, g)
        _, Z, groups, g0 = best
        # parametrise X = Z Y Z^dagger with Y block diagonal on g0's eigenspaces
        cols = []
        for grp in groups:
            for i in grp:
                for j in grp:
                    cols.append(np.outer(Z[:, i], Z[:, j].conj()).reshape(-1))
        P = np.stack(cols, axis=1)
        rest = [g for g in gens if g is not g0]
        if not rest:
            return basis_from_columns(P, n, tol)
        null = _kernel([sylvester_map(g) @ P for g in rest], max(np.linalg.norm(g, 2) for g in rest), tol)
        return basis_from_columns(P @ null, n, tol)
    return common_nullspace([sylvester_map(g) for g in gens], n, tol)


def commutant(rep: AlgebraRep) -> HSBasis:
    if not rep.generators:
        raise NumericsInputError("commutant needs at least one generator")
    return commutant_of(list(rep.closed_generators().values()), rep.hilbert_dim)


def center(rep: AlgebraRep) -> HSBasis:
    """Elements of span(A) commuting with every generator.

    Solved inside the span: coefficients ``c`` with ``[g, sum c_i B_i] = 0``
    form the kernel of a small stacked matrix.  Equivalent to intersecting
    span(A) with the commutant.
    """
    span = algebra_span(rep)
    return center_within(span, list(rep.closed_generators().values()))


def center_within(span: HSBasis, gens: list[np.ndarray], tol: float = RANK_TOL) -> HSBasis:
    n = span.dim
    mats = span.matrices()
    rows = []
    for g in gens:
        rows.append(np.stack([(g @ B - B @ g).reshape(-1) for B in mats], axis=1))
    # relative to generator scale: commutators of HS-unit elements
    null = _kernel(rows, max(np.linalg.norm(g, 2) for g in gens), tol)
    return basis_from_columns(span.vectors @ null, n, tol)


def _kernel(blocks: list[np.ndarray], scale: float, tol: float) -> np.ndarray:
    """Right kernel of the row-stacked ``blocks``.

    Each block is reduced to its triangular QR factor first, so memory stays
    at (unknowns)^2 however many rows are stacked; the SVD of the combined
    factor keeps full double precision (a Gram matrix would square the
    condition number).  Singular values are compared with ``tol`` times the
    larger of the top singular value and ``scale``, so an identically
    vanishing map has a full kernel rather than a noise-determined one.
    """
    r = blocks[0].shape[1]
    R = np.zeros((0, r), dtype=complex)
    for B in blocks:
        R = np.linalg.qr(np.concatenate([R, B], axis=0), mode="r")
    if R.shape[0] < r:
        R = np.concatenate([R, np.zeros((r - R.shape[0], r), dtype=complex)], axis=0)
    _, sv, Vh = np.linalg.svd(R)
    top = max(sv[0] if sv.size else 0.0, scale, 1e-300)
    return Vh[sv < tol * top].conj().T


@dataclass(frozen=True)
class SubspaceReport:
    dimension_a: int
    dimension_b: int
    residual: float
    equal: bool

    def to_dict(self):
        return {
            "dimension_a": self.dimension_a,
            "dimension_b": self.dimension_b,
            "residual": self.residual,
            "equal": self.equal,
        }


def mutual_projection_residual(a: HSBasis, b: HSBasis) -> float:
    """Largest distance of a unit vector of one subspace from the other.

    Computed as the sine of the largest principal angle, in both directions.
    """
    if a.rank == 0 and b.rank == 0:
        return 0.0
    if a.rank == 0 or b.rank == 0:
        return 1.0

    def one_way(x: HSBasis, y: HSBasis) -> float:
        R = x.vectors - y.vectors @ (y.vectors.conj().T @ x.vectors)
        return float(np.linalg.norm(R, 2))

    return max(one_way(a, b), one_way(b, a))


def compare_subspaces(a: HSBasis, b: HSBasis, tol: float = SUBSPACE_TOL) -> SubspaceReport:
    res = mutual_projection_residual(a, b)
    return SubspaceReport(a.rank, b.rank, res, bool(a.rank == b.rank and res < tol))


def check_scalarity(rep: AlgebraRep, tol: float = SUBSPACE_TOL) -> SubspaceReport:
    """Compare span(J A J^{-1}) with the commutant of A."""
    if rep.j_conj is None:
        raise PreconditionError("scalarity check needs J")
    span = algebra_span(rep)
    conj = orthonormalize([rep.j_conjugate(B) for B in span.matrices()])
    return compare_subspaces(conj, commutant(rep), tol)


def intersect(a: HSBasis, b: HSBasis, tol: float = SUBSPACE_TOL) -> HSBasis:
    return subspace_intersection(a, b, tol)


def block_diag_embed(blocks: list[np.ndarray]) -> np.ndarray:
    from scipy.linalg import block_diag

    return block_diag(*blocks).astype(complex)


def gell_mann(n: int) -> list[np.ndarray]:
    """Hermitian generalised Gell-Mann basis of su(n), normalised ``tr(T_a T_b) = 2 delta``."""
    mats = []
    for j in range(n):
        for k in range(j + 1, n):
            S = np.zeros((n, n), dtype=complex)
            S[j, k] = S[k, j] = 1.0
            A = np.zeros((n, n), dtype=complex)
            A[j, k] = -1j
            A[k, j] = 1j
            mats += [S, A]
    for l in range(1, n):
        D = np.zeros((n, n), dtype=complex)
        D[:l, :l] = np.eye(l)
        D[l, l] = -l
        mats.append(np.sqrt(2.0 / (l * (l + 1))) * D)
    return mats


@dataclass
class BlockLayout:
    """Index bookkeeping for ``H = (+)_k M_{n_k}`` viewed as a vector space."""

    block_sizes: tuple[int, ...]

    def __post_init__(self):
        self.entries = [(k, i, j) for k, nk in enumerate(self.block_sizes) for i in range(nk) for j in range(nk)]
        self._index = {e: idx for idx, e in enumerate(self.entries)}

    @property
    def dim(self) -> int:
        return len(self.entries)

    def index(self, k: int, i: int, j: int) -> int:
        return self._index[(k, i, j)]

    def quantum_numbers(self, idx: int) -> tuple[int, int, int]:
        return self.entries[idx]


def gns_self_rep(block_sizes) -> tuple[AlgebraRep, dict[str, np.ndarray], BlockLayout]:
    """(+)_k M_{n_k} acting on itself by left multiplication.

    Returns the representation, the central projections ``P1..PK`` and the
    index layout.  ``J psi = psi^dagger`` and the opposite algebra acts by
    right multiplication.
    """
    sizes = tuple(int(s) for s in block_sizes)
    if not sizes or any(s <= 0 for s in sizes):
        raise NumericsInputError(f"block sizes must be positive, got {block_sizes}")
    layout = BlockLayout(sizes)
    D = layout.dim

    def left(k: int, a: np.ndarray) -> np.ndarray:
        L = np.zeros((D, D), dtype=complex)
        nk = sizes[k]
        for i in range(nk):
            for j in range(nk):
                for c in range(nk):
                    # (a psi)_{ic} = sum_j a_ij psi_jc
                    L[layout.index(k, i, c), layout.index(k, j, c)] += a[i, j]
        return L

    def right(k: int, a: np.ndarray) -> np.ndarray:
        R = np.zeros((D, D), dtype=complex)
        nk = sizes[k]
        for i in range(nk):
            for j in range(nk):
                for r in range(nk):
                    # (psi a)_{ri} = sum_j psi_rj a_ji
                    R[layout.index(k, r, i), layout.index(k, r, j)] += a[j, i]
        return R

    gens: dict[str, np.ndarray] = {}
    opp: dict[str, np.ndarray] = {}
    projections: dict[str, np.ndarray] = {}
    for k, nk in enumerate(sizes):
        P = left(k, np.eye(nk))
        projections[f"P{k + 1}"] = P
        gens[f"P{k + 1}"] = P
        opp[f"P{k + 1}o"] = right(k, np.eye(nk))
        for a, T in enumerate(gell_mann(nk)):
            gens[f"T{k + 1}_{a + 1}"] = left(k, T)
            opp[f"T{k + 1}_{a + 1}o"] = right(k, T)
    K = np.zeros((D, D), dtype=complex)
    for (k, i, j), idx in layout._index.items():
        K[layout.index(k, j, i), idx] = 1.0
    rep = AlgebraRep(
        hilbert_dim=D,
        generators=gens,
        degree_cap=max(2, max(s * s for s in sizes)),
        j_conj=K,
        opposite_generators=opp,
    )
    return rep, projections, layout
