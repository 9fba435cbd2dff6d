"""Dense complex linear algebra used by every other module.

Operators are plain ``numpy`` arrays of dtype ``complex128``.  Subspaces of
operators are stored as :class:`HSBasis` objects, i.e. orthonormal bases with
respect to the Hilbert-Schmidt inner product ``<X, Y> = tr(X^dagger Y)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

RANK_TOL = 1e-10
_TINY = 1e-300


class NumericsInputError(ValueError):
    """Raised on malformed operator input (shape mismatch, non-finite data)."""


def as_cmatrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise NumericsInputError(f"expected a matrix, got array of shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericsInputError("matrix has non-finite entries")
    return A


def _square(A, name="matrix"):
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NumericsInputError(f"{name} must be square, got shape {A.shape}")


def commutator(A, B):
    """Return ``AB - BA``.

    Works for dense arrays and for any operator type implementing ``@`` and
    ``-`` (e.g. :class:`ncqm.kron.KronSum`).
    """
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise NumericsInputError(f"commutator of shapes {A.shape} and {B.shape}")
    return A @ B - B @ A


def anticommutator(A, B):
    if A.shape != B.shape:
        raise NumericsInputError(f"anticommutator of shapes {A.shape} and {B.shape}")
    return A @ B + B @ A


def dagger(A):
    return A.conj().T


def is_normal(A, tol=1e-12) -> bool:
    scale = max(np.linalg.norm(A), _TINY)
    return np.linalg.norm(A @ dagger(A) - dagger(A) @ A) <= tol * scale**2


def expm(A) -> np.ndarray:
    """Matrix exponential.

    Normal matrices go through a unitary eigendecomposition (so the exponential
    of an anti-Hermitian matrix is unitary to round-off); everything else falls
    back to scipy's scaling-and-squaring Pade approximant.
    """
    A = as_cmatrix(A)
    _square(A)
    if is_normal(A):
        # Schur form of a normal matrix is diagonal with unitary Z.
        T, Z = scipy.linalg.schur(A, output="complex")
        return (Z * np.exp(np.diag(T))) @ dagger(Z)
    return scipy.linalg.expm(A)


def hs_inner(X, Y) -> complex:
    return complex(np.vdot(X, Y))


def hs_norm(X) -> float:
    return float(np.linalg.norm(X))


def op_norm(X) -> float:
    """Spectral norm (largest singular value)."""
    if X.size == 0:
        return 0.0
    return float(np.linalg.norm(X, 2))


@dataclass(frozen=True)
class HSBasis:
    """Hilbert-Schmidt orthonormal basis of a subspace of ``n x n`` matrices.

    ``vectors`` holds the row-major vectorised basis matrices as columns, shape
    ``(n*n, rank)``.
    """

    dim: int
    vectors: np.ndarray
    tol: float = RANK_TOL
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __len__(self):
        return self.vectors.shape[1]

    @property
    def rank(self) -> int:
        return self.vectors.shape[1]

    def matrices(self) -> list[np.ndarray]:
        n = self.dim
        return [self.vectors[:, k].reshape(n, n) for k in range(self.rank)]

    def __getitem__(self, k) -> np.ndarray:
        return self.vectors[:, k].reshape(self.dim, self.dim)

    def project(self, X) -> np.ndarray:
        x = np.asarray(X, dtype=complex).reshape(-1)
        if x.size != self.dim * self.dim:
            raise NumericsInputError(
                f"operator of size {x.size} does not live in the ambient space of dimension {self.dim}"
            )
        if self.rank == 0:
            return np.zeros((self.dim, self.dim), dtype=complex)
        Q = self.vectors
        return (Q @ (Q.conj().T @ x)).reshape(self.dim, self.dim)

    def out_of_span(self, X) -> np.ndarray:
        return np.asarray(X, dtype=complex) - self.project(X)

    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the subspace, as an ``n^2 x n^2`` matrix."""
        if "P" not in self._cache:
            Q = self.vectors
            self._cache["P"] = Q @ Q.conj().T
        return self._cache["P"]


def orthonormalize(matrices, tol: float = RANK_TOL, dim: int | None = None) -> HSBasis:
    """HS-orthonormal basis of the linear span of ``matrices``.

    The numerical rank is the number of singular values of the stacked
    vectorised matrices above ``tol`` times the largest one.
    """
    mats = [np.asarray(M, dtype=complex) for M in matrices]
    if not mats:
        n = dim or 0
        return HSBasis(n, np.zeros((n * n, 0), dtype=complex), tol)
    n = mats[0].shape[0]
    for M in mats:
        if M.ndim != 2 or M.shape != (n, n):
            raise NumericsInputError("orthonormalize needs square matrices of one common size")
    stack = np.stack([M.reshape(-1) for M in mats], axis=1)
    return basis_from_columns(stack, n, tol)


def basis_from_columns(stack: np.ndarray, n: int, tol: float = RANK_TOL) -> HSBasis:
    if stack.shape[1] == 0:
        return HSBasis(n, np.zeros((n * n, 0), dtype=complex), tol)
    U, s, _ = np.linalg.svd(stack, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return HSBasis(n, np.zeros((n * n, 0), dtype=complex), tol)
    r = int(np.sum(s > tol * s[0]))
    return HSBasis(n, np.ascontiguousarray(U[:, :r]), tol)


def extend_basis(basis: HSBasis, matrices, tol: float = RANK_TOL) -> tuple[HSBasis, np.ndarray]:
    """Add ``matrices`` to ``basis``; return the new basis and the new columns only.

    Candidates are deflated against the existing basis twice (classical
    Gram-Schmidt with reorthogonalisation) and the remainder is kept where its
    singular values exceed ``tol`` relative to the candidates' own scale.
    """
    n = basis.dim
    if not matrices:
        return basis, np.zeros((n * n, 0), dtype=complex)
    C = np.stack([np.asarray(M, dtype=complex).reshape(-1) for M in matrices], axis=1)
    scale = np.linalg.norm(C, axis=0).max()
    if scale == 0.0:
        return basis, np.zeros((n * n, 0), dtype=complex)
    Q = basis.vectors
    for _ in range(2):
        if Q.shape[1]:
            C = C - Q @ (Q.conj().T @ C)
    U, s, _ = np.linalg.svd(C, full_matrices=False)
    r = int(np.sum(s > tol * scale))
    new = U[:, :r]
    if Q.shape[1] and r:
        new = new - Q @ (Q.conj().T @ new)
        new, _ = np.linalg.qr(new)
    return HSBasis(n, np.concatenate([Q, new], axis=1), basis.tol), new


def project_residual(X, basis: HSBasis) -> float:
    """Relative HS distance from ``X`` to the span of ``basis``, in ``[0, 1]``."""
    X = np.asarray(X, dtype=complex)
    if X.shape != (basis.dim, basis.dim):
        raise NumericsInputError(f"operator of shape {X.shape} vs basis dimension {basis.dim}")
    nx = hs_norm(X)
    return hs_norm(basis.out_of_span(X)) / max(nx, _TINY)


def eig_hermitian(A, tol: float = 1e-10):
    """Ascending eigenvalues and eigenvectors of a Hermitian matrix."""
    A = as_cmatrix(A)
    _square(A)
    scale = hs_norm(A)
    if hs_norm(A - dagger(A)) > tol * max(scale, _TINY):
        raise NumericsInputError("matrix is not Hermitian within tolerance")
    w, V = np.linalg.eigh(0.5 * (A + dagger(A)))
    return w, V


def hermitian_part(A):
    return 0.5 * (A + dagger(A))


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (X + dagger(X))


def subspace_intersection(a: HSBasis, b: HSBasis, tol: float = 1e-8) -> HSBasis:
    """Intersection of two subspaces via the principal angles between them.

    Directions whose principal cosine exceeds ``1 - tol`` span the intersection.
    """
    n = a.dim
    if a.rank == 0 or b.rank == 0:
        return HSBasis(n, np.zeros((n * n, 0), dtype=complex), a.tol)
    M = a.vectors.conj().T @ b.vectors
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    k = int(np.sum(s > 1.0 - tol))
    vecs = a.vectors @ U[:, :k]
    return HSBasis(n, vecs, a.tol)


def common_nullspace(maps: list[np.ndarray], n: int, tol: float = RANK_TOL) -> HSBasis:
    """Orthonormal basis of the joint kernel of linear maps on ``n x n`` matrices.

    Each map is an ``(m, n*n)`` matrix acting on row-major vectorised
    operators.  The kernel is read off the right singular vectors with
    singular value below ``tol`` times the largest one.
    """
    r = n * n
    # QR-reduce each block so memory stays at r x r however many maps are
    # stacked; an SVD of the factor keeps full precision (a Gram matrix would
    # square the condition number and hide near-kernel directions).
    R = np.zeros((0, r), dtype=complex)
    for m in maps:
        R = np.linalg.qr(np.concatenate([R, np.asarray(m, dtype=complex)], axis=0), mode="r")
    if R.shape[0] < r:
        R = np.concatenate([R, np.zeros((r - R.shape[0], r), dtype=complex)], axis=0)
    _, sv, Vh = np.linalg.svd(R)
    # the maps may vanish identically
    top = max(sv[0], max(np.linalg.norm(m, 2) for m in maps), _TINY)
    V = Vh[sv < tol * top].conj().T
    return HSBasis(n, np.ascontiguousarray(V), tol)


def left_mult_map(g: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> g X`` on row-major vectorised ``X``."""
    n = g.shape[0]
    return np.kron(g, np.eye(n))


def right_mult_map(g: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> X g`` on row-major vectorised ``X``."""
    n = g.shape[0]
    return np.kron(np.eye(n), g.T)


def sylvester_map(g: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> g X - X g`` on row-major vectorised ``X``."""
    return left_mult_map(g) - right_mult_map(g)
