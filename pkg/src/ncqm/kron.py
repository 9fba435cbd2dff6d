"""Operators on ``C^F (x) C^F`` kept as short sums of Kronecker products.

The Moyal model lives on the left-regular representation of a truncated
Fock algebra, whose Hilbert space has dimension ``F^2``.  Every operator we
need there is a low-rank combination ``sum_i A_i (x) B_i``, so we never form
the ``F^2 x F^2`` matrices.
"""
from __future__ import annotations

import numpy as np


class KronSum:
    """``sum_i left[i] (x) right[i]`` with ``F x F`` factors.

    Term lists are recompressed after every product or sum (an SVD of the
    realigned operator), so the term count stays at the true Kronecker rank.
    """

    __array_priority__ = 100

    def __init__(self, left, right, compress=True):
        self.left = [np.asarray(a, dtype=complex) for a in left]
        self.right = [np.asarray(b, dtype=complex) for b in right]
        if not self.left:
            raise ValueError("KronSum needs at least one term")
        self.F = self.left[0].shape[0]
        if compress:
            self._compress()

    @classmethod
    def left_mult(cls, a):
        a = np.asarray(a, dtype=complex)
        return cls([a], [np.eye(a.shape[0])], compress=False)

    @classmethod
    def right_mult(cls, b):
        """Operator ``psi -> psi b`` on row-major vectorised ``psi``."""
        b = np.asarray(b, dtype=complex)
        return cls([np.eye(b.shape[0])], [b.T], compress=False)

    @classmethod
    def identity(cls, F):
        return cls([np.eye(F)], [np.eye(F)], compress=False)

    @property
    def shape(self):
        return (self.F * self.F, self.F * self.F)

    @property
    def nterms(self):
        return len(self.left)

    def _compress(self, rtol=1e-15):
        F = self.F
        P = np.stack([a.reshape(-1) for a in self.left], axis=1)
        Q = np.stack([b.reshape(-1) for b in self.right], axis=1)
        Qp, Rp = np.linalg.qr(P)
        Qq, Rq = np.linalg.qr(Q)
        U, s, Vh = np.linalg.svd(Rp @ Rq.T)
        keep = s > rtol * s[0] if s.size and s[0] > 0 else np.zeros(1, dtype=bool)
        if not keep.any():
            self.left = [np.zeros((F, F), dtype=complex)]
            self.right = [np.zeros((F, F), dtype=complex)]
            return
        newP = Qp @ (U[:, keep] * s[keep])
        newQ = Qq @ Vh[keep].T
        self.left = [newP[:, k].reshape(F, F) for k in range(newP.shape[1])]
        self.right = [newQ[:, k].reshape(F, F) for k in range(newQ.shape[1])]

    def __matmul__(self, other):
        if isinstance(other, KronSum):
            L, R = [], []
            for a, b in zip(self.left, self.right):
                for c, d in zip(other.left, other.right):
                    L.append(a @ c)
                    R.append(b @ d)
            return KronSum(L, R)
        return NotImplemented

    def __add__(self, other):
        if isinstance(other, KronSum):
            return KronSum(self.left + other.left, self.right + other.right)
        if np.isscalar(other):
            return self + other * KronSum.identity(self.F)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return KronSum([-a for a in self.left], self.right, compress=False)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return KronSum([c * a for a in self.left], self.right, compress=False)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def conj(self):
        return KronSum([a.conj() for a in self.left], [b.conj() for b in self.right], compress=False)

    @property
    def T(self):
        return KronSum([a.T for a in self.left], [b.T for b in self.right], compress=False)

    def dagger(self):
        return KronSum([a.conj().T for a in self.left], [b.conj().T for b in self.right], compress=False)

    def to_dense(self):
        return sum(np.kron(a, b) for a, b in zip(self.left, self.right))

    def compress_window(self, w):
        """``(w (x) w) X (w (x) w)`` restricted to the window block, with ``w`` an index array."""
        ix = np.ix_(w, w)
        return KronSum([a[ix] for a in self.left], [b[ix] for b in self.right])

    def hs_norm(self):
        ga = np.array([[np.vdot(a, c) for c in self.left] for a in self.left])
        gb = np.array([[np.vdot(b, d) for d in self.right] for b in self.right])
        return float(np.sqrt(max(np.real(np.sum(ga * gb)), 0.0)))

    def partial_trace_right(self):
        """``tr_2 X``: an ``F x F`` matrix."""
        return sum(a * np.trace(b) for a, b in zip(self.left, self.right))

    def partial_trace_left(self):
        return sum(b * np.trace(a) for a, b in zip(self.left, self.right))

    def trace(self):
        return complex(sum(np.trace(a) * np.trace(b) for a, b in zip(self.left, self.right)))


def lr_projection_residual(X: KronSum, left_only: bool = True):
    """Distance of ``X`` from ``{c (x) I}`` (or ``{c (x) I + I (x) d}``).

    Returns ``(out_of_span_norm, c, d)`` where ``d`` is ``None`` for the
    left-only subspace.  Both projections are orthogonal in the HS sense.
    """
    m = X.F
    I = np.eye(m)
    c = X.partial_trace_right() / m
    if left_only:
        P = KronSum([c], [I], compress=False)
        return (X - P).hs_norm(), c, None
    d = X.partial_trace_left() / m - (X.trace() / m**2) * I
    P = KronSum([c, I], [I, d], compress=False)
    return (X - P).hs_norm(), c, d


def kron_op_norm(X: KronSum, iters: int = 200, seed: int = 0) -> float:
    """Spectral norm of a Kronecker sum by power iteration on ``X^dagger X``.

    The operator acts on ``F x F`` matrices as ``Y -> sum_i A_i Y B_i^T``,
    so no ``F^2 x F^2`` matrix is formed.
    """
    rng = np.random.default_rng(seed)
    F = X.F
    Y = rng.normal(size=(F, F)) + 1j * rng.normal(size=(F, F))
    Y /= np.linalg.norm(Y)
    est = 0.0
    for _ in range(iters):
        Z = sum(a @ Y @ b.T for a, b in zip(X.left, X.right))
        Y = sum(a.conj().T @ Z @ b.conj() for a, b in zip(X.left, X.right))
        nrm = np.linalg.norm(Y)
        if nrm == 0.0:
            return 0.0
        new = float(np.sqrt(nrm))
        Y /= nrm
        if abs(new - est) <= 1e-12 * new:
            return new
        est = new
    return est
