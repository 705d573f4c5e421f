"""Rank-revealing dense linear algebra and symplectic-matrix helpers.

Everything here is a pure function of its arguments.  Returned arrays are
marked read-only so that bundles can be shared between callers safely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

DEFAULT_REL_TOL = 1e-12

SPACES = ("range", "rowspace", "nullspace", "left_nullspace")


def as_matrix(A, name="matrix"):
    """Return `A` as a finite 2-D float array, raising ValueError otherwise."""
    arr = np.array(A, dtype=float)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _frozen(arr):
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


def _fix_signs(B):
    # Largest-magnitude entry of each column made positive; near-ties go to
    # the lowest row index so the choice does not depend on rounding noise.
    B = B.copy()
    for j in range(B.shape[1]):
        col = np.abs(B[:, j])
        if col.size == 0:
            continue
        i = int(np.flatnonzero(col >= col.max() - 1e-12)[0])
        if B[i, j] < 0:
            B[:, j] = -B[:, j]
    return B


def _canonical_basis(B):
    """Deterministic orthonormal basis for the column span of `B`.

    Rows are picked by pivoted QR, the span is rewritten so that it is the
    identity on those rows, and the result is re-orthonormalized in order.
    """
    n, k = B.shape
    if k == 0 or n == 0:
        return B.copy()
    _, _, piv = scipy.linalg.qr(B.T, pivoting=True, mode="economic")
    rows = np.sort(piv[:k])
    C = B @ np.linalg.inv(B[rows, :])
    Q, R = np.linalg.qr(C)
    Q = Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))
    return _fix_signs(Q)


def _clusters(values, tol):
    groups = []
    start = 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i - 1] - values[i] > tol:
            groups.append((start, i))
            start = i
    return groups


@dataclass(frozen=True)
class SvdBundle:
    """Narrowed SVD ``A = U1 @ diag(sigma_r) @ V1.T`` with numerical rank."""

    U1: np.ndarray
    U2: np.ndarray
    sigma_r: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    rank: int
    tolerance_used: float

    @property
    def U(self):
        return np.hstack([self.U1, self.U2])

    @property
    def V(self):
        return np.hstack([self.V1, self.V2])

    @property
    def shape(self):
        return (self.U1.shape[0], self.V1.shape[0])

    def reconstruct(self):
        return (self.U1 * self.sigma_r) @ self.V1.T


def svd(A, rel_tol=DEFAULT_REL_TOL, abs_tol=0.0):
    """Narrowed singular value decomposition with a relative rank threshold.

    The rank is the number of singular values above
    ``rel_tol * sigma_1 * max(m, n)`` (or `abs_tol`, if larger; useful when
    the whole matrix may be rounding noise).  Subnormal singular values are
    never counted, so the pseudoinverse cannot overflow.  Singular vectors are made
    deterministic: inside each cluster of (numerically) equal singular
    values the basis of V is canonicalized, U is then derived from
    ``A V / sigma``, and the null-space blocks U2, V2 are canonicalized on
    their own.  Every column of V (and of U2) has its largest entry positive.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    A = as_matrix(A)
    m, n = A.shape
    if m == 0 or n == 0:
        U_full, s, V_full = np.eye(m), np.zeros(0), np.eye(n)
    else:
        U_full, s, Vt = np.linalg.svd(A, full_matrices=True)
        V_full = Vt.T
    sigma1 = float(s[0]) if s.size else 0.0
    tol = max(rel_tol * sigma1 * max(m, n), abs_tol, np.finfo(float).tiny)
    r = int(np.sum(s > tol)) if sigma1 > 0 else 0

    V1 = np.empty((n, r))
    U1 = np.empty((m, r))
    for lo, hi in _clusters(s[:r], tol):
        block = _canonical_basis(V_full[:, lo:hi]) if hi - lo > 1 else _fix_signs(V_full[:, lo:hi])
        V1[:, lo:hi] = block
        U1[:, lo:hi] = (A @ block) / s[lo:hi].mean()
    # re-orthonormalize U1 columns against drift inside merged clusters
    if r:
        Q, R = np.linalg.qr(U1)
        U1 = Q * np.sign(np.diag(R))

    V2 = _canonical_basis(V_full[:, r:])
    U2 = _canonical_basis(U_full[:, r:])
    return SvdBundle(
        U1=_frozen(U1),
        U2=_frozen(U2),
        sigma_r=_frozen(s[:r]),
        V1=_frozen(V1),
        V2=_frozen(V2),
        rank=r,
        tolerance_used=tol,
    )


def pinv(A, rel_tol=DEFAULT_REL_TOL, bundle=None):
    """Moore-Penrose pseudoinverse ``V1 diag(1/sigma) U1^T``."""
    b = bundle if bundle is not None else svd(A, rel_tol)
    return _frozen((b.V1 / b.sigma_r) @ b.U1.T if b.rank else np.zeros(b.shape[::-1]))


def projector(A, space, rel_tol=DEFAULT_REL_TOL, bundle=None):
    """Orthogonal projector onto one of the four fundamental spaces of `A`.

    `space` is one of ``range`` (U1 U1^T), ``rowspace`` (V1 V1^T),
    ``nullspace`` (V2 V2^T) or ``left_nullspace`` (U2 U2^T).
    """
    b = bundle if bundle is not None else svd(A, rel_tol)
    basis = {
        "range": b.U1,
        "rowspace": b.V1,
        "nullspace": b.V2,
        "left_nullspace": b.U2,
    }.get(space)
    if basis is None:
        raise ValueError(f"unknown space {space!r}; expected one of {SPACES}")
    return _frozen(basis @ basis.T)


def orthonormal_range(A, rel_tol=DEFAULT_REL_TOL):
    """Orthonormal basis of the column space of `A` (U1 of its SVD)."""
    return svd(A, rel_tol).U1


def null_space(A, rel_tol=DEFAULT_REL_TOL):
    """Orthonormal basis of the null space of `A` (V2 of its SVD)."""
    return svd(A, rel_tol).V2


def symplectic_form(q):
    """The standard ``[[0, I], [-I, 0]]`` matrix of size 2q."""
    I = np.eye(q)
    Z = np.zeros((q, q))
    return np.block([[Z, I], [-I, Z]])


def _half_dim(W):
    W = as_matrix(W, "W")
    rows, cols = W.shape
    if rows != cols or rows % 2:
        raise ValueError(f"symplectic test needs an even square matrix, got {W.shape}")
    return W, rows // 2


def symplectic_defect(W):
    """``max |W^T sigma W - sigma|``."""
    W, q = _half_dim(W)
    s = symplectic_form(q)
    return float(np.abs(W.T @ s @ W - s).max()) if q else 0.0


def is_symplectic(W, tol=1e-9):
    return symplectic_defect(W) <= tol


def symplectic_inverse(W, tol=1e-8):
    """Inverse of a symplectic matrix from its blocks, ``[[H^T, -F^T], [-G^T, E^T]]``."""
    W, q = _half_dim(W)
    defect = symplectic_defect(W)
    if defect > tol:
        raise ValueError(f"matrix is not symplectic (defect {defect:.3e})")
    E, F = W[:q, :q], W[:q, q:]
    G, H = W[q:, :q], W[q:, q:]
    return _frozen(np.block([[H.T, -F.T], [-G.T, E.T]]))


def same_subspace(A, B, tol=1e-8):
    """True when the column spans of two orthonormal bases coincide.

    Compared through their projectors, ``max |P_A - P_B| <= tol``.
    """
    return projector_distance(A, B) <= tol


def projector_distance(A, B):
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    return float(np.abs(A @ A.T - B @ B.T).max()) if A.shape[0] else 0.0
