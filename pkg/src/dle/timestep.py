"""One-step canonical evolution of a linear, possibly irregular, system.

A step between slices n and n+1 is fixed by three q x q matrices: the
symmetric ``L``, the coupling ``R`` and the symmetric ``Rbar``.  The
remaining block of the momentum equations is always ``Lbar = -R^T``.
Momenta are

    p_n     = L x_n + R x_{n+1}
    p_{n+1} = -R^T x_n + Rbar x_{n+1}

Phase vectors are plain arrays of length 2q laid out as ``(x, p)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DEFAULT_REL_TOL, SvdBundle, _frozen, as_matrix, pinv, svd

SYMMETRY_TOL = 1e-10
DEFAULT_CONSTRAINT_TOL = 1e-8


class ValidationError(ValueError):
    """Input matrices or vectors violate a structural requirement."""


class ConstraintViolation(ValueError):
    """A state does not lie on the pre-constraint surface of a move."""

    def __init__(self, message, residual, rows=None, slice_index=None):
        super().__init__(message)
        self.residual = np.asarray(residual, dtype=float)
        self.rows = rows
        self.slice_index = slice_index

    @property
    def residual_norm(self):
        return float(np.abs(self.residual).max()) if self.residual.size else 0.0


@dataclass(frozen=True)
class TimeStepSystem:
    """The matrix triple (L, R, Rbar) of one evolution step."""

    L: np.ndarray
    R: np.ndarray
    Rbar: np.ndarray

    def __post_init__(self):
        mats = {}
        for name in ("L", "R", "Rbar"):
            try:
                mats[name] = as_matrix(getattr(self, name), name)
            except ValueError as exc:
                raise ValidationError(str(exc)) from None
        q = mats["L"].shape[0]
        for name, m in mats.items():
            if m.shape != (q, q):
                raise ValidationError(f"{name} has shape {m.shape}, expected ({q}, {q})")
        for name in ("L", "Rbar"):
            m = mats[name]
            asym = float(np.abs(m - m.T).max()) if q else 0.0
            if asym > SYMMETRY_TOL:
                raise ValidationError(f"{name} is not symmetric (max asymmetry {asym:.3e})")
        for name, m in mats.items():
            object.__setattr__(self, name, _frozen(m))

    @property
    def q(self):
        return self.L.shape[0]

    @property
    def Lbar(self):
        return -self.R.T

    def momenta(self, x_n, x_next):
        """Pre-momentum at slice n and post-momentum at slice n+1."""
        x_n, x_next = _vec(x_n, self.q, "x_n"), _vec(x_next, self.q, "x_next")
        return self.L @ x_n + self.R @ x_next, -self.R.T @ x_n + self.Rbar @ x_next


@dataclass(frozen=True)
class EvolutionMove:
    """Linear evolution ``y' = E y + F lam`` valid on ``{y : C y = 0}``.

    For a forward move ``C`` is the pre-constraint at slice n and
    ``Cbar_next`` the post-constraint that every image satisfies at slice
    n+1.  A backward move has the same shape with the roles of the two
    slices exchanged.  ``svd_R`` is the SVD of the matrix that had to be
    inverted (R forward, Lbar backward).
    """

    E: np.ndarray
    F: np.ndarray
    C: np.ndarray
    Cbar_next: np.ndarray
    svd_R: SvdBundle
    direction: str = "forward"

    @property
    def q(self):
        return self.E.shape[0] // 2

    @property
    def r(self):
        return self.svd_R.rank

    @property
    def s(self):
        return self.q - self.r

    def constraint_rank(self, rel_tol=DEFAULT_REL_TOL):
        return svd(self.C, rel_tol).rank if self.C.size else 0


def _vec(v, n, name):
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (n,):
        raise ValidationError(f"{name} has length {arr.size}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


def _constraint_matrix(P, M):
    return np.hstack([-P @ M, P])


def build_move(sys, rel_tol=DEFAULT_REL_TOL):
    """Forward move from slice n to n+1."""
    b = svd(sys.R, rel_tol)
    Rp = pinv(sys.R, bundle=b)
    L, R, Rb = sys.L, sys.R, sys.Rbar
    E = np.block([[-Rp @ L, Rp], [-R.T - Rb @ Rp @ L, Rb @ Rp]])
    F = np.vstack([b.V2, Rb @ b.V2])
    # N(R^T) and N(Lbar^T) = N(R) projectors
    C = _constraint_matrix(b.U2 @ b.U2.T, L)
    Cbar = _constraint_matrix(b.V2 @ b.V2.T, Rb)
    return EvolutionMove(_frozen(E), _frozen(F), _frozen(C), _frozen(Cbar), b, "forward")


def build_backward_move(sys, rel_tol=DEFAULT_REL_TOL):
    """Backward move from slice n+1 to n, solving the post-momentum equation."""
    Lbar = sys.Lbar
    b = svd(Lbar, rel_tol)
    Lp = pinv(Lbar, bundle=b)
    L, R, Rb = sys.L, sys.R, sys.Rbar
    E = np.block([[-Lp @ Rb, Lp], [R - L @ Lp @ Rb, L @ Lp]])
    F = np.vstack([b.V2, L @ b.V2])
    C = _constraint_matrix(b.U2 @ b.U2.T, Rb)
    # images satisfy the forward pre-constraint at slice n, built on N(R^T) = N(Lbar)
    P = b.V2 @ b.V2.T
    Cbar = _constraint_matrix(P, L)
    return EvolutionMove(_frozen(E), _frozen(F), _frozen(C), _frozen(Cbar), b, "backward")


def pre_constraint_residual(move, y):
    """``C y``; zero exactly when `y` can be evolved by `move`."""
    return move.C @ _vec(y, 2 * move.q, "y")


def on_surface(C, y, tol=DEFAULT_CONSTRAINT_TOL):
    y = np.asarray(y, dtype=float)
    scale = max(1.0, float(np.abs(y).max()) if y.size else 0.0)
    res = C @ y
    return (float(np.abs(res).max()) if res.size else 0.0) <= tol * scale


def project_onto_constraint(move, y, rel_tol=DEFAULT_REL_TOL):
    """Orthogonal projection of `y` onto the kernel of the move's constraint."""
    b = svd(move.C, rel_tol)
    y = _vec(y, 2 * move.q, "y")
    return y - b.V1 @ (b.V1.T @ y)


def evolve(move, y, lam=None, constraint_tol=DEFAULT_CONSTRAINT_TOL, project=False):
    """Apply the move: ``E y + F lam``.

    States off the pre-constraint surface are rejected with
    ConstraintViolation unless `project` is set, in which case they are
    first projected orthogonally onto it.
    """
    y = _vec(y, 2 * move.q, "y")
    lam = np.zeros(move.s) if lam is None else _vec(lam, move.s, "lambda")
    if project:
        y = project_onto_constraint(move, y)
    if not on_surface(move.C, y, constraint_tol):
        res = move.C @ y
        rows = [int(i) for i in np.flatnonzero(np.abs(res) > constraint_tol * max(1.0, np.abs(y).max()))]
        raise ConstraintViolation(
            f"state violates the pre-constraint (max residual {np.abs(res).max():.3e})",
            residual=res,
            rows=rows,
        )
    return move.E @ y + move.F @ lam


def symplectic_product(y, z):
    """``x(y)^T p(z) - x(z)^T p(y)``."""
    y = np.asarray(y, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float).reshape(-1)
    if y.shape != z.shape or y.size % 2:
        raise ValidationError(f"phase vectors of lengths {y.size} and {z.size} do not pair")
    q = y.size // 2
    return float(y[:q] @ z[q:] - z[:q] @ y[q:])


def step_action(sys, x_n, x_next):
    """``-1/2 (x_n^T L x_n + 2 x_n^T R x_next - x_next^T Rbar x_next)``."""
    x_n, x_next = _vec(x_n, sys.q, "x_n"), _vec(x_next, sys.q, "x_next")
    return -0.5 * float(x_n @ sys.L @ x_n + 2 * x_n @ sys.R @ x_next - x_next @ sys.Rbar @ x_next)


def mixed_step_action(sys, x_n, x_next):
    """The same action written with momenta, ``1/2 (x_next^T p_next - x_n^T p_n)``."""
    p_n, p_next = sys.momenta(x_n, x_next)
    return 0.5 * float(np.dot(x_next, p_next) - np.dot(x_n, p_n))
