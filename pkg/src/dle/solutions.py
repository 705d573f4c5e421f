"""Multi-step trajectories and the space of global solutions.

A solution over slices 0..t is parametrized by the initial state and the
free parameters of every step, ``theta = (y_0, lam_1, ..., lam_t)``.  Each
slice state is a linear image ``M_n theta`` of it, and the admissible
parameters are the kernel of the stacked pre-constraints ``C_n M_n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DEFAULT_REL_TOL, _frozen, svd, symplectic_form
from .timestep import (
    DEFAULT_CONSTRAINT_TOL,
    ConstraintViolation,
    ValidationError,
    build_move,
    evolve,
    on_surface,
    symplectic_product,
)


@dataclass(frozen=True)
class Trajectory:
    states: tuple
    lambdas: tuple

    @property
    def t(self):
        return len(self.states) - 1


class TrajectoryRejected(ConstraintViolation):
    """Raised when some slice state fails the pre-constraint of its step.

    `partial` holds the states computed up to and including the rejected
    slice.
    """

    def __init__(self, message, residual, rows, slice_index, partial):
        super().__init__(message, residual=residual, rows=rows, slice_index=slice_index)
        self.partial = partial


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal columns spanning a subspace of R^ambient_dim."""

    basis: np.ndarray

    @property
    def ambient_dim(self):
        return self.basis.shape[0]

    @property
    def dim(self):
        return self.basis.shape[1]

    def projector(self):
        return self.basis @ self.basis.T

    def contains(self, v, tol=1e-8):
        v = np.asarray(v, dtype=float)
        return float(np.abs(v - self.basis @ (self.basis.T @ v)).max()) <= tol * max(1.0, np.abs(v).max())


@dataclass(frozen=True)
class SolutionSpace:
    param_dim: int
    kernel_basis: SubspaceBasis
    slice_maps: tuple
    lambda_slices: tuple

    @property
    def dim(self):
        return self.kernel_basis.dim

    @property
    def t(self):
        return len(self.slice_maps) - 1

    @property
    def q(self):
        return self.slice_maps[0].shape[0] // 2

    def state(self, theta, n):
        return self.slice_maps[n] @ np.asarray(theta, dtype=float)


def _moves(steps, rel_tol):
    return [build_move(s, rel_tol) for s in steps]


def run_trajectory(steps, y0, lambdas=None, rel_tol=DEFAULT_REL_TOL,
                   constraint_tol=DEFAULT_CONSTRAINT_TOL, moves=None):
    """Evolve `y0` through every step, checking each pre-constraint on the way.

    `lambdas` is one free-parameter vector per step (None means zeros).
    """
    moves = _moves(steps, rel_tol) if moves is None else moves
    if lambdas is None:
        lambdas = [None] * len(moves)
    if len(lambdas) != len(moves):
        raise ValidationError(f"got {len(lambdas)} lambda vectors for {len(moves)} steps")
    y = np.asarray(y0, dtype=float).reshape(-1)
    if y.size != 2 * moves[0].q:
        raise ValidationError(f"y0 has length {y.size}, expected {2 * moves[0].q}")
    states, used = [y], []
    for n, (move, lam) in enumerate(zip(moves, lambdas)):
        lam = np.zeros(move.s) if lam is None else np.asarray(lam, dtype=float).reshape(-1)
        try:
            y = evolve(move, y, lam, constraint_tol=constraint_tol)
        except ConstraintViolation as exc:
            raise TrajectoryRejected(
                f"slice {n}: {exc}", residual=exc.residual, rows=exc.rows,
                slice_index=n, partial=tuple(states),
            ) from None
        states.append(y)
        used.append(lam)
    return Trajectory(states=tuple(states), lambdas=tuple(used))


def solution_space(steps, rel_tol=DEFAULT_REL_TOL, moves=None) -> SolutionSpace:
    """Kernel of all pre-constraints over the forward-shooting parameters."""
    moves = _moves(steps, rel_tol) if moves is None else moves
    if not moves:
        raise ValidationError("need at least one step")
    q2 = 2 * moves[0].q
    sizes = [m.s for m in moves]
    P = q2 + sum(sizes)
    offsets = np.cumsum([q2] + sizes)
    M = np.zeros((q2, P))
    M[:, :q2] = np.eye(q2)
    maps, rows, lam_slices = [M], [], []
    for n, move in enumerate(moves):
        rows.append(move.C @ M)
        sl = slice(int(offsets[n]), int(offsets[n] + move.s))
        lam_slices.append(sl)
        J = np.zeros((move.s, P))
        J[:, sl] = np.eye(move.s)
        M = move.E @ M + move.F @ J
        maps.append(M)
    A = np.vstack(rows)
    kernel = svd(A, rel_tol).V2
    return SolutionSpace(
        param_dim=P,
        kernel_basis=SubspaceBasis(_frozen(kernel)),
        slice_maps=tuple(_frozen(m) for m in maps),
        lambda_slices=tuple(lam_slices),
    )


def constraint_space_D(sol: SolutionSpace, n, rel_tol=DEFAULT_REL_TOL) -> SubspaceBasis:
    """Slice-n data that extend to a solution over the whole interval."""
    if not 0 <= n <= sol.t:
        raise ValidationError(f"slice {n} out of range 0..{sol.t}")
    M = sol.slice_maps[n]
    image = M @ sol.kernel_basis.basis
    if image.shape[1] == 0:
        return SubspaceBasis(_frozen(np.zeros((image.shape[0], 0))))
    # the kernel basis is orthonormal, so |M| bounds the image scale
    floor = rel_tol * max(1.0, np.linalg.norm(M, 2)) * max(image.shape)
    return SubspaceBasis(svd(image, rel_tol, abs_tol=floor).U1)


def solution_product(sol: SolutionSpace, a, b, n, tol=1e-8):
    """Symplectic product of two solutions evaluated at slice n."""
    for name, v in (("a", a), ("b", b)):
        v = np.asarray(v, dtype=float)
        if v.shape != (sol.param_dim,):
            raise ValidationError(f"{name} has shape {v.shape}, expected ({sol.param_dim},)")
        if not sol.kernel_basis.contains(v, tol):
            raise ValidationError(f"{name} is not an admissible solution parameter")
    return symplectic_product(sol.state(a, n), sol.state(b, n))


def skew_gram(basis):
    """``B^T sigma B``: the symplectic form restricted to the span of `B`."""
    B = np.asarray(basis, dtype=float)
    return B.T @ symplectic_form(B.shape[0] // 2) @ B


def null_and_representative(D: SubspaceBasis, q=None, rel_tol=1e-10):
    """Split `D` into its symplectic null space and the orthogonal complement.

    Returns ``(N, Ddot)``; the form restricted to ``Ddot`` is nondegenerate.
    """
    B = D.basis
    if q is not None and B.shape[0] != 2 * q:
        raise ValidationError(f"basis lives in dimension {B.shape[0]}, expected {2 * q}")
    if D.dim == 0:
        return D, D
    # orthonormal B: the restricted form has norm <= 1
    b = svd(skew_gram(B), rel_tol, abs_tol=rel_tol)
    return SubspaceBasis(_frozen(B @ b.V2)), SubspaceBasis(_frozen(B @ b.V1))


def representative_nondegeneracy(Ddot: SubspaceBasis):
    """Smallest over largest singular value of the restricted form (1.0 if empty)."""
    if Ddot.dim == 0:
        return 1.0
    s = np.linalg.svd(skew_gram(Ddot.basis), compute_uv=False)
    return float(s[-1] / s[0]) if s[0] > 0 else 0.0


def slice_on_constraints(sol: SolutionSpace, moves, theta, tol=DEFAULT_CONSTRAINT_TOL):
    """True when every slice state of `theta` satisfies its step's pre-constraint."""
    return all(on_surface(m.C, sol.state(theta, n), tol) for n, m in enumerate(moves))
