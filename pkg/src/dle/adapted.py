"""Adapted symplectic coordinates for a single evolution step.

In the slice-n frame ``Wdot`` the pre-constraint surface, its symplectic
null space and the chosen representative space are coordinate subspaces;
likewise for the post-constraint surface in the slice-(n+1) frame
``Wddot``.  In these coordinates a step simply copies the representative
components, writes the free parameters into components r..q-1 and clears
components q+r..2q-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DEFAULT_REL_TOL, SvdBundle, _frozen, svd
from .timestep import DEFAULT_CONSTRAINT_TOL, ConstraintViolation, TimeStepSystem, ValidationError

SLICES = ("n", "n_plus_1")


@dataclass(frozen=True)
class AdaptedFrame:
    Wdot: np.ndarray
    Wddot: np.ndarray
    r: int
    s: int
    svd_R: SvdBundle

    @property
    def q(self):
        return self.r + self.s


@dataclass(frozen=True)
class VectorClass:
    """Membership of a phase vector in the subspaces singled out by a frame.

    For ``slice == "n"`` the three flags refer to the pre-constraint
    surface, its null space and the representative space; for
    ``"n_plus_1"`` to the post-constraint surface, its null space (the
    free-parameter directions) and the evolved representative space.
    """

    slice: str
    on_constraint: bool
    in_null_space: bool
    in_representative: bool


def build_frame(sys: TimeStepSystem, rel_tol=DEFAULT_REL_TOL) -> AdaptedFrame:
    b = svd(sys.R, rel_tol)
    q, r = sys.q, b.rank
    U, V = b.U, b.V
    sbar = np.concatenate([b.sigma_r, np.ones(q - r)])
    Z = np.zeros((q, q))
    Wdot = np.block([[-U.T @ sys.L, U.T], [-U.T, Z]])
    VtS = sbar[:, None] * V.T
    VtSi = V.T / sbar[:, None]
    Wddot = np.block([[VtS, Z], [-VtSi @ sys.Rbar, VtSi]])
    return AdaptedFrame(_frozen(Wdot), _frozen(Wddot), r, q - r, b)


def frame_inverses(sys: TimeStepSystem, frame: AdaptedFrame):
    """Closed-form inverses of both transforms.

    ``Wdot^-1 = [[0, -U], [U, -L U]]`` and
    ``Wddot^-1 = [[V S^-1, 0], [Rbar V S^-1, V S]]`` with
    ``S = diag(sigma_r, 1)``.
    """
    b = frame.svd_R
    U, V = b.U, b.V
    q = frame.q
    sbar = np.concatenate([b.sigma_r, np.ones(frame.s)])
    Z = np.zeros((q, q))
    dot_inv = np.block([[Z, -U], [U, -sys.L @ U]])
    VSi = V / sbar
    ddot_inv = np.block([[VSi, Z], [sys.Rbar @ VSi, V * sbar]])
    return dot_inv, ddot_inv


def _check_slice(slice):
    if slice not in SLICES:
        raise ValidationError(f"slice must be one of {SLICES}, got {slice!r}")


def to_adapted(frame, y, slice="n"):
    _check_slice(slice)
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.size != 2 * frame.q:
        raise ValidationError(f"phase vector has length {y.size}, expected {2 * frame.q}")
    W = frame.Wdot if slice == "n" else frame.Wddot
    return W @ y


def from_adapted(frame, u, slice="n"):
    _check_slice(slice)
    W = frame.Wdot if slice == "n" else frame.Wddot
    return np.linalg.solve(W, np.asarray(u, dtype=float))


def _blocks(frame):
    q, r = frame.q, frame.r
    rep = np.r_[0:r, q : q + r]
    gap = np.arange(r, q)
    tail = np.arange(q + r, 2 * q)
    return rep, gap, tail


def classify(frame, y, slice="n", tol=DEFAULT_CONSTRAINT_TOL) -> VectorClass:
    """Subspace membership read off the adapted components of `y`.

    Slice n: on the pre-constraint surface iff components r..q-1 vanish;
    in its null space iff only components q+r..2q-1 may be nonzero;
    representative iff components r..q-1 and q+r..2q-1 vanish.
    Slice n+1: on the post-constraint surface iff components q+r..2q-1
    vanish; in its null space iff only components r..q-1 may be nonzero;
    representative iff both blocks vanish.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    u = to_adapted(frame, y, slice)
    scale = max(1.0, float(np.linalg.norm(y)))
    small = np.abs(u) <= tol * scale
    rep, gap, tail = _blocks(frame)
    if slice == "n":
        constraint_free, null_block = gap, tail
    else:
        constraint_free, null_block = tail, gap
    on_c = bool(small[constraint_free].all())
    rep_zero = bool(small[rep].all())
    null_zero = bool(small[null_block].all())
    return VectorClass(
        slice=slice,
        on_constraint=on_c,
        in_null_space=on_c and rep_zero,
        in_representative=on_c and null_zero,
    )


def evolve_adapted(frame, u, lam=None, tol=DEFAULT_CONSTRAINT_TOL):
    """Evolve adapted slice-n coordinates into adapted slice-(n+1) coordinates."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != 2 * frame.q:
        raise ValidationError(f"adapted vector has length {u.size}, expected {2 * frame.q}")
    lam = np.zeros(frame.s) if lam is None else np.asarray(lam, dtype=float).reshape(-1)
    if lam.size != frame.s:
        raise ValidationError(f"lambda has length {lam.size}, expected {frame.s}")
    rep, gap, tail = _blocks(frame)
    scale = max(1.0, float(np.abs(u).max()) if u.size else 0.0)
    if gap.size and np.abs(u[gap]).max() > tol * scale:
        raise ConstraintViolation(
            "adapted vector has nonzero pre-constraint components",
            residual=u[gap],
            rows=[int(i) for i in gap],
        )
    out = np.zeros_like(u)
    out[rep] = u[rep]
    out[gap] = lam
    return out
