"""Random irregular systems and the invariant suite run by ``dle check``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import ortho_group

from .adapted import build_frame, evolve_adapted, frame_inverses
from .linalg import DEFAULT_REL_TOL, pinv, symplectic_defect, symplectic_inverse
from .solutions import constraint_space_D, null_and_representative, solution_space
from .timestep import (
    TimeStepSystem,
    build_move,
    mixed_step_action,
    project_onto_constraint,
    step_action,
    symplectic_product,
)


def _orthogonal(rng, q):
    if q == 1:
        return np.array([[rng.choice([-1.0, 1.0])]])
    return ortho_group.rvs(q, random_state=rng)


def random_symmetric(rng, q, scale=2.0):
    A = rng.uniform(-scale, scale, size=(q, q))
    return (A + A.T) / 2


def random_system(rng, q=None, rank=None, max_q=6) -> TimeStepSystem:
    """Random (L, R, Rbar) with R rank-deficient: ``R = Q1 diag(sigma) Q2^T``.

    Nonzero singular values are drawn from [0.5, 3] so the numerical rank
    is unambiguous.
    """
    q = int(rng.integers(1, max_q + 1)) if q is None else q
    r = int(rng.integers(0, q)) if rank is None else rank
    sig = np.zeros(q)
    sig[:r] = rng.uniform(0.5, 3.0, size=r)
    R = _orthogonal(rng, q) @ np.diag(sig) @ _orthogonal(rng, q).T
    return TimeStepSystem(L=random_symmetric(rng, q), R=R, Rbar=random_symmetric(rng, q))


def random_on_constraint(rng, move):
    y = rng.uniform(-1.0, 1.0, size=2 * move.q)
    return project_onto_constraint(move, y)


@dataclass
class InvariantResult:
    name: str
    tol: float
    worst: float = 0.0
    trials: int = 0
    notes: list = field(default_factory=list)

    @property
    def passed(self):
        return self.trials > 0 and self.worst <= self.tol

    def record(self, value):
        self.trials += 1
        self.worst = max(self.worst, float(value))

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "worst": self.worst, "tol": self.tol, "trials": self.trials}


def _step_invariants(rng, sys, results, rel_tol):
    move = build_move(sys, rel_tol)
    b = move.svd_R
    R = sys.R
    m, n = R.shape
    results["svd_reconstruction"].record(
        np.abs(R - b.reconstruct()).max() / max(1.0, b.sigma_r[0] if b.rank else 0.0))
    results["svd_orthogonality"].record(
        max(np.abs(b.U.T @ b.U - np.eye(m)).max(), np.abs(b.V.T @ b.V - np.eye(n)).max()))
    Rp = pinv(R, bundle=b)
    results["penrose_conditions"].record(max(
        np.abs(R @ Rp @ R - R).max(), np.abs(Rp @ R @ Rp - Rp).max(),
        np.abs(R @ Rp - (R @ Rp).T).max(), np.abs(Rp @ R - (Rp @ R).T).max()))

    y, z = random_on_constraint(rng, move), random_on_constraint(rng, move)
    ly, lz = rng.uniform(-1, 1, move.s), rng.uniform(-1, 1, move.s)
    y1, z1 = move.E @ y + move.F @ ly, move.E @ z + move.F @ lz
    results["symplectic_conservation"].record(abs(symplectic_product(y1, z1) - symplectic_product(y, z)))
    results["post_constraint_closure"].record(np.abs(move.Cbar_next @ y1).max() if y1.size else 0.0)
    if move.s:
        iota = b.U2
        results["null_space_annihilation"].record(np.abs(move.E @ np.vstack([-iota, -sys.L @ iota])).max())
    else:
        results["null_space_annihilation"].record(0.0)

    frame = build_frame(sys, rel_tol)
    results["frame_symplectic"].record(max(symplectic_defect(frame.Wdot), symplectic_defect(frame.Wddot)))
    dot_inv, ddot_inv = frame_inverses(sys, frame)
    results["frame_inverse"].record(max(
        np.abs(symplectic_inverse(frame.Wdot) @ frame.Wdot - np.eye(2 * sys.q)).max(),
        np.abs(dot_inv @ frame.Wdot - np.eye(2 * sys.q)).max(),
        np.abs(ddot_inv @ frame.Wddot - np.eye(2 * sys.q)).max()))
    lhs = frame.Wddot @ y1
    rhs = evolve_adapted(frame, frame.Wdot @ y, ly)
    results["adapted_commutation"].record(np.abs(lhs - rhs).max())

    xn, xn1 = rng.uniform(-1, 1, sys.q), rng.uniform(-1, 1, sys.q)
    results["mixed_action_identity"].record(abs(step_action(sys, xn, xn1) - mixed_step_action(sys, xn, xn1)))


def _chain_invariants(rng, steps, results, rel_tol):
    sol = solution_space(steps, rel_tol)
    if sol.dim == 0:
        results["solution_product_slice_independence"].record(0.0)
        results["representative_dimension_constant"].record(0.0)
        return
    K = sol.kernel_basis.basis
    a, b = K @ rng.normal(size=sol.dim), K @ rng.normal(size=sol.dim)
    vals = [symplectic_product(sol.state(a, n), sol.state(b, n)) for n in range(sol.t + 1)]
    results["solution_product_slice_independence"].record(max(vals) - min(vals))
    dims = [null_and_representative(constraint_space_D(sol, n, rel_tol))[1].dim for n in range(sol.t + 1)]
    results["representative_dimension_constant"].record(float(max(dims) - min(dims)))


TOLERANCES = {
    "svd_reconstruction": 1e-10,
    "svd_orthogonality": 1e-10,
    "penrose_conditions": 1e-9,
    "symplectic_conservation": 1e-8,
    "post_constraint_closure": 1e-8,
    "null_space_annihilation": 1e-9,
    "frame_symplectic": 1e-9,
    "frame_inverse": 1e-9,
    "adapted_commutation": 1e-8,
    "mixed_action_identity": 1e-9,
    "solution_product_slice_independence": 1e-8,
    "representative_dimension_constant": 0.0,
}


def run_suite(rng, iterations, steps=None, rel_tol=DEFAULT_REL_TOL):
    """Run every invariant `iterations` times.

    With `steps` the given chain is checked with fresh random vectors each
    round; otherwise each round draws a new random system and a random
    chain of up to three steps.
    """
    results = {name: InvariantResult(name, tol) for name, tol in TOLERANCES.items()}
    for _ in range(iterations):
        if steps is None:
            first = random_system(rng)
            chain = [first] + [random_system(rng, q=first.q) for _ in range(int(rng.integers(0, 3)))]
        else:
            chain = list(steps)
        for sys in chain:
            _step_invariants(rng, sys, results, rel_tol)
        _chain_invariants(rng, chain, results, rel_tol)
    return list(results.values())
