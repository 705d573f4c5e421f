"""Step-by-step Hamiltonian evolution of linear systems with degenerate actions."""

from .linalg import (
    SvdBundle,
    is_symplectic,
    pinv,
    projector,
    svd,
    symplectic_form,
    symplectic_inverse,
)
from .timestep import (
    ConstraintViolation,
    EvolutionMove,
    TimeStepSystem,
    ValidationError,
    build_backward_move,
    build_move,
    evolve,
    pre_constraint_residual,
    step_action,
    symplectic_product,
)
from .adapted import AdaptedFrame, build_frame, classify, evolve_adapted, to_adapted
from .lattice import LatticeSpec, build_dynamical_matrix, split_into_steps, total_action
from .solutions import (
    SolutionSpace,
    SubspaceBasis,
    Trajectory,
    constraint_space_D,
    null_and_representative,
    run_trajectory,
    solution_product,
    solution_space,
)

__version__ = "0.1.0"
