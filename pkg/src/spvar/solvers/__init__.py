"""Critical-point solvers and radial reference profiles."""

from .mountain_pass import (
    mountain_pass_solve,
    mu_continuation,
    newton_solve,
    path_upper_bound,
    radial_seed,
)
from .nehari import ground_state_nehari, nehari_project, nehari_scale
from .radial import (
    RadialProfile,
    radial_limit_ground_state,
    read_golden,
    shoot_initial_value,
    write_golden,
)
from .records import ContinuationResult, SolutionRecord, make_record, monotone_non_increasing

__all__ = [
    "mountain_pass_solve",
    "mu_continuation",
    "newton_solve",
    "path_upper_bound",
    "radial_seed",
    "ground_state_nehari",
    "nehari_project",
    "nehari_scale",
    "RadialProfile",
    "radial_limit_ground_state",
    "read_golden",
    "shoot_initial_value",
    "write_golden",
    "ContinuationResult",
    "SolutionRecord",
    "make_record",
    "monotone_non_increasing",
]
