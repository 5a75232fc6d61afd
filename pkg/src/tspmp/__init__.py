"""Optimal control on time scales: simulation, variations and Pontryagin certificates."""

from .calculus import GridFunction, delta_derivative, delta_integral, generalized_exp, gronwall_envelope
from .certificate import (
    Extremal, PMPReport, adjoint_solve, certify, derive_multipliers, hamiltonian, terminal_adjoint,
)
from .dynamics import Trajectory, admissible, cost, simulate
from .errors import TspmpError
from .geometry import (
    AbsCone, AffineSubspace, Ball, Box, Cone, FiniteSet, FullSpace, Halfspaces, LineFan,
    ParabolaHypograph, QuarterDisc, Singleton, is_dense_direction, is_stable_dense_direction, stable_cone,
)
from .maximize import maximize_hamiltonian
from .problem import ControlProblem, problem_from_json
from .solver import brute_force_discrete, projected_gradient, shooting_solve
from .timescale import TimeScale, build_timescale, cantor_timescale, integer_timescale, interval
from .variations import (
    NeedleRD, NeedleRS, fd_check_init, fd_check_rd, fd_check_rs, variation_vector_init, variation_vector_rd,
    variation_vector_rs,
)

__version__ = "0.1.0"
