"""Production assignment and scheduling: models, QUBO compiler, solvers and benchmarks."""

from .instance import (
    InstanceError,
    ObjectiveWeights,
    ProblemInstance,
    generate_instance,
    make_instance,
    parse_instance,
    serialize_instance,
    validate_instance,
)
from .schedule import Schedule, evaluate, to_gantt, validate_schedule
from .mip import build_mip, check_assignment, export_lp
from .qubo import build_bqp, build_qubo, count_variables, decode_bitstring, derive_penalties, qubo_energy
from .decompose import kernighan_lin_bisect, merge_solutions, recursive_decompose, split_instance
from .solvers import SolverConfig, brute_force, hybrid_solve, local_improve, simulated_annealing
from .bench import deviation_pct, run_benchmark, time_to_target

__version__ = "0.1.0"
