"""Conductor temperature evolution for overhead transmission lines.

Heat balance and steady state, closed-form transient solutions, a reference
integrator, over-temperature risk maps, and a network batch engine.
"""

from .analytic import (
    NEVER,
    LinearizedModel,
    NonConvergence,
    SolverConfig,
    build_model,
    error_bound,
    eval_first_order,
    eval_riccati,
    solve_steady_state,
    time_to_threshold,
    update_for_current,
)
from .conductor import Conductor, EnvironmentSample, get_conductor, load_catalog

__version__ = "0.1.0"
