"""Finite-element solver for two-domain incompressible flow coupled through
a friction-type slip interface, with a verification-oriented diagnostics
layer and CLI."""

from .fields import ForceSpec, FrictionSpec, InitialFieldSpec
from .mesh import IN, OUT, Mesh, MeshConfig, build_two_domain_mesh, validate
from .solver import (
    NewtonError,
    NewtonSettings,
    SaddleSolveError,
    SaddleSystem,
    Spaces,
    State,
    solve_saddle,
    solve_stationary_regularized,
    solve_stationary_vi,
)
from .spaces import (
    PressureDofMap,
    TraceMap,
    VelocityDofMap,
    build_pressure_space,
    build_single_pressure_space,
    build_trace_map,
    build_velocity_space,
)
from .timestepper import (
    FULLY_IMPLICIT,
    NAVIER_STOKES,
    SEMI_IMPLICIT,
    STOKES,
    RunConfig,
    Simulation,
    StepFailure,
    Trajectory,
    build_spaces,
    project_initial,
    run,
    step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
