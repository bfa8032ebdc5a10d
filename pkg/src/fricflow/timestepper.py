"""Backward-Euler integration of the regularized slip-interface flow.

Each step solves the implicit system

    M (u+ - u)/dt + A u+ + N(w) u+ + friction(u+) + D^T p+ = f(t+dt),
    div u+ = 0,  mean(p+) = 0,

with w the previous velocity (semi-implicit) or the unknown itself (fully
implicit, handled inside Newton). Threshold and force data are evaluated at
the new time level. With f = 0 the discrete energy is strictly dissipated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from . import diagnostics
from .assembly import (
    apply_dirichlet_columns,
    apply_dirichlet_operator,
    apply_dirichlet_rhs,
    assemble_convection_skew,
    assemble_divergence,
    assemble_friction,
    assemble_gradient,
    assemble_load,
    assemble_mass,
    assemble_viscous,
    friction_dissipation,
    friction_dissipation_smoothed,
)
from .fields import ForceSpec, FrictionSpec, InitialFieldSpec
from .mesh import MeshConfig, build_two_domain_mesh
from .solver import (
    FrictionNewtonProblem,
    NewtonError,
    NewtonSettings,
    SaddleSolveError,
    SaddleSystem,
    Spaces,
    State,
    newton_solve,
    solve_saddle,
    solve_stationary_regularized,
)
from .spaces import build_pressure_space, build_trace_map, build_velocity_space

STOKES = "STOKES"
NAVIER_STOKES = "NAVIER_STOKES"
SEMI_IMPLICIT = "SEMI_IMPLICIT"
FULLY_IMPLICIT = "FULLY_IMPLICIT"


@dataclass
class RunConfig:
    """Full description of one evolution run."""

    mesh: MeshConfig = field(default_factory=MeshConfig)
    nu: float = 0.1
    t_final: float = 1.0
    dt: float = 1e-2
    eps: float = 1e-3
    friction: FrictionSpec = field(default_factory=FrictionSpec)
    force: ForceSpec = field(default_factory=ForceSpec)
    problem: str = STOKES
    convection: str = SEMI_IMPLICIT
    initial_mode: str = "project"          # 'project' or 'stationary'
    initial_field: InitialFieldSpec = field(default_factory=InitialFieldSpec)
    initial_load: ForceSpec = field(default_factory=ForceSpec)
    # Per step the absolute tolerance is rescaled by the step rhs norm, so the
    # default is a small relative factor rather than an absolute residual.
    newton: NewtonSettings = field(default_factory=lambda: NewtonSettings(tol_abs=1e-14))
    quad_order: int = 3
    output_dir: str | None = None
    snapshot_stride: int = 10

    def validate(self) -> None:
        self.mesh.validate()
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_final < self.dt:
            raise ValueError(f"T={self.t_final} must be at least dt={self.dt}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.problem not in (STOKES, NAVIER_STOKES):
            raise ValueError(f"problem must be {STOKES} or {NAVIER_STOKES}, got {self.problem!r}")
        if self.convection not in (SEMI_IMPLICIT, FULLY_IMPLICIT):
            raise ValueError(
                f"convection must be {SEMI_IMPLICIT} or {FULLY_IMPLICIT}, got {self.convection!r}"
            )
        if self.initial_mode not in ("project", "stationary"):
            raise ValueError(f"initial mode must be 'project' or 'stationary', got {self.initial_mode!r}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot stride must be at least 1")
        self.newton.validate()

    @property
    def num_steps(self) -> int:
        n = round(self.t_final / self.dt)
        return max(n, 1)


@dataclass
class Trajectory:
    cfg: RunConfig
    spaces: Spaces
    states: list[State]
    rows: list[dict]
    energy_steps: list[dict]
    error: str | None = None


class StepFailure(RuntimeError):
    """Step-level Newton failure; carries the partial trajectory."""

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory


def build_spaces(mesh_cfg: MeshConfig, quad_order: int = 3) -> Spaces:
    mesh = build_two_domain_mesh(mesh_cfg)
    vmap = build_velocity_space(mesh)
    pmap = build_pressure_space(mesh)
    trace = build_trace_map(mesh, vmap, quad_order)
    return Spaces(mesh=mesh, vmap=vmap, pmap=pmap, trace=trace)


class _FieldForce:
    """Adapts a spatial field to the load-assembly sampling interface."""

    def __init__(self, func):
        self.func = func

    def sample(self, t, points):
        return np.asarray(self.func(points[..., 0], points[..., 1]), dtype=float)


def project_initial(spaces: Spaces, fieldfunc) -> State:
    """L2 projection followed by a discrete divergence-free correction."""
    mesh, vmap, pmap = spaces.mesh, spaces.vmap, spaces.pmap
    free = vmap.free_mask
    mass = assemble_mass(mesh, vmap)
    mass_m = apply_dirichlet_operator(mass, free)
    rhs = apply_dirichlet_rhs(
        assemble_load(mesh, vmap, _FieldForce(fieldfunc), 0.0), free
    )
    ubar = spla.spsolve(mass_m.tocsc(), rhs)

    div = apply_dirichlet_columns(assemble_divergence(mesh, vmap, pmap), free)
    system = SaddleSystem(
        a=mass_m,
        div=div,
        mean=pmap.mean_vector,
        rhs_v=apply_dirichlet_rhs(mass @ ubar, free),
        rhs_p=np.zeros(pmap.num_dofs),
    )
    u, _, _ = solve_saddle(system)
    return State(t=0.0, u=u, p=np.zeros(pmap.num_dofs), mean_mult=0.0)


class Simulation:
    """Caches the mesh-level operators of one run and advances states."""

    def __init__(self, cfg: RunConfig, spaces: Spaces | None = None):
        cfg.validate()
        self.cfg = cfg
        self.spaces = spaces or build_spaces(cfg.mesh, cfg.quad_order)
        mesh, vmap = self.spaces.mesh, self.spaces.vmap
        self.free = vmap.free_mask
        self.mass = assemble_mass(mesh, vmap)
        self.viscous = assemble_viscous(mesh, vmap, cfg.nu)
        self.gradient = assemble_gradient(mesh, vmap)
        self.h1 = (self.mass + self.gradient).tocsr()
        self.div = apply_dirichlet_columns(
            assemble_divergence(mesh, vmap, self.spaces.pmap), self.free
        )
        self.mean = self.spaces.pmap.mean_vector

    # -- initial data ------------------------------------------------------

    def initial_state(self) -> State:
        cfg = self.cfg
        if cfg.initial_mode == "project":
            return project_initial(self.spaces, cfg.initial_field)
        load = assemble_load(self.spaces.mesh, self.spaces.vmap, cfg.initial_load, 0.0)
        state = solve_stationary_regularized(
            self.spaces, cfg.friction, cfg.eps, load, cfg.nu, cfg.newton
        )
        return State(t=0.0, u=state.u, p=state.p, mean_mult=state.mean_mult)

    # -- stepping ----------------------------------------------------------

    def step(self, state: State) -> tuple[State, dict]:
        """Advance one backward-Euler step; returns (new state, energy terms)."""
        cfg = self.cfg
        dt = cfg.dt
        t_new = state.t + dt
        mesh, vmap = self.spaces.mesh, self.spaces.vmap

        k_raw = self.mass / dt + self.viscous
        implicit_convection = False
        if cfg.problem == NAVIER_STOKES:
            if cfg.convection == SEMI_IMPLICIT:
                k_raw = k_raw + assemble_convection_skew(mesh, vmap, state.u)
            else:
                implicit_convection = True
        k_lin = apply_dirichlet_operator(k_raw.tocsr(), self.free)

        load = assemble_load(mesh, vmap, cfg.force, t_new)
        rhs_v = apply_dirichlet_rhs(self.mass @ state.u / dt + load, self.free)

        # Scale-invariant stepping: the absolute tolerance tracks the step rhs
        # so the energy identity stays accurate relative to the decaying state.
        settings = NewtonSettings(
            tol_abs=cfg.newton.tol_abs * float(np.linalg.norm(rhs_v)) + 1e-300,
            tol_rel=cfg.newton.tol_rel,
            max_iter=cfg.newton.max_iter,
            line_search=cfg.newton.line_search,
        )
        problem = FrictionNewtonProblem(
            k_lin=k_lin,
            div=self.div,
            mean=self.mean,
            rhs_v=rhs_v,
            rhs_p=np.zeros(self.spaces.pmap.num_dofs),
            rhs_mean=np.zeros(1),
            trace=self.spaces.trace,
            friction=cfg.friction,
            t=t_new,
            eps=cfg.eps,
            free_mask=self.free,
            mesh=mesh,
            vmap=vmap,
            implicit_convection=implicit_convection,
        )
        u, p, mult, history = newton_solve(problem, settings, u0=state.u, p0=state.p)
        new = State(t=t_new, u=u, p=p, mean_mult=float(mult[0]), newton_iters=len(history) - 1)
        return new, self._energy_terms(state, new, load)

    def _energy_terms(self, old: State, new: State, load_raw: np.ndarray) -> dict:
        dt = self.cfg.dt
        du = new.u - old.u
        fric_res, _ = assemble_friction(
            self.spaces.trace, new.u, self.cfg.friction, new.t, self.cfg.eps
        )
        terms = {
            "t": new.t,
            "energy_old": 0.5 * float(old.u @ (self.mass @ old.u)),
            "energy_new": 0.5 * float(new.u @ (self.mass @ new.u)),
            "increment": 0.5 * float(du @ (self.mass @ du)),
            "viscous": dt * float(new.u @ (self.viscous @ new.u)),
            "friction_power": dt * float(fric_res @ new.u),
            "work": dt * float(load_raw @ new.u),
            "velocity_rate": float(np.sqrt(du @ (self.mass @ du))) / dt,
        }
        lhs = (
            terms["energy_new"] - terms["energy_old"] + terms["increment"]
            + terms["viscous"] + terms["friction_power"] - terms["work"]
        )
        scale = max(
            abs(terms["energy_new"]), abs(terms["energy_old"]), terms["increment"],
            terms["viscous"], abs(terms["friction_power"]), abs(terms["work"]), 1e-300,
        )
        terms["identity_residual"] = lhs
        terms["identity_residual_rel"] = abs(lhs) / scale
        return terms

    # -- diagnostics row ---------------------------------------------------

    def diagnostics_row(self, state: State, prev: State | None = None) -> dict:
        cfg = self.cfg
        trace = self.spaces.trace
        udot = None if prev is None else (state.u - prev.u) / cfg.dt
        stress = diagnostics.recover_interface_stress(
            state, self.spaces, cfg.friction, cfg.eps,
            nu=cfg.nu, force=cfg.force, udot=udot,
            include_convection=cfg.problem == NAVIER_STOKES,
        )
        constants = diagnostics.recover_pressure_constants(state, self.spaces, stress)
        return {
            "t": state.t,
            "energy": 0.5 * float(state.u @ (self.mass @ state.u)),
            "j": friction_dissipation(trace, state.u, cfg.friction, state.t),
            "j_eps": friction_dissipation_smoothed(trace, state.u, cfg.friction, state.t, cfg.eps),
            "max_defect": float(stress.defect.max(initial=0.0)),
            "delta": constants.jump,
            "newton_iters": state.newton_iters,
            "h1_norm": float(np.sqrt(state.u @ (self.h1 @ state.u))),
        }

    # -- full run ----------------------------------------------------------

    def run(self) -> Trajectory:
        state = self.initial_state()
        states = [state]
        rows = [self.diagnostics_row(state)]
        energy_steps: list[dict] = []
        traj = Trajectory(self.cfg, self.spaces, states, rows, energy_steps)
        for _ in range(self.cfg.num_steps):
            prev = state
            try:
                state, terms = self.step(state)
            except (NewtonError, SaddleSolveError) as exc:
                traj.error = str(exc)
                raise StepFailure(str(exc), traj) from exc
            states.append(state)
            energy_steps.append(terms)
            rows.append(self.diagnostics_row(state, prev))
        return traj


def step(state: State, cfg: RunConfig, sim: Simulation | None = None) -> State:
    sim = sim or Simulation(cfg)
    new, _ = sim.step(state)
    return new


def run(cfg: RunConfig) -> Trajectory:
    return Simulation(cfg).run()
