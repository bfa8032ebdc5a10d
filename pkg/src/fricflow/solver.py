"""Saddle-point solves and the Newton loop for the slip nonlinearity.

The full KKT system couples velocity, pressure and the scalar multiplier(s)
enforcing pressure mean constraints:

    [ A   D^T  0 ] [u]   [rhs_v]
    [ D   0    m ] [p] = [rhs_p]
    [ 0   m^T  0 ] [mu]  [rhs_mean]

A carries every velocity-velocity term (already Dirichlet-masked with unit
diagonals), D the divergence coupling with masked columns, and m one or more
pressure mean functionals. Systems are factorised directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (
    apply_dirichlet_columns,
    apply_dirichlet_operator,
    apply_dirichlet_rhs,
    assemble_convection_skew,
    assemble_convection_skew_dw,
    assemble_divergence,
    assemble_friction,
    assemble_gradient,
    assemble_mass,
    assemble_viscous,
    mask_rows_cols,
)
from .fields import FrictionSpec
from .mesh import IN, Mesh
from .spaces import PressureDofMap, TraceMap, VelocityDofMap


class SaddleSolveError(RuntimeError):
    pass


class NewtonError(RuntimeError):
    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


@dataclass
class State:
    """Solution snapshot: time, velocity/pressure coefficients, multiplier."""

    t: float
    u: np.ndarray
    p: np.ndarray
    mean_mult: float = 0.0
    newton_iters: int = 0


@dataclass
class NewtonSettings:
    tol_abs: float = 1e-11
    tol_rel: float = 1e-12
    max_iter: int = 30
    line_search: bool = True

    def validate(self) -> None:
        if self.tol_abs <= 0 or self.tol_rel <= 0:
            raise ValueError("Newton tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("Newton max_iter must be at least 1")


@dataclass
class SaddleSystem:
    """Masked linear KKT blocks; mean may hold several constraint columns."""

    a: sp.csr_matrix
    div: sp.csr_matrix
    mean: np.ndarray
    rhs_v: np.ndarray
    rhs_p: np.ndarray
    rhs_mean: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        if self.mean.ndim == 1:
            self.mean = self.mean[:, None]
        self.rhs_mean = np.atleast_1d(np.asarray(self.rhs_mean, dtype=float))


def _kkt_matrix(a: sp.spmatrix, div: sp.spmatrix, mean: np.ndarray) -> sp.csc_matrix:
    mcol = sp.csr_matrix(mean)
    nmul = mean.shape[1]
    zero = sp.csr_matrix((nmul, nmul))
    return sp.bmat(
        [[a, div.T, None], [div, None, mcol], [None, mcol.T, zero]], format="csc"
    )


def _factorize(kkt: sp.csc_matrix, context: str):
    empty_rows = np.flatnonzero(np.diff(kkt.tocsr().indptr) == 0)
    if empty_rows.size:
        raise SaddleSolveError(
            f"{context}: KKT row {empty_rows[0]} is structurally empty "
            "(check Dirichlet mask identities and the divergence block)"
        )
    try:
        return spla.splu(kkt)
    except RuntimeError as exc:
        raise SaddleSolveError(
            f"{context}: sparse factorization failed ({exc}); the divergence "
            "block may violate inf-sup or a mean constraint may be redundant"
        ) from exc


def solve_saddle(system: SaddleSystem) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Direct solve of the KKT system; verifies residual and pressure mean."""
    nv = system.a.shape[0]
    npp = system.div.shape[0]
    kkt = _kkt_matrix(system.a, system.div, system.mean)
    rhs = np.concatenate([system.rhs_v, system.rhs_p, system.rhs_mean])
    lu = _factorize(kkt, "saddle solve")
    x = lu.solve(rhs)
    resid = np.linalg.norm(kkt @ x - rhs)
    tol = 1e-10 * (1.0 + np.linalg.norm(rhs))
    if not np.isfinite(resid) or resid > tol:
        raise SaddleSolveError(
            f"saddle solve: KKT residual {resid:.3e} exceeds {tol:.3e}"
        )
    u, p = x[:nv], x[nv:nv + npp]
    mult = x[nv + npp:]
    mean_err = np.abs(system.mean.T @ p - system.rhs_mean).max()
    if mean_err > 1e-12 * max(1.0, float(np.linalg.norm(p))):
        raise SaddleSolveError(f"pressure mean constraint violated by {mean_err:.3e}")
    return u, p, mult


# ---------------------------------------------------------------------------
# Newton for the friction-coupled system.


@dataclass
class FrictionNewtonProblem:
    """Nonlinear KKT problem: linear blocks plus the interface slip term.

    When ``implicit_convection`` is set, the skew convection of the unknown
    itself enters residual and Jacobian (fully implicit transport).
    """

    k_lin: sp.csr_matrix
    div: sp.csr_matrix
    mean: np.ndarray
    rhs_v: np.ndarray
    rhs_p: np.ndarray
    rhs_mean: np.ndarray
    trace: TraceMap
    friction: FrictionSpec
    t: float
    eps: float
    free_mask: np.ndarray
    mesh: Mesh | None = None
    vmap: VelocityDofMap | None = None
    implicit_convection: bool = False

    def __post_init__(self):
        if self.mean.ndim == 1:
            self.mean = self.mean[:, None]
        self.rhs_mean = np.atleast_1d(np.asarray(self.rhs_mean, dtype=float))

    def residual(self, u, p, mult) -> np.ndarray:
        fric, _ = assemble_friction(self.trace, u, self.friction, self.t, self.eps)
        r_v = self.k_lin @ u + self.div.T @ p + apply_dirichlet_rhs(fric, self.free_mask)
        if self.implicit_convection:
            conv = assemble_convection_skew(self.mesh, self.vmap, u) @ u
            r_v += apply_dirichlet_rhs(conv, self.free_mask)
        r_v -= self.rhs_v
        r_p = self.div @ u + self.mean @ mult - self.rhs_p
        r_m = self.mean.T @ p - self.rhs_mean
        return np.concatenate([r_v, r_p, r_m])

    def jacobian(self, u) -> sp.csc_matrix:
        _, jac = assemble_friction(self.trace, u, self.friction, self.t, self.eps)
        a_eff = self.k_lin + mask_rows_cols(jac, self.free_mask)
        if self.implicit_convection:
            conv = assemble_convection_skew(self.mesh, self.vmap, u)
            conv = conv + assemble_convection_skew_dw(self.mesh, self.vmap, u)
            a_eff = a_eff + mask_rows_cols(conv.tocsr(), self.free_mask)
        return _kkt_matrix(a_eff, self.div, self.mean)


def newton_solve(
    problem: FrictionNewtonProblem,
    settings: NewtonSettings,
    u0: np.ndarray | None = None,
    p0: np.ndarray | None = None,
    mult0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[float]]:
    """Damped Newton on the friction KKT system; returns (u, p, mult, history)."""
    settings.validate()
    nv = problem.k_lin.shape[0]
    npp = problem.div.shape[0]
    nmul = problem.mean.shape[1]
    u = np.zeros(nv) if u0 is None else u0.copy()
    p = np.zeros(npp) if p0 is None else p0.copy()
    mult = np.zeros(nmul) if mult0 is None else np.atleast_1d(mult0).astype(float)

    r = problem.residual(u, p, mult)
    rnorm = float(np.linalg.norm(r))
    history = [rnorm]
    tol = settings.tol_abs + settings.tol_rel * rnorm
    # Accept a stagnating iteration near the rounding floor: quadratic
    # convergence otherwise drives the residual below what the residual
    # evaluation itself can resolve.
    tol_floor = 1e3 * tol
    for _ in range(settings.max_iter):
        if rnorm <= tol:
            return u, p, mult, history
        kkt = problem.jacobian(u)
        lu = _factorize(kkt, "Newton step")
        delta = lu.solve(-r)
        du, dp = delta[:nv], delta[nv:nv + npp]
        dm = delta[nv + npp:]

        step = 1.0
        for _ in range(9):
            u_try = u + step * du
            p_try = p + step * dp
            m_try = mult + step * dm
            r_try = problem.residual(u_try, p_try, m_try)
            rnorm_try = float(np.linalg.norm(r_try))
            if rnorm_try < rnorm or not settings.line_search:
                break
            step *= 0.5
        stagnated = step == 1.0 and rnorm_try > 0.5 * rnorm
        u, p, mult, r, rnorm = u_try, p_try, m_try, r_try, rnorm_try
        history.append(rnorm)
        if stagnated and rnorm <= tol_floor:
            return u, p, mult, history

    if rnorm <= tol:
        return u, p, mult, history
    raise NewtonError(
        f"Newton did not converge in {settings.max_iter} iterations "
        f"(residual history {['%.3e' % h for h in history]})",
        history,
    )


# ---------------------------------------------------------------------------
# Stationary problems.


@dataclass(eq=False)
class Spaces:
    """Bundle of dof maps and the trace map for one mesh."""

    mesh: Mesh
    vmap: VelocityDofMap
    pmap: PressureDofMap
    trace: TraceMap


def stationary_problem(
    spaces: Spaces,
    friction: FrictionSpec,
    eps: float,
    load: np.ndarray,
    nu: float,
) -> FrictionNewtonProblem:
    free = spaces.vmap.free_mask
    a = apply_dirichlet_operator(assemble_viscous(spaces.mesh, spaces.vmap, nu), free)
    div = apply_dirichlet_columns(
        assemble_divergence(spaces.mesh, spaces.vmap, spaces.pmap), free
    )
    return FrictionNewtonProblem(
        k_lin=a,
        div=div,
        mean=spaces.pmap.mean_vector,
        rhs_v=apply_dirichlet_rhs(load, free),
        rhs_p=np.zeros(spaces.pmap.num_dofs),
        rhs_mean=np.zeros(1),
        trace=spaces.trace,
        friction=friction,
        t=0.0,
        eps=eps,
        free_mask=free,
    )


def solve_stationary_regularized(
    spaces: Spaces,
    friction: FrictionSpec,
    eps: float,
    load: np.ndarray,
    nu: float,
    settings: NewtonSettings | None = None,
    start: State | None = None,
) -> State:
    """Stationary slip problem with the smoothed friction law."""
    settings = settings or NewtonSettings()
    problem = stationary_problem(spaces, friction, eps, load, nu)
    u0 = start.u if start is not None else None
    p0 = start.p if start is not None else None
    u, p, mult, history = newton_solve(problem, settings, u0=u0, p0=p0)
    return State(t=0.0, u=u, p=p, mean_mult=float(mult[0]), newton_iters=len(history) - 1)


def solve_stationary_vi(
    spaces: Spaces,
    friction: FrictionSpec,
    load: np.ndarray,
    nu: float,
    eps_schedule: list[float],
    settings: NewtonSettings | None = None,
) -> tuple[State, list[float]]:
    """Nonsmooth stationary problem via continuation in the smoothing width.

    Returns the final iterate and the H1 increments between consecutive
    continuation stages (for rate reporting).
    """
    eps_schedule = list(eps_schedule)
    if not eps_schedule or any(e <= 0 for e in eps_schedule):
        raise ValueError("eps schedule must be a nonempty positive sequence")
    if any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps schedule must be strictly decreasing")

    h1 = h1_gram(spaces.mesh, spaces.vmap)
    state = None
    increments: list[float] = []
    prev_u = None
    for eps in eps_schedule:
        state = solve_stationary_regularized(
            spaces, friction, eps, load, nu, settings, start=state
        )
        if prev_u is not None:
            d = state.u - prev_u
            increments.append(float(np.sqrt(d @ (h1 @ d))))
        prev_u = state.u
    return state, increments


def h1_gram(mesh: Mesh, vmap: VelocityDofMap) -> sp.csr_matrix:
    """Full H1 inner-product matrix (mass plus gradient)."""
    return (assemble_mass(mesh, vmap) + assemble_gradient(mesh, vmap)).tocsr()


# ---------------------------------------------------------------------------
# Linear reference solves used by the limit experiments.


def solve_stokes_clamped(
    spaces: Spaces, load: np.ndarray, nu: float
) -> tuple[np.ndarray, np.ndarray]:
    """Stokes with the interface clamped to zero velocity (Dirichlet limit).

    The subdomains decouple, so the pressure needs one mean constraint per
    subdomain to stay determined.
    """
    vmap, pmap = spaces.vmap, spaces.pmap
    free = vmap.free_mask.copy()
    free[vmap.interface_dofs] = False
    a = apply_dirichlet_operator(assemble_viscous(spaces.mesh, vmap, nu), free)
    div = apply_dirichlet_columns(assemble_divergence(spaces.mesh, vmap, pmap), free)
    means = np.zeros((pmap.num_dofs, 2))
    means[pmap.dof_side == IN, 0] = pmap.mean_vector[pmap.dof_side == IN]
    means[pmap.dof_side != IN, 1] = pmap.mean_vector[pmap.dof_side != IN]
    system = SaddleSystem(
        a=a,
        div=div,
        mean=means,
        rhs_v=apply_dirichlet_rhs(load, free),
        rhs_p=np.zeros(pmap.num_dofs),
        rhs_mean=np.zeros(2),
    )
    u, p, _ = solve_saddle(system)
    return u, p


def solve_stokes_single_pressure(
    mesh: Mesh,
    vmap: VelocityDofMap,
    pmap_single: PressureDofMap,
    load: np.ndarray,
    nu: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Plain one-domain Stokes: no interface term, single-valued pressure."""
    free = vmap.free_mask
    a = apply_dirichlet_operator(assemble_viscous(mesh, vmap, nu), free)
    div = apply_dirichlet_columns(assemble_divergence(mesh, vmap, pmap_single), free)
    system = SaddleSystem(
        a=a,
        div=div,
        mean=pmap_single.mean_vector,
        rhs_v=apply_dirichlet_rhs(load, free),
        rhs_p=np.zeros(pmap_single.num_dofs),
        rhs_mean=np.zeros(1),
    )
    u, p, _ = solve_saddle(system)
    return u, p
