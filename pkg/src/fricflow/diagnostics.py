"""Post-processing: interface traction recovery, complementarity residuals,
pressure-constant extraction, norms, and the energy ledger of a run.

Traction is recovered twice: directly from the slip law (g times the
smoothed-absolute-value gradient of the trace, the exact discrete law) and
variationally from the momentum residual tested with interface basis
functions, mass-lumped to quadrature points. Invariant checks use the direct
form; the variational form carries discretization error and is reported.
"""

from __future__ import annotations

from dataclasses import dataclass
from weakref import WeakKeyDictionary

import numpy as np

from .assembly import (
    assemble_convection_skew,
    assemble_divergence,
    assemble_gradient,
    assemble_interface_mass,
    assemble_load,
    assemble_mass,
    assemble_pressure_mass,
    assemble_viscous,
)
from .fields import ForceSpec, FrictionSpec
from .mesh import subdomain_areas
from .regularization import smooth_abs_grad
from .solver import Spaces, State

# Post-processing reuses the same matrices for every state of a trajectory;
# cache them per Spaces bundle.
_OPS: WeakKeyDictionary = WeakKeyDictionary()


def _ops(spaces: Spaces) -> dict:
    cache = _OPS.get(spaces)
    if cache is None:
        cache = {}
        _OPS[spaces] = cache
    return cache


def _cached(spaces: Spaces, key, builder):
    cache = _ops(spaces)
    if key not in cache:
        cache[key] = builder()
    return cache[key]


@dataclass
class InterfaceStress:
    """Per-quadrature-point interface data; arrays are (edges, points, ...)."""

    points: np.ndarray
    g: np.ndarray
    u_trace: np.ndarray
    traction: np.ndarray              # direct: g * grad_rho(u); authoritative
    traction_variational: np.ndarray  # lumped momentum-residual recovery
    defect: np.ndarray                # g |u| - traction . u
    slack: np.ndarray                 # g - |traction|
    recovery_gap_l2: float            # interface L2 distance of the recoveries


@dataclass
class PressureConstants:
    """Additive pressure constants induced by the interface traction shift."""

    jump: float         # k_out - k_in
    k_in: float
    k_out: float
    constancy_residual: float
    unique: bool        # False when u.n vanishes on the whole interface


def _interface_lumped_mass(spaces: Spaces) -> np.ndarray:
    """Scalar lumped trace mass per interface node (0 elsewhere)."""
    def build():
        trace = spaces.trace
        lump = np.zeros(spaces.vmap.num_nodes)
        contrib = np.einsum("eq,qk->ek", trace.weights, trace.shapes)
        np.add.at(lump, trace.edge_nodes.ravel(), contrib.ravel())
        return lump

    return _cached(spaces, "lump", build)


def _recover_nodal(spaces: Spaces, functional: np.ndarray) -> np.ndarray:
    """Lump an interface functional to nodal vector values; (nn, 2)."""
    lump = _interface_lumped_mass(spaces)
    nodes = np.unique(spaces.trace.edge_nodes)
    out = np.zeros((spaces.vmap.num_nodes, 2))
    out[nodes, 0] = functional[2 * nodes] / lump[nodes]
    out[nodes, 1] = functional[2 * nodes + 1] / lump[nodes]
    return out


def _nodal_at_quadrature(spaces: Spaces, nodal: np.ndarray) -> np.ndarray:
    trace = spaces.trace
    per_edge = nodal[trace.edge_nodes]           # (ne, 3, 2)
    return np.einsum("qk,ekd->eqd", trace.shapes, per_edge)


def momentum_residual(
    state: State,
    spaces: Spaces,
    nu: float,
    force: ForceSpec | None = None,
    udot: np.ndarray | None = None,
    include_convection: bool = False,
) -> np.ndarray:
    """f(t) - M udot - A u - N(u) u - D^T p, the raw traction functional."""
    mesh, vmap, pmap = spaces.mesh, spaces.vmap, spaces.pmap
    r = np.zeros(vmap.num_dofs)
    if force is not None:
        r += assemble_load(mesh, vmap, force, state.t)
    if udot is not None:
        r -= _cached(spaces, "mass", lambda: assemble_mass(mesh, vmap)) @ udot
    r -= _cached(spaces, ("viscous", nu), lambda: assemble_viscous(mesh, vmap, nu)) @ state.u
    if include_convection:
        r -= assemble_convection_skew(mesh, vmap, state.u) @ state.u
    r -= _cached(spaces, "div", lambda: assemble_divergence(mesh, vmap, pmap)).T @ state.p
    return r


def recover_interface_stress(
    state: State,
    spaces: Spaces,
    friction: FrictionSpec,
    eps: float,
    nu: float,
    force: ForceSpec | None = None,
    udot: np.ndarray | None = None,
    include_convection: bool = False,
) -> InterfaceStress:
    trace = spaces.trace
    g = friction.sample(state.t, trace.points, trace.arclength)
    u_q = trace.edge_values(state.u)
    direct = g[..., None] * smooth_abs_grad(u_q, eps)

    resid = momentum_residual(state, spaces, nu, force, udot, include_convection)
    variational = _nodal_at_quadrature(spaces, _recover_nodal(spaces, resid))

    gap = direct - variational
    gap_l2 = float(np.sqrt(np.sum(trace.weights * np.sum(gap * gap, axis=-1))))

    speed = np.linalg.norm(u_q, axis=-1)
    defect = g * speed - np.sum(direct * u_q, axis=-1)
    slack = g - np.linalg.norm(direct, axis=-1)
    return InterfaceStress(
        points=trace.points,
        g=g,
        u_trace=u_q,
        traction=direct,
        traction_variational=variational,
        defect=defect,
        slack=slack,
        recovery_gap_l2=gap_l2,
    )


def _interface_normal_field(spaces: Spaces) -> np.ndarray:
    """Interface nodal field carrying the outward normal (corner-averaged)."""
    trace = spaces.trace
    nn = spaces.vmap.num_nodes
    acc = np.zeros((nn, 2))
    cnt = np.zeros(nn)
    for k in range(trace.num_edges):
        for node in trace.edge_nodes[k]:
            acc[node] += trace.normals[k]
            cnt[node] += 1.0
    nodes = cnt > 0
    acc[nodes] /= cnt[nodes, None]
    return acc.reshape(-1)


def recover_pressure_constants(
    state: State, spaces: Spaces, stress: InterfaceStress
) -> PressureConstants:
    """Interface-averaged normal component of (variational-recovery-with-p-ring
    minus variational-recovery-with-p), and the induced additive constants."""
    trace, pmap = spaces.trace, spaces.pmap
    mesh, vmap = spaces.mesh, spaces.vmap

    un = np.einsum("eqd,ed->eq", stress.u_trace, trace.normals)
    un_l2 = float(np.sqrt(np.sum(trace.weights * un * un)))
    h1 = _cached(
        spaces, "h1", lambda: assemble_mass(mesh, vmap) + assemble_gradient(mesh, vmap)
    )
    u_h1 = float(np.sqrt(state.u @ (h1 @ state.u)))
    a_in, a_out = subdomain_areas(spaces.mesh)

    m_in, m_out = pmap.subdomain_means(state.p)
    shift = pmap.constant_field(m_in, m_out)
    # <lam_ring - lam, v> = b(v, p - p_ring) for every discrete v; pair with a
    # fixed interface field of nonzero net flux to read off the constant.
    diff_functional = _cached(spaces, "div", lambda: assemble_divergence(mesh, vmap, pmap)).T @ shift
    v_star = _interface_normal_field(spaces)
    vn = np.einsum("eqd,ed->eq", _nodal_at_quadrature(spaces, v_star.reshape(-1, 2)), trace.normals)
    denom = float(np.sum(trace.weights * vn))
    jump = float(v_star @ diff_functional) / denom

    diff_samples = np.einsum(
        "eqd,ed->eq",
        _nodal_at_quadrature(spaces, _recover_nodal(spaces, diff_functional)),
        trace.normals,
    )
    total_len = float(trace.weights.sum())
    mean_s = float(np.sum(trace.weights * diff_samples)) / total_len
    constancy = float(np.sqrt(np.sum(trace.weights * (diff_samples - mean_s) ** 2) / total_len))

    unique = un_l2 > 1e-10 * u_h1
    if not unique:
        jump = 0.0
    total = a_in + a_out
    return PressureConstants(
        jump=jump,
        k_in=-jump * a_out / total,
        k_out=jump * a_in / total,
        constancy_residual=constancy,
        unique=unique,
    )


def slip_law_samples(
    state: State, spaces: Spaces, friction: FrictionSpec, eps: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(g, defect, slack) of the direct slip law at the trace quadrature
    points; the cheap per-state complementarity check."""
    trace = spaces.trace
    g = friction.sample(state.t, trace.points, trace.arclength)
    u_q = trace.edge_values(state.u)
    traction = g[..., None] * smooth_abs_grad(u_q, eps)
    defect = g * np.linalg.norm(u_q, axis=-1) - np.sum(traction * u_q, axis=-1)
    slack = g - np.linalg.norm(traction, axis=-1)
    return g, defect, slack


def norms(state: State, spaces: Spaces) -> dict:
    """L2/H1 velocity, interface trace L2, and pressure L2 norms."""
    mesh, vmap, pmap = spaces.mesh, spaces.vmap, spaces.pmap
    mass = _cached(spaces, "mass", lambda: assemble_mass(mesh, vmap))
    grad = _cached(spaces, "grad", lambda: assemble_gradient(mesh, vmap))
    iface = _cached(spaces, "iface", lambda: assemble_interface_mass(spaces.trace, vmap.num_dofs))
    pmass = _cached(spaces, "pmass", lambda: assemble_pressure_mass(mesh, pmap))
    u, p = state.u, state.p
    return {
        "velocity_l2": float(np.sqrt(u @ (mass @ u))),
        "velocity_h1": float(np.sqrt(u @ ((mass + grad) @ u))),
        "trace_l2": float(np.sqrt(u @ (iface @ u))),
        "pressure_l2": float(np.sqrt(p @ (pmass @ p))),
    }


def error_norms(
    spaces: Spaces,
    u: np.ndarray,
    exact_velocity,
    exact_gradient=None,
) -> dict:
    """L2 (and H1, when the exact gradient is given) distance to a closed-form
    field, integrated with the degree-6 triangle rule."""
    from .quadrature import triangle_rule
    from .spaces import grad_p2, shape_p2

    mesh, vmap = spaces.mesh, spaces.vmap
    ref_pts, ref_wts = triangle_rule(6)
    p = mesh.vertices[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_jt = np.empty_like(jac)
    inv_jt[:, 0, 0] = jac[:, 1, 1]
    inv_jt[:, 0, 1] = -jac[:, 1, 0]
    inv_jt[:, 1, 0] = -jac[:, 0, 1]
    inv_jt[:, 1, 1] = jac[:, 0, 0]
    inv_jt /= det[:, None, None]
    wq = ref_wts[None, :] * (0.5 * det)[:, None]
    points = p[:, None, 0, :] + np.einsum("qe,ted->tqd", ref_pts, jac.transpose(0, 2, 1))

    shp = shape_p2(ref_pts)
    u_nodal = u[vmap.tri_dofs()].reshape(-1, 6, 2)
    u_h = np.einsum("qk,tkd->tqd", shp, u_nodal)
    diff = u_h - exact_velocity(points[..., 0], points[..., 1])
    out = {"l2": float(np.sqrt(np.sum(wq * np.sum(diff * diff, axis=-1))))}
    if exact_gradient is not None:
        grads = np.einsum("tde,qke->tqkd", inv_jt, grad_p2(ref_pts))
        gu_h = np.einsum("tqkj,tki->tqij", grads, u_nodal)
        gdiff = gu_h - exact_gradient(points[..., 0], points[..., 1])
        seminorm2 = np.sum(wq * np.sum(gdiff * gdiff, axis=(-2, -1)))
        out["h1"] = float(np.sqrt(out["l2"] ** 2 + seminorm2))
    return out


@dataclass
class EnergyReport:
    rows: list[dict]
    cumulative_dissipation: float
    max_identity_residual_rel: float
    sup_energy: float
    monotonicity_violations: list[int]


def energy_report(trajectory, forced: bool | None = None) -> EnergyReport:
    """Per-step energy identity residuals and dissipation bookkeeping."""
    steps = trajectory.energy_steps
    if forced is None:
        forced = trajectory.cfg.force.kind != "zero"
    dissipation = 0.0
    violations = []
    max_rel = 0.0
    sup_energy = trajectory.rows[0]["energy"] if trajectory.rows else 0.0
    for k, s in enumerate(steps):
        dissipation += s["viscous"] + s["friction_power"]
        max_rel = max(max_rel, s["identity_residual_rel"])
        sup_energy = max(sup_energy, s["energy_new"])
        if not forced and s["energy_new"] > s["energy_old"]:
            violations.append(k)
    return EnergyReport(
        rows=list(steps),
        cumulative_dissipation=dissipation,
        max_identity_residual_rel=max_rel,
        sup_energy=sup_energy,
        monotonicity_violations=violations,
    )
