"""Discrete operators: viscous stiffness, divergence coupling, mass,
skew-symmetrised convection, interface friction residual/Jacobian, loads,
and the friction dissipation functionals.

All volume operators use the fixed degree-4 triangle rule; interface terms
use the trace map's Gauss rule. Operators are returned raw (no boundary
masking); apply_dirichlet_* imposes the mask with unit diagonals.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .fields import ForceSpec, FrictionSpec
from .mesh import Mesh
from .quadrature import triangle_rule
from .regularization import smooth_abs, smooth_abs_grad, smooth_abs_hess
from .spaces import (
    GRAD_P1,
    PressureDofMap,
    TraceMap,
    VelocityDofMap,
    grad_p2,
    shape_p1,
    shape_p2,
)


def _geometry(mesh: Mesh, degree: int = 4):
    """Per-triangle quadrature data: points, weights, physical P2 gradients."""
    ref_pts, ref_wts = triangle_rule(degree)
    p = mesh.vertices[mesh.triangles]          # (nt, 3, 2)
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)  # (nt, 2, 2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_jt = np.empty_like(jac)
    inv_jt[:, 0, 0] = jac[:, 1, 1]
    inv_jt[:, 0, 1] = -jac[:, 1, 0]
    inv_jt[:, 1, 0] = -jac[:, 0, 1]
    inv_jt[:, 1, 1] = jac[:, 0, 0]
    inv_jt /= det[:, None, None]

    area = 0.5 * det
    wq = ref_wts[None, :] * area[:, None]                     # (nt, nq)
    grads = np.einsum("tde,qke->tqkd", inv_jt, grad_p2(ref_pts))  # (nt, nq, 6, 2)
    points = p[:, None, 0, :] + np.einsum("qe,ted->tqd", ref_pts, jac.transpose(0, 2, 1))
    return ref_pts, wq, grads, points


def _scatter_square(blocks: np.ndarray, dofs: np.ndarray, ndof: int) -> sp.csr_matrix:
    nloc = dofs.shape[1]
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    mat = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=(ndof, ndof))
    return mat.tocsr()


def _scatter_rect(blocks, row_dofs, col_dofs, shape) -> sp.csr_matrix:
    nr, nc = row_dofs.shape[1], col_dofs.shape[1]
    rows = np.repeat(row_dofs, nc, axis=1).ravel()
    cols = np.tile(col_dofs, (1, nr)).ravel()
    mat = sp.coo_matrix((blocks.ravel(), (rows, cols)), shape=shape)
    return mat.tocsr()


def _vector_blocks_from_scalar(scalar_blocks: np.ndarray) -> np.ndarray:
    """Expand (nt, a, b) scalar blocks into (nt, 2a, 2b) component-diagonal blocks."""
    nt, na, nb = scalar_blocks.shape
    out = np.zeros((nt, 2 * na, 2 * nb))
    out[:, 0::2, 0::2] = scalar_blocks
    out[:, 1::2, 1::2] = scalar_blocks
    return out


# ---------------------------------------------------------------------------
# Volume operators.


def assemble_viscous(mesh: Mesh, vmap: VelocityDofMap, nu: float) -> sp.csr_matrix:
    """2 nu (e(u), e(v)): symmetric, PSD, coercive once Dirichlet-masked."""
    if not nu > 0:
        raise ValueError(f"viscosity must be positive, got {nu}")
    _, wq, grads, _ = _geometry(mesh)
    lap = np.einsum("tq,tqad,tqbd->tab", wq, grads, grads)
    cross = np.einsum("tq,tqbi,tqaj->tabij", wq, grads, grads)
    blocks = nu * _vector_blocks_from_scalar(lap)
    nt = len(mesh.triangles)
    cross = cross.transpose(0, 1, 3, 2, 4).reshape(nt, 12, 12)
    blocks += nu * cross
    return _scatter_square(blocks, vmap.tri_dofs(), vmap.num_dofs)


def assemble_gradient(mesh: Mesh, vmap: VelocityDofMap) -> sp.csr_matrix:
    """(grad u, grad v), the H1-seminorm Gram matrix."""
    _, wq, grads, _ = _geometry(mesh)
    lap = np.einsum("tq,tqad,tqbd->tab", wq, grads, grads)
    return _scatter_square(_vector_blocks_from_scalar(lap), vmap.tri_dofs(), vmap.num_dofs)


def assemble_mass(mesh: Mesh, vmap: VelocityDofMap) -> sp.csr_matrix:
    """(u, v) velocity mass matrix."""
    ref_pts, wq, _, _ = _geometry(mesh)
    shp = shape_p2(ref_pts)
    m = np.einsum("tq,qa,qb->tab", wq, shp, shp)
    return _scatter_square(_vector_blocks_from_scalar(m), vmap.tri_dofs(), vmap.num_dofs)


def assemble_divergence(mesh: Mesh, vmap: VelocityDofMap, pmap: PressureDofMap) -> sp.csr_matrix:
    """Rows are pressure tests: entry (i, j) = -(div phi_j, psi_i)."""
    ref_pts, wq, grads, _ = _geometry(mesh)
    p1 = shape_p1(ref_pts)
    blk = -np.einsum("tq,qa,tqbj->tabj", wq, p1, grads)
    nt = len(mesh.triangles)
    return _scatter_rect(
        blk.reshape(nt, 3, 12),
        pmap.tri_pdofs,
        vmap.tri_dofs(),
        (pmap.num_dofs, vmap.num_dofs),
    )


def assemble_pressure_mass(mesh: Mesh, pmap: PressureDofMap) -> sp.csr_matrix:
    ref_pts, wq, _, _ = _geometry(mesh)
    p1 = shape_p1(ref_pts)
    m = np.einsum("tq,qa,qb->tab", wq, p1, p1)
    return _scatter_square(m, pmap.tri_pdofs, pmap.num_dofs)


def _convection_matrix(mesh, vmap, w: np.ndarray) -> sp.csr_matrix:
    """Raw transport matrix C with C[(a,i),(b,i)] = ((w . grad) phi_b, phi_a)."""
    ref_pts, wq, grads, _ = _geometry(mesh)
    shp = shape_p2(ref_pts)
    w_nodal = w[vmap.tri_dofs()].reshape(-1, 6, 2)
    w_q = np.einsum("qk,tkd->tqd", shp, w_nodal)
    wdotg = np.einsum("tqd,tqbd->tqb", w_q, grads)
    c = np.einsum("tq,qa,tqb->tab", wq, shp, wdotg)
    return _scatter_square(_vector_blocks_from_scalar(c), vmap.tri_dofs(), vmap.num_dofs)


def assemble_convection_skew(mesh: Mesh, vmap: VelocityDofMap, w: np.ndarray) -> sp.csr_matrix:
    """Skew-symmetrised convection N(w); c^T N(w) c = 0 by construction."""
    c = _convection_matrix(mesh, vmap, w)
    return ((c - c.T) * 0.5).tocsr()


def assemble_convection_skew_dw(mesh: Mesh, vmap: VelocityDofMap, u: np.ndarray) -> sp.csr_matrix:
    """Derivative of w -> N(w) u in w, for the fully implicit Newton step."""
    ref_pts, wq, grads, _ = _geometry(mesh)
    shp = shape_p2(ref_pts)
    u_nodal = u[vmap.tri_dofs()].reshape(-1, 6, 2)
    u_q = np.einsum("qk,tkd->tqd", shp, u_nodal)
    grad_u = np.einsum("tqkj,tki->tqij", grads, u_nodal)
    t1 = 0.5 * np.einsum("tq,qa,qb,tqij->taibj", wq, shp, shp, grad_u)
    t2 = 0.5 * np.einsum("tq,qb,tqaj,tqi->taibj", wq, shp, grads, u_q)
    nt = len(mesh.triangles)
    blocks = (t1 - t2).reshape(nt, 12, 12)
    return _scatter_square(blocks, vmap.tri_dofs(), vmap.num_dofs)


def assemble_load(mesh: Mesh, vmap: VelocityDofMap, force: ForceSpec, t: float) -> np.ndarray:
    """Component i of the result is the body force tested with phi_i."""
    ref_pts, wq, _, points = _geometry(mesh)
    shp = shape_p2(ref_pts)
    f = force.sample(t, points)
    blk = np.einsum("tq,qa,tqi->tai", wq, shp, f).reshape(len(mesh.triangles), 12)
    out = np.zeros(vmap.num_dofs)
    np.add.at(out, vmap.tri_dofs().ravel(), blk.ravel())
    return out


# ---------------------------------------------------------------------------
# Interface terms.


def _sample_g(trace: TraceMap, spec: FrictionSpec, t: float) -> np.ndarray:
    g = spec.sample(t, trace.points, trace.arclength)
    if np.any(g < 0):
        raise ValueError("friction threshold sampled negative on the interface")
    return g


def assemble_friction(
    trace: TraceMap,
    u: np.ndarray,
    spec: FrictionSpec,
    t: float,
    eps: float,
) -> tuple[np.ndarray, sp.csr_matrix]:
    """Robin-type slip residual and its exact Jacobian on the interface.

    residual_i = int_G g grad_rho(u) . phi_i ds,
    jacobian_ij = int_G g phi_i^T hess_rho(u) phi_j ds (symmetric PSD).
    """
    g = _sample_g(trace, spec, t)
    u_q = trace.edge_values(u)
    alpha = smooth_abs_grad(u_q, eps)
    beta = smooth_abs_hess(u_q, eps)

    wg = trace.weights * g
    res_loc = np.einsum("eq,eqi,qk->eki", wg, alpha, trace.shapes)
    ne = trace.num_edges
    residual = np.zeros(len(u))
    np.add.at(residual, trace.edge_dofs.ravel(), res_loc.reshape(ne, 6).ravel())

    jac_loc = np.einsum("eq,qk,ql,eqij->ekilj", wg, trace.shapes, trace.shapes, beta)
    jac = _scatter_rect(
        jac_loc.reshape(ne, 6, 6), trace.edge_dofs, trace.edge_dofs, (len(u), len(u))
    )
    return residual, jac


def assemble_interface_mass(trace: TraceMap, ndof: int) -> sp.csr_matrix:
    """Trace mass matrix on the interface (vector components uncoupled)."""
    m = np.einsum("eq,qk,ql->ekl", trace.weights, trace.shapes, trace.shapes)
    blocks = _vector_blocks_from_scalar(m)
    return _scatter_rect(blocks, trace.edge_dofs, trace.edge_dofs, (ndof, ndof))


def friction_dissipation(trace: TraceMap, u: np.ndarray, spec: FrictionSpec, t: float) -> float:
    """int_G g |u| ds at the trace quadrature points."""
    g = _sample_g(trace, spec, t)
    u_q = trace.edge_values(u)
    return trace.integrate_scalar(g * np.linalg.norm(u_q, axis=-1))


def friction_dissipation_smoothed(
    trace: TraceMap, u: np.ndarray, spec: FrictionSpec, t: float, eps: float
) -> float:
    """int_G g rho(u) ds with the smoothed absolute value."""
    g = _sample_g(trace, spec, t)
    u_q = trace.edge_values(u)
    return trace.integrate_scalar(g * smooth_abs(u_q, eps))


def friction_integral(trace: TraceMap, spec: FrictionSpec, t: float) -> float:
    """int_G g ds, the scale in the dissipation gap bound."""
    g = _sample_g(trace, spec, t)
    return trace.integrate_scalar(g)


# ---------------------------------------------------------------------------
# Dirichlet masking: replace constrained rows/columns by the identity.


def apply_dirichlet_operator(op: sp.csr_matrix, free_mask: np.ndarray) -> sp.csr_matrix:
    zf = sp.diags(free_mask.astype(float))
    pinned = sp.diags((~free_mask).astype(float))
    return (zf @ op @ zf + pinned).tocsr()


def apply_dirichlet_columns(op: sp.csr_matrix, free_mask: np.ndarray) -> sp.csr_matrix:
    return (op @ sp.diags(free_mask.astype(float))).tocsr()


def mask_rows_cols(op: sp.csr_matrix, free_mask: np.ndarray) -> sp.csr_matrix:
    """Zero constrained rows and columns without adding identity entries.

    Used for operator increments added onto an already-masked block.
    """
    zf = sp.diags(free_mask.astype(float))
    return (zf @ op @ zf).tocsr()


def apply_dirichlet_rhs(rhs: np.ndarray, free_mask: np.ndarray) -> np.ndarray:
    out = rhs.copy()
    out[~free_mask] = 0.0
    return out
