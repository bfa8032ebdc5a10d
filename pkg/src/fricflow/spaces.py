"""Degree-of-freedom maps for the velocity/pressure pair and interface traces.

Velocity: continuous piecewise-quadratic vector fields (nodes at vertices and
edge midpoints), single-valued across the interface, masked on the outer
Dirichlet boundary. Pressure: piecewise-linear, continuous within each
subdomain, with duplicated dofs at interface vertices so the field may jump
across the interface; the global zero mean is imposed by the solver through
``mean_vector``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import IN, Mesh
from .quadrature import gauss_rule

# ---------------------------------------------------------------------------
# Reference P2 / P1 elements on the unit triangle (nodes: 3 vertices then the
# midpoints of edges 01, 12, 20).


def shape_p2(points: np.ndarray) -> np.ndarray:
    """P2 shape values; points (nq, 2) -> (nq, 6)."""
    xi, eta = points[:, 0], points[:, 1]
    lam = 1.0 - xi - eta
    return np.column_stack([
        lam * (2 * lam - 1),
        xi * (2 * xi - 1),
        eta * (2 * eta - 1),
        4 * lam * xi,
        4 * xi * eta,
        4 * eta * lam,
    ])


def grad_p2(points: np.ndarray) -> np.ndarray:
    """P2 reference gradients; points (nq, 2) -> (nq, 6, 2)."""
    xi, eta = points[:, 0], points[:, 1]
    lam = 1.0 - xi - eta
    g = np.empty((len(points), 6, 2))
    g[:, 0, 0] = 1 - 4 * lam
    g[:, 0, 1] = 1 - 4 * lam
    g[:, 1, 0] = 4 * xi - 1
    g[:, 1, 1] = 0.0
    g[:, 2, 0] = 0.0
    g[:, 2, 1] = 4 * eta - 1
    g[:, 3, 0] = 4 * (lam - xi)
    g[:, 3, 1] = -4 * xi
    g[:, 4, 0] = 4 * eta
    g[:, 4, 1] = 4 * xi
    g[:, 5, 0] = -4 * eta
    g[:, 5, 1] = 4 * (lam - eta)
    return g


def shape_p1(points: np.ndarray) -> np.ndarray:
    """P1 shape values; points (nq, 2) -> (nq, 3)."""
    xi, eta = points[:, 0], points[:, 1]
    return np.column_stack([1.0 - xi - eta, xi, eta])


GRAD_P1 = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def edge_shape_p2(s: np.ndarray) -> np.ndarray:
    """Quadratic trace shapes on an edge, s in [-1, 1]; nodes (a, b, mid)."""
    return np.column_stack([0.5 * s * (s - 1), 0.5 * s * (s + 1), 1.0 - s * s])


# ---------------------------------------------------------------------------


@dataclass
class VelocityDofMap:
    mesh: Mesh
    node_coords: np.ndarray      # (nn, 2)
    tri_nodes: np.ndarray        # (nt, 6) global node ids
    edge_midnode: dict           # sorted vertex pair -> midpoint node id
    dirichlet_mask: np.ndarray   # (2 nn,) bool, True = constrained
    interface_nodes: np.ndarray  # node ids on the interface
    interface_dofs: np.ndarray   # dof ids on the interface

    @property
    def num_nodes(self) -> int:
        return len(self.node_coords)

    @property
    def num_dofs(self) -> int:
        return 2 * len(self.node_coords)

    @property
    def free_mask(self) -> np.ndarray:
        return ~self.dirichlet_mask

    def tri_dofs(self) -> np.ndarray:
        """(nt, 12) dof ids, interleaved (node, component)."""
        nodes = self.tri_nodes
        out = np.empty((len(nodes), 12), dtype=np.int64)
        out[:, 0::2] = 2 * nodes
        out[:, 1::2] = 2 * nodes + 1
        return out

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolation of a callable (x, y) -> (2,) field."""
        vals = np.asarray([func(x, y) for x, y in self.node_coords], dtype=float)
        return vals.reshape(-1)

    def apply_dirichlet(self, coeffs: np.ndarray) -> np.ndarray:
        out = coeffs.copy()
        out[self.dirichlet_mask] = 0.0
        return out


@dataclass
class PressureDofMap:
    mesh: Mesh
    tri_pdofs: np.ndarray    # (nt, 3) pressure dof per triangle corner
    dof_vertex: np.ndarray   # (np,) owning vertex of each dof
    dof_side: np.ndarray     # (np,) IN/OUT support side of each dof
    mean_vector: np.ndarray  # (np,) dof -> integral of its basis function

    @property
    def num_dofs(self) -> int:
        return len(self.mean_vector)

    def subdomain_means(self, p: np.ndarray) -> tuple[float, float]:
        """Mean of the pressure field over IN and over OUT."""
        m = self.mean_vector
        side = self.dof_side
        int_in = float(m[side == IN] @ p[side == IN])
        int_out = float(m[side != IN] @ p[side != IN])
        area_in = float(m[side == IN].sum())
        area_out = float(m[side != IN].sum())
        return int_in / area_in, int_out / area_out

    def constant_field(self, c_in: float, c_out: float) -> np.ndarray:
        out = np.empty(self.num_dofs)
        out[self.dof_side == IN] = c_in
        out[self.dof_side != IN] = c_out
        return out


@dataclass
class TraceMap:
    """Interface-edge evaluation data for velocity coefficient vectors."""

    mesh: Mesh
    edge_nodes: np.ndarray    # (ne, 3) velocity node ids (a, b, mid)
    edge_dofs: np.ndarray     # (ne, 6) dof ids, interleaved components
    points: np.ndarray        # (ne, nq, 2) quadrature points
    weights: np.ndarray       # (ne, nq) physical weights (sum = edge length)
    normals: np.ndarray       # (ne, 2)
    tangents: np.ndarray      # (ne, 2)
    arclength: np.ndarray     # (ne, nq) arclength from the traversal start
    shapes: np.ndarray        # (nq, 3) edge shape values

    @property
    def num_edges(self) -> int:
        return len(self.edge_dofs)

    @property
    def num_points(self) -> int:
        return self.points.shape[1]

    def edge_values(self, coeffs: np.ndarray) -> np.ndarray:
        """Velocity at every quadrature point; (ne, nq, 2)."""
        nodal = coeffs[self.edge_dofs].reshape(self.num_edges, 3, 2)
        return np.einsum("qk,ekd->eqd", self.shapes, nodal)

    def integrate_scalar(self, samples: np.ndarray) -> float:
        """Integrate per-quadrature-point samples (ne, nq) over the interface."""
        return float(np.sum(self.weights * samples))


# ---------------------------------------------------------------------------


def _on_segment_box(coords: np.ndarray, box) -> np.ndarray:
    x0, y0, x1, y1 = box
    x, y = coords[:, 0], coords[:, 1]
    tol = 1e-12
    on_v = (np.isclose(x, x0, atol=tol) | np.isclose(x, x1, atol=tol)) & (y > y0 - tol) & (y < y1 + tol)
    on_h = (np.isclose(y, y0, atol=tol) | np.isclose(y, y1, atol=tol)) & (x > x0 - tol) & (x < x1 + tol)
    return on_v | on_h


def build_velocity_space(mesh: Mesh) -> VelocityDofMap:
    """Enumerate P2 nodes (vertices, then edge midpoints in triangle order)."""
    nv = mesh.num_vertices
    coords = [mesh.vertices]
    edge_midnode: dict[tuple[int, int], int] = {}
    tri_nodes = np.empty((mesh.num_triangles, 6), dtype=np.int64)
    next_id = nv
    mids = []
    for t, tri in enumerate(mesh.triangles):
        tri_nodes[t, :3] = tri
        for k, (a, b) in enumerate(((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0]))):
            key = (min(a, b), max(a, b))
            node = edge_midnode.get(key)
            if node is None:
                node = next_id
                next_id += 1
                edge_midnode[key] = node
                mids.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))
            tri_nodes[t, 3 + k] = node
    coords.append(np.array(mids).reshape(-1, 2))
    node_coords = np.vstack(coords)

    on_dirichlet = _on_segment_box(node_coords, mesh.config.outer_box)
    on_interface = _on_segment_box(node_coords, mesh.config.inner_box)
    dirichlet_mask = np.repeat(on_dirichlet, 2)
    interface_nodes = np.flatnonzero(on_interface)
    interface_dofs = np.sort(np.concatenate([2 * interface_nodes, 2 * interface_nodes + 1]))

    return VelocityDofMap(
        mesh=mesh,
        node_coords=node_coords,
        tri_nodes=tri_nodes,
        edge_midnode=edge_midnode,
        dirichlet_mask=dirichlet_mask,
        interface_nodes=interface_nodes,
        interface_dofs=interface_dofs,
    )


def build_pressure_space(mesh: Mesh) -> PressureDofMap:
    """Vertex pressure dofs with duplicated copies at interface vertices.

    Dof v (v a vertex id) is the base copy; interface vertices get an extra
    OUT-side copy appended after all vertices. IN triangles always address
    the base copy.
    """
    nv = mesh.num_vertices
    iface = mesh.interface_vertex_ids()
    extra_of = {int(v): nv + k for k, v in enumerate(iface)}

    tri_pdofs = np.empty((mesh.num_triangles, 3), dtype=np.int64)
    for t, tri in enumerate(mesh.triangles):
        if mesh.tri_labels[t] == IN:
            tri_pdofs[t] = tri
        else:
            tri_pdofs[t] = [extra_of.get(int(v), int(v)) for v in tri]

    ndofs = nv + len(iface)
    dof_vertex = np.concatenate([np.arange(nv), iface]).astype(np.int64)

    dof_side = np.full(ndofs, -1, dtype=np.int8)
    areas = mesh.signed_areas()
    mean_vector = np.zeros(ndofs)
    for t in range(mesh.num_triangles):
        lab = mesh.tri_labels[t]
        for d in tri_pdofs[t]:
            dof_side[d] = lab
            mean_vector[d] += areas[t] / 3.0
    if np.any(dof_side < 0):
        raise RuntimeError("pressure dof without supporting triangle")

    return PressureDofMap(
        mesh=mesh,
        tri_pdofs=tri_pdofs,
        dof_vertex=dof_vertex,
        dof_side=dof_side,
        mean_vector=mean_vector,
    )


def build_single_pressure_space(mesh: Mesh) -> PressureDofMap:
    """One pressure dof per vertex, continuous across the interface.

    Reference space for the zero-threshold (Neumann) comparison; dof_side is
    ill-defined at interface vertices and subdomain_means must not be used.
    """
    nv = mesh.num_vertices
    tri_pdofs = mesh.triangles.copy()
    dof_side = np.full(nv, -1, dtype=np.int8)
    areas = mesh.signed_areas()
    mean_vector = np.zeros(nv)
    for t in range(mesh.num_triangles):
        for d in tri_pdofs[t]:
            dof_side[d] = mesh.tri_labels[t]
            mean_vector[d] += areas[t] / 3.0
    return PressureDofMap(
        mesh=mesh,
        tri_pdofs=tri_pdofs,
        dof_vertex=np.arange(nv, dtype=np.int64),
        dof_side=dof_side,
        mean_vector=mean_vector,
    )


def build_trace_map(mesh: Mesh, vmap: VelocityDofMap, quad_order: int = 3) -> TraceMap:
    """Gauss quadrature and trace evaluation data on the interface edges."""
    if quad_order < 1:
        raise ValueError(f"quad_order must be >= 1, got {quad_order}")
    gpts, gwts = gauss_rule(quad_order)

    ne = len(mesh.interface_edges)
    edge_nodes = np.empty((ne, 3), dtype=np.int64)
    points = np.empty((ne, quad_order, 2))
    weights = np.empty((ne, quad_order))
    arclength = np.empty((ne, quad_order))
    s_offset = 0.0
    for k, (a, b) in enumerate(mesh.interface_edges):
        mid = vmap.edge_midnode[(min(int(a), int(b)), max(int(a), int(b)))]
        edge_nodes[k] = (a, b, mid)
        pa, pb = mesh.vertices[a], mesh.vertices[b]
        length = float(np.linalg.norm(pb - pa))
        points[k] = pa[None, :] + 0.5 * (gpts[:, None] + 1.0) * (pb - pa)[None, :]
        weights[k] = gwts * (length / 2.0)
        arclength[k] = s_offset + 0.5 * (gpts + 1.0) * length
        s_offset += length

    edge_dofs = np.empty((ne, 6), dtype=np.int64)
    edge_dofs[:, 0::2] = 2 * edge_nodes
    edge_dofs[:, 1::2] = 2 * edge_nodes + 1

    tangents = mesh.vertices[mesh.interface_edges[:, 1]] - mesh.vertices[mesh.interface_edges[:, 0]]
    tangents /= np.linalg.norm(tangents, axis=1)[:, None]

    return TraceMap(
        mesh=mesh,
        edge_nodes=edge_nodes,
        edge_dofs=edge_dofs,
        points=points,
        weights=weights,
        normals=mesh.interface_normals.copy(),
        tangents=tangents,
        arclength=arclength,
        shapes=edge_shape_p2(gpts),
    )
