"""Structured two-subdomain triangulation with a tagged interior interface.

The outer rectangle is tiled by an n-per-unit-length grid of squares, each
split into two counterclockwise triangles along the same diagonal. Triangles
are labelled IN (inside the inner box) or OUT, the boundary of the inner box
becomes the interface, and the outer boundary carries the Dirichlet tag.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

IN = 0
OUT = 1

_ALIGN_TOL = 1e-12


@dataclass(frozen=True)
class MeshConfig:
    """Geometry of the two-subdomain rectangle.

    outer_box / inner_box are (x0, y0, x1, y1); n is the number of grid
    subdivisions per unit length. The inner box must sit strictly inside the
    outer box with its corners on grid lines.
    """

    outer_box: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)
    inner_box: tuple[float, float, float, float] = (0.25, 0.25, 0.75, 0.75)
    n: int = 8

    def validate(self) -> None:
        ox0, oy0, ox1, oy1 = self.outer_box
        ix0, iy0, ix1, iy1 = self.inner_box
        if not (ox0 < ox1 and oy0 < oy1):
            raise ValueError(f"outer_box {self.outer_box} is degenerate")
        if not (ix0 < ix1 and iy0 < iy1):
            raise ValueError(f"inner_box {self.inner_box} is degenerate")
        if not (ox0 < ix0 and ix1 < ox1 and oy0 < iy0 and iy1 < oy1):
            raise ValueError(
                f"inner_box {self.inner_box} must lie strictly inside outer_box {self.outer_box}"
            )
        if self.n < 1 or self.n != int(self.n):
            raise ValueError(f"n must be a positive integer, got {self.n}")
        h = 1.0 / self.n
        for name, lo, hi in (("x", ox0, ox1), ("y", oy0, oy1)):
            cells = (hi - lo) / h
            if abs(cells - round(cells)) > _ALIGN_TOL * max(1.0, abs(cells)):
                raise ValueError(
                    f"outer_box {name}-extent {hi - lo} is not a whole number of 1/{self.n} cells"
                )
        for name, val, origin in (
            ("x0", ix0, ox0), ("x1", ix1, ox0), ("y0", iy0, oy0), ("y1", iy1, oy0),
        ):
            k = (val - origin) / h
            if abs(k - round(k)) > _ALIGN_TOL * max(1.0, abs(k)):
                raise ValueError(
                    f"inner_box corner coordinate {name}={val} does not lie on the "
                    f"1/{self.n} grid; align it or change n"
                )
        for name, lo, hi in (("x", ix0, ix1), ("y", iy0, iy1)):
            if round((hi - lo) / h) < 2:
                raise ValueError(
                    f"inner box spans fewer than 2 cells in {name}; the interface "
                    f"would collide with the resolution limit (increase n)"
                )


@dataclass(eq=False)
class Mesh:
    """Immutable triangulation with subdomain labels and interface tagging.

    interface_edges rows are (va, vb) ordered counterclockwise around the
    inner box; interface_normals point away from the inner box (into OUT).
    interface_tris rows are (IN-triangle, OUT-triangle) adjacent to the edge.
    """

    config: MeshConfig
    vertices: np.ndarray          # (nv, 2) float
    triangles: np.ndarray         # (nt, 3) int, CCW
    tri_labels: np.ndarray        # (nt,) int, IN or OUT
    interface_edges: np.ndarray   # (ne, 2) int
    interface_normals: np.ndarray # (ne, 2) float, unit
    interface_tris: np.ndarray    # (ne, 2) int
    dirichlet_vertices: np.ndarray  # (nd,) int

    _hash: str = field(default="", repr=False)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def interface_vertex_ids(self) -> np.ndarray:
        return np.unique(self.interface_edges)

    def content_hash(self) -> str:
        if not self._hash:
            digest = hashlib.sha256(dump_text(self).encode()).hexdigest()[:16]
            object.__setattr__(self, "_hash", digest)
        return self._hash


@dataclass
class ValidationReport:
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def build_two_domain_mesh(cfg: MeshConfig) -> Mesh:
    """Triangulate the configured geometry; see Mesh for the result layout."""
    cfg.validate()
    ox0, oy0, ox1, oy1 = cfg.outer_box
    ix0, iy0, ix1, iy1 = cfg.inner_box
    h = 1.0 / cfg.n
    ncx = round((ox1 - ox0) / h)
    ncy = round((oy1 - oy0) / h)

    xs = ox0 + np.arange(ncx + 1) * h
    ys = oy0 + np.arange(ncy + 1) * h
    xs[-1], ys[-1] = ox1, oy1
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    def vid(i, j):
        return i * (ncy + 1) + j

    # Cell (i, j) splits along the v00-v11 diagonal; both triangles CCW.
    triangles = []
    labels = []
    cell_x0 = ox0 + np.arange(ncx) * h
    cell_y0 = oy0 + np.arange(ncy) * h
    for i in range(ncx):
        for j in range(ncy):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
            cx = cell_x0[i] + 0.5 * h
            cy = cell_y0[j] + 0.5 * h
            inside = ix0 < cx < ix1 and iy0 < cy < iy1
            lab = IN if inside else OUT
            triangles.append((v00, v10, v11))
            labels.append(lab)
            triangles.append((v00, v11, v01))
            labels.append(lab)
    triangles = np.array(triangles, dtype=np.int64)
    labels = np.array(labels, dtype=np.int8)

    # Undirected edge -> adjacent triangles, for interface adjacency lookup.
    edge_tris: dict[tuple[int, int], list[int]] = {}
    for t, tri in enumerate(triangles):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            edge_tris.setdefault(key, []).append(t)

    # Walk the inner-box boundary counterclockwise from its lower-left corner.
    gx0, gx1 = round((ix0 - ox0) / h), round((ix1 - ox0) / h)
    gy0, gy1 = round((iy0 - oy0) / h), round((iy1 - oy0) / h)
    path = []
    for gi in range(gx0, gx1):
        path.append((vid(gi, gy0), vid(gi + 1, gy0)))
    for gj in range(gy0, gy1):
        path.append((vid(gx1, gj), vid(gx1, gj + 1)))
    for gi in range(gx1, gx0, -1):
        path.append((vid(gi, gy1), vid(gi - 1, gy1)))
    for gj in range(gy1, gy0, -1):
        path.append((vid(gx0, gj), vid(gx0, gj - 1)))

    iface_edges = np.array(path, dtype=np.int64)
    tangents = vertices[iface_edges[:, 1]] - vertices[iface_edges[:, 0]]
    tangents /= np.linalg.norm(tangents, axis=1)[:, None]
    # CCW traversal of the inner boundary: outward normal is the tangent
    # rotated clockwise.
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]])

    iface_tris = np.empty((len(iface_edges), 2), dtype=np.int64)
    for k, (a, b) in enumerate(iface_edges):
        adj = edge_tris[(min(a, b), max(a, b))]
        if len(adj) != 2:
            raise RuntimeError(f"interface edge ({a},{b}) has {len(adj)} adjacent triangles")
        t_in = [t for t in adj if labels[t] == IN]
        t_out = [t for t in adj if labels[t] == OUT]
        if len(t_in) != 1 or len(t_out) != 1:
            raise RuntimeError(f"interface edge ({a},{b}) does not separate IN from OUT")
        iface_tris[k] = (t_in[0], t_out[0])

    on_bnd = (
        np.isclose(vertices[:, 0], ox0) | np.isclose(vertices[:, 0], ox1)
        | np.isclose(vertices[:, 1], oy0) | np.isclose(vertices[:, 1], oy1)
    )
    dirichlet = np.flatnonzero(on_bnd).astype(np.int64)

    return Mesh(
        config=cfg,
        vertices=vertices,
        triangles=triangles,
        tri_labels=labels,
        interface_edges=iface_edges,
        interface_normals=normals,
        interface_tris=iface_tris,
        dirichlet_vertices=dirichlet,
    )


def validate(mesh: Mesh) -> ValidationReport:
    """Check mesh invariants; returns a report rather than raising."""
    v: list[str] = []

    areas = mesh.signed_areas()
    bad = np.flatnonzero(areas <= 0)
    for t in bad:
        v.append(f"negative signed area: triangle {t}")

    for k, (t_in, t_out) in enumerate(mesh.interface_tris):
        if mesh.tri_labels[t_in] != IN or mesh.tri_labels[t_out] != OUT:
            v.append(f"interface edge {k} misses an IN/OUT triangle pair")

    # The directed interface edges must chain into one closed loop.
    ne = len(mesh.interface_edges)
    if ne == 0:
        v.append("interface not closed: no interface edges")
    else:
        heads = {int(a): int(b) for a, b in mesh.interface_edges}
        if len(heads) != ne:
            v.append("interface not closed: repeated edge start vertex")
        else:
            start = int(mesh.interface_edges[0, 0])
            cur, steps = start, 0
            while steps < ne and cur in heads:
                cur = heads[cur]
                steps += 1
            if not (steps == ne and cur == start):
                v.append("interface not closed: edge chain does not return to start")

    norm = np.linalg.norm(mesh.interface_normals, axis=1)
    if not np.allclose(norm, 1.0, atol=1e-12):
        v.append("interface normal not unit length")

    dir_set = set(int(x) for x in mesh.dirichlet_vertices)
    overlap = dir_set & set(int(x) for x in mesh.interface_vertex_ids())
    if overlap:
        v.append(f"interface touches Dirichlet boundary at vertices {sorted(overlap)}")

    return ValidationReport(violations=v)


def dump_text(mesh: Mesh) -> str:
    """Plain-text dump: `v x y`, `t i j k label`, `e i j nx ny` lines."""
    lines = []
    for x, y in mesh.vertices:
        lines.append(f"v {x:.17g} {y:.17g}")
    for (i, j, k), lab in zip(mesh.triangles, mesh.tri_labels):
        lines.append(f"t {i} {j} {k} {'IN' if lab == IN else 'OUT'}")
    for (i, j), (nx, ny) in zip(mesh.interface_edges, mesh.interface_normals):
        lines.append(f"e {i} {j} {nx:.17g} {ny:.17g}")
    return "\n".join(lines) + "\n"


def subdomain_areas(mesh: Mesh) -> tuple[float, float]:
    """(|IN|, |OUT|) from signed triangle areas."""
    areas = mesh.signed_areas()
    a_in = float(areas[mesh.tri_labels == IN].sum())
    a_out = float(areas[mesh.tri_labels == OUT].sum())
    return a_in, a_out
