"""Problem data: friction threshold, body force, and initial-field specs.

Each spec is a small tagged container with a vectorised ``sample`` method so
assembly can evaluate it at quadrature points. Closed-form fields live in
registries keyed by tag; the manufactured Stokes solution used by the
convergence study is defined at the bottom.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# ---------------------------------------------------------------------------
# Friction threshold g(t, x) on the interface.


def _g_const(t, x, y, s, p):
    return np.full_like(np.asarray(x, dtype=float), p.get("value", 1.0))


def _g_sine_arc(t, x, y, s, p):
    value = p.get("value", 1.0)
    amp = p.get("amp", 0.5)
    period = p.get("period", 2.0)
    return value * (1.0 + amp * np.sin(2.0 * np.pi * np.asarray(s) / period))


def _g_time_ramp(t, x, y, s, p):
    value = p.get("value", 1.0)
    rate = p.get("rate", 1.0)
    return np.full_like(np.asarray(x, dtype=float), value * (1.0 + rate * t))


G_EXPRESSIONS = {
    "const": _g_const,
    "sine_arc": _g_sine_arc,
    "time_ramp": _g_time_ramp,
}


@dataclass
class FrictionSpec:
    """Interface slip threshold; kind is 'constant', 'expr' or 'table'.

    The threshold must be nonnegative wherever sampled; g identically zero is
    the documented Neumann-limit experiment.
    """

    kind: str = "constant"
    value: float = 1.0
    expr: str = "const"
    params: dict = field(default_factory=dict)
    table: np.ndarray | None = None

    def sample(self, t: float, points: np.ndarray, arclength: np.ndarray) -> np.ndarray:
        x, y = points[..., 0], points[..., 1]
        if self.kind == "constant":
            out = np.full(x.shape, float(self.value))
        elif self.kind == "expr":
            if self.expr not in G_EXPRESSIONS:
                raise ValueError(
                    f"unknown friction expression {self.expr!r}; "
                    f"known: {sorted(G_EXPRESSIONS)}"
                )
            out = np.asarray(G_EXPRESSIONS[self.expr](t, x, y, arclength, self.params), dtype=float)
        elif self.kind == "table":
            if self.table is None:
                raise ValueError("table friction spec without table data")
            tab = np.asarray(self.table, dtype=float)
            if tab.size != x.size:
                raise ValueError(
                    f"friction table has {tab.size} samples, quadrature needs {x.size}"
                )
            out = tab.reshape(x.shape)
        else:
            raise ValueError(f"unknown friction kind {self.kind!r}")
        return out

    def scaled(self, factor: float) -> "FrictionSpec":
        out = FrictionSpec(kind=self.kind, value=self.value * factor, expr=self.expr,
                           params=dict(self.params), table=None)
        if self.table is not None:
            out.table = np.asarray(self.table) * factor
        if self.kind == "expr":
            out.params["value"] = self.params.get("value", 1.0) * factor
        return out


# ---------------------------------------------------------------------------
# Body force f(t, x).


def _mod_factor(tag: str, t: float) -> float:
    if tag == "const":
        return 1.0
    if tag == "decay":
        return float(np.exp(-t))
    if tag == "osc":
        return float(np.sin(2.0 * np.pi * t))
    raise ValueError(f"unknown time modulation {tag!r}; known: const, decay, osc")


def _f_vortex(x, y, p):
    amp = p.get("amp", 1.0)
    cx, cy = p.get("cx", 0.5), p.get("cy", 0.5)
    return np.stack([-amp * (y - cy), amp * (x - cx)], axis=-1)


def _f_shear(x, y, p):
    amp = p.get("amp", 1.0)
    out = np.zeros(np.broadcast_shapes(x.shape, y.shape) + (2,))
    out[..., 0] = amp * np.sin(np.pi * y)
    return out


F_EXPRESSIONS = {
    "vortex": _f_vortex,
    "shear": _f_shear,
}


@dataclass
class ForceSpec:
    """Body force; kind is 'zero', 'constant', 'expr' or 'manufactured'."""

    kind: str = "zero"
    value: tuple[float, float] = (0.0, 0.0)
    expr: str = "vortex"
    params: dict = field(default_factory=dict)
    modulation: str = "const"
    nu: float = 1.0  # used by the manufactured load

    def sample(self, t: float, points: np.ndarray) -> np.ndarray:
        x, y = points[..., 0], points[..., 1]
        if self.kind == "zero":
            return np.zeros(points.shape)
        if self.kind == "constant":
            out = np.empty(points.shape)
            out[..., 0], out[..., 1] = self.value
            return out
        if self.kind == "manufactured":
            return MANUFACTURED.body_force(x, y, self.nu)
        if self.kind == "expr":
            if self.expr not in F_EXPRESSIONS:
                raise ValueError(
                    f"unknown force expression {self.expr!r}; known: {sorted(F_EXPRESSIONS)}"
                )
            base = F_EXPRESSIONS[self.expr](np.asarray(x, dtype=float), np.asarray(y, dtype=float), self.params)
            return base * _mod_factor(self.modulation, t)
        raise ValueError(f"unknown force kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Initial velocity fields (interpolated then projected).


def _u_taylor_green(x, y, p):
    amp = p.get("amp", 1.0)
    return np.stack([
        amp * np.sin(np.pi * x) * np.cos(np.pi * y),
        -amp * np.cos(np.pi * x) * np.sin(np.pi * y),
    ], axis=-1)


def _u_vortex(x, y, p):
    return _f_vortex(x, y, p)


U_EXPRESSIONS = {
    "taylor_green": _u_taylor_green,
    "vortex": _u_vortex,
}


@dataclass
class InitialFieldSpec:
    kind: str = "zero"
    expr: str = "taylor_green"
    params: dict = field(default_factory=dict)

    def __call__(self, x: float, y: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "zero":
            return np.zeros(np.broadcast_shapes(x.shape, y.shape) + (2,))
        if self.kind == "manufactured":
            return MANUFACTURED.velocity(x, y)
        if self.kind == "expr":
            if self.expr not in U_EXPRESSIONS:
                raise ValueError(
                    f"unknown initial-field expression {self.expr!r}; "
                    f"known: {sorted(U_EXPRESSIONS)}"
                )
            return U_EXPRESSIONS[self.expr](x, y, self.params)
        raise ValueError(f"unknown initial-field kind {self.kind!r}")


# ---------------------------------------------------------------------------
# Manufactured Stokes solution on the default geometry: the velocity is the
# curl of S * (q(x) q(y))^2 with q(x) = x(1-x)(x-1/4)(x-3/4), so it vanishes
# (with its tangential derivatives) on the outer boundary and on the default
# interface lines x, y in {1/4, 3/4}; the pressure is smooth, single-valued
# and has zero mean on the unit square.


def _q(x):
    a = x * (1.0 - x)
    return a * (3.0 / 16.0 - a)


def _q1(x):
    a = x * (1.0 - x)
    da = 1.0 - 2.0 * x
    return da * (3.0 / 16.0 - 2.0 * a)


def _q2(x):
    a = x * (1.0 - x)
    da = 1.0 - 2.0 * x
    return -2.0 * (3.0 / 16.0 - 2.0 * a) - 2.0 * da * da


def _q3(x):
    return 12.0 * (1.0 - 2.0 * x)


def _Q(x):
    return _q(x) ** 2


def _Q1(x):
    return 2.0 * _q(x) * _q1(x)


def _Q2(x):
    return 2.0 * (_q1(x) ** 2 + _q(x) * _q2(x))


def _Q3(x):
    return 2.0 * (3.0 * _q1(x) * _q2(x) + _q(x) * _q3(x))


class ManufacturedStokes:
    """Closed-form (velocity, pressure, body force) for the mesh study.

    Defined on the square [0, L]^2 with the interface at L*(1/4, 3/4); the
    stream function is S * (q(x/L) q(y/L))^2, so the velocity vanishes with
    its tangential derivatives on the outer boundary and the interface.
    """

    scale = 8.0e6

    def __init__(self, domain: float = 1.0):
        self.domain = float(domain)

    def velocity(self, x, y):
        s, L = self.scale, self.domain
        x, y = np.asarray(x) / L, np.asarray(y) / L
        return np.stack([
            s / L * _Q(x) * _Q1(y),
            -s / L * _Q1(x) * _Q(y),
        ], axis=-1)

    def velocity_grad(self, x, y):
        """out[..., i, j] = d u_i / d x_j."""
        s, L = self.scale, self.domain
        x, y = np.asarray(x) / L, np.asarray(y) / L
        g = np.empty(np.broadcast_shapes(np.shape(x), np.shape(y)) + (2, 2))
        g[..., 0, 0] = s / L**2 * _Q1(x) * _Q1(y)
        g[..., 0, 1] = s / L**2 * _Q(x) * _Q2(y)
        g[..., 1, 0] = -s / L**2 * _Q2(x) * _Q(y)
        g[..., 1, 1] = -s / L**2 * _Q1(x) * _Q1(y)
        return g

    def pressure(self, x, y):
        L = self.domain
        return np.sin(2.0 * np.pi * np.asarray(x) / L) * np.cos(np.pi * np.asarray(y) / L)

    def pressure_grad(self, x, y):
        L = self.domain
        x, y = np.asarray(x) / L, np.asarray(y) / L
        return np.stack([
            2.0 * np.pi / L * np.cos(2.0 * np.pi * x) * np.cos(np.pi * y),
            -np.pi / L * np.sin(2.0 * np.pi * x) * np.sin(np.pi * y),
        ], axis=-1)

    def laplacian_velocity(self, x, y):
        s, L = self.scale, self.domain
        x, y = np.asarray(x) / L, np.asarray(y) / L
        return np.stack([
            s / L**3 * (_Q2(x) * _Q1(y) + _Q(x) * _Q3(y)),
            -s / L**3 * (_Q3(x) * _Q(y) + _Q1(x) * _Q2(y)),
        ], axis=-1)

    def body_force(self, x, y, nu):
        """f = -nu * Laplacian(u) + grad(p) for the divergence-free velocity."""
        return -nu * self.laplacian_velocity(x, y) + self.pressure_grad(x, y)

    def mesh_config(self, n: int):
        from .mesh import MeshConfig

        L = self.domain
        return MeshConfig(
            outer_box=(0.0, 0.0, L, L),
            inner_box=(0.25 * L, 0.25 * L, 0.75 * L, 0.75 * L),
            n=n,
        )


MANUFACTURED = ManufacturedStokes(domain=4.0)
