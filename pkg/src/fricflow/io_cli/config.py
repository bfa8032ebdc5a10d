"""Line-numbered INI-style config parsing.

Sections: [mesh], [physics], [friction], [force], [initial], [solver],
[output], [verify]. Every key has a documented default; constraint checks
report all violations at once, each with section, key and line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..fields import ForceSpec, FrictionSpec, InitialFieldSpec
from ..mesh import MeshConfig
from ..solver import NewtonSettings
from ..timestepper import (
    FULLY_IMPLICIT,
    NAVIER_STOKES,
    SEMI_IMPLICIT,
    STOKES,
    RunConfig,
)


@dataclass
class ConfigIssue:
    section: str
    key: str
    line: int | None
    message: str

    def __str__(self) -> str:
        where = f"line {self.line}" if self.line is not None else "missing"
        return f"[{self.section}].{self.key} ({where}): {self.message}"


class ConfigError(ValueError):
    def __init__(self, issues: list[ConfigIssue]):
        self.issues = issues
        super().__init__("\n".join(str(i) for i in issues))


@dataclass
class VerifyThresholds:
    """PASS/FAIL thresholds for the verification suite ([verify] section)."""

    energy_identity_tol: float = 1e-10
    eps_values: tuple = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
    eps_ref: float = 1e-5
    eps_slope_min: float = 0.45
    dirichlet_factor: float = 1e4
    dirichlet_trace_ratio: float = 1e-3
    dirichlet_distance_rel: float = 1e-2
    neumann_match_rel: float = 1e-8
    defect_margin: float = 1e-12
    delta_margin: float = 1e-8
    mesh_levels: tuple = (4, 8, 16)
    l2_rate_min: float = 2.7
    h1_rate_min: float = 1.8
    dt_values: tuple = (4e-2, 2e-2, 1e-2)
    dt_ref: float = 2.5e-3
    dt_order_min: float = 0.9


@dataclass
class LoadedConfig:
    run: RunConfig
    verify: VerifyThresholds
    path: str


def _parse_lines(text: str) -> tuple[dict, list[ConfigIssue]]:
    """Raw INI scan: {(section, key): (value, line)} plus syntax issues."""
    table: dict[tuple[str, str], tuple[str, int]] = {}
    issues: list[ConfigIssue] = []
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            continue
        if "=" not in line:
            issues.append(ConfigIssue(section or "?", line, lineno, "expected key = value"))
            continue
        key, value = line.split("=", 1)
        table[(section, key.strip().lower())] = (value.strip(), lineno)
    return table, issues


_KNOWN_SECTIONS = {"mesh", "physics", "friction", "force", "initial", "solver", "output", "verify"}


class _Reader:
    def __init__(self, table: dict, issues: list[ConfigIssue]):
        self.table = table
        self.issues = issues
        self.used: set = set()

    def error(self, section, key, message):
        entry = self.table.get((section, key))
        line = entry[1] if entry else None
        self.issues.append(ConfigIssue(section, key, line, message))

    def raw(self, section, key):
        self.used.add((section, key))
        return self.table.get((section, key))

    def get_float(self, section, key, default, check=None, describe=""):
        entry = self.raw(section, key)
        if entry is None:
            return default
        try:
            val = float(entry[0])
        except ValueError:
            self.error(section, key, f"expected a number, got {entry[0]!r}")
            return default
        if check is not None and not check(val):
            self.error(section, key, f"constraint violated: {describe} (got {val})")
            return default
        return val

    def get_int(self, section, key, default, check=None, describe=""):
        entry = self.raw(section, key)
        if entry is None:
            return default
        try:
            val = int(entry[0])
        except ValueError:
            self.error(section, key, f"expected an integer, got {entry[0]!r}")
            return default
        if check is not None and not check(val):
            self.error(section, key, f"constraint violated: {describe} (got {val})")
            return default
        return val

    def get_bool(self, section, key, default):
        entry = self.raw(section, key)
        if entry is None:
            return default
        low = entry[0].lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        self.error(section, key, f"expected a boolean, got {entry[0]!r}")
        return default

    def get_choice(self, section, key, default, choices):
        entry = self.raw(section, key)
        if entry is None:
            return default
        val = entry[0]
        if val not in choices:
            self.error(section, key, f"must be one of {', '.join(choices)}; got {val!r}")
            return default
        return val

    def get_str(self, section, key, default):
        entry = self.raw(section, key)
        return default if entry is None else entry[0]

    def get_floats(self, section, key, default, count=None):
        entry = self.raw(section, key)
        if entry is None:
            return default
        parts = entry[0].replace(",", " ").split()
        try:
            vals = tuple(float(p) for p in parts)
        except ValueError:
            self.error(section, key, f"expected numbers, got {entry[0]!r}")
            return default
        if count is not None and len(vals) != count:
            self.error(section, key, f"expected {count} numbers, got {len(vals)}")
            return default
        return vals

    def get_params(self, section, key):
        """'a=1 b=2.5' style parameter lists."""
        entry = self.raw(section, key)
        if entry is None:
            return {}
        out = {}
        for item in entry[0].split():
            if "=" not in item:
                self.error(section, key, f"expected name=value items, got {item!r}")
                continue
            name, val = item.split("=", 1)
            try:
                out[name] = float(val)
            except ValueError:
                self.error(section, key, f"parameter {name} is not a number: {val!r}")
        return out


def _friction_from(reader: _Reader, base_dir: Path) -> FrictionSpec:
    sec = "friction"
    kind = reader.get_choice(sec, "kind", "constant", ("constant", "expr", "table"))
    spec = FrictionSpec(
        kind=kind,
        value=reader.get_float(sec, "g", 1.0, check=lambda v: v >= 0, describe="g must be >= 0"),
        expr=reader.get_str(sec, "expr", "const"),
        params=reader.get_params(sec, "params"),
    )
    if kind == "table":
        path = reader.get_str(sec, "table", None)
        if path is None:
            reader.error(sec, "table", "kind = table requires a table file path")
        else:
            full = base_dir / path
            try:
                spec.table = np.loadtxt(full, dtype=float).ravel()
            except OSError:
                reader.error(sec, "table", f"cannot read table file {full}")
            except ValueError:
                reader.error(sec, "table", f"table file {full} is not numeric")
    return spec


def _force_from(reader: _Reader, section: str, nu: float, prefix: str = "") -> ForceSpec:
    kind = reader.get_choice(
        section, prefix + "kind", "zero", ("zero", "constant", "expr", "manufactured")
    )
    return ForceSpec(
        kind=kind,
        value=reader.get_floats(section, prefix + "value", (0.0, 0.0), count=2),
        expr=reader.get_str(section, prefix + "expr", "vortex"),
        params=reader.get_params(section, prefix + "params"),
        modulation=reader.get_choice(
            section, prefix + "modulation", "const", ("const", "decay", "osc")
        ),
        nu=nu,
    )


def load_config(path: str | Path) -> LoadedConfig:
    """Parse and validate a config file; raises ConfigError listing every issue."""
    path = Path(path)
    text = path.read_text()
    table, issues = _parse_lines(text)
    reader = _Reader(table, issues)

    for section, _ in table:
        if section not in _KNOWN_SECTIONS:
            key = next(k for s, k in table if s == section)
            if not any(i.section == section for i in issues):
                reader.error(section, key, f"unknown section [{section}]")

    mesh = MeshConfig(
        outer_box=reader.get_floats("mesh", "outer_box", (0.0, 0.0, 1.0, 1.0), count=4),
        inner_box=reader.get_floats("mesh", "inner_box", (0.25, 0.25, 0.75, 0.75), count=4),
        n=reader.get_int("mesh", "n", 8, check=lambda v: v >= 1, describe="n must be >= 1"),
    )
    try:
        mesh.validate()
    except ValueError as exc:
        reader.error("mesh", "inner_box", str(exc))

    nu = reader.get_float("physics", "nu", 0.1, check=lambda v: v > 0, describe="nu must be > 0")
    run = RunConfig(
        mesh=mesh,
        nu=nu,
        t_final=reader.get_float("physics", "t", 1.0, check=lambda v: v > 0, describe="T must be > 0"),
        dt=reader.get_float("physics", "dt", 1e-2, check=lambda v: v > 0, describe="dt must be > 0"),
        eps=reader.get_float("physics", "eps", 1e-3, check=lambda v: v > 0, describe="eps must be > 0"),
        friction=_friction_from(reader, path.parent),
        force=_force_from(reader, "force", nu),
        problem=reader.get_choice("physics", "problem", STOKES, (STOKES, NAVIER_STOKES)),
        convection=reader.get_choice(
            "physics", "convection", SEMI_IMPLICIT, (SEMI_IMPLICIT, FULLY_IMPLICIT)
        ),
        initial_mode=reader.get_choice("initial", "mode", "project", ("project", "stationary")),
        initial_field=InitialFieldSpec(
            kind=reader.get_choice(
                "initial", "field", "zero", ("zero", "expr", "manufactured")
            ),
            expr=reader.get_str("initial", "field_expr", "taylor_green"),
            params=reader.get_params("initial", "field_params"),
        ),
        initial_load=_force_from(reader, "initial", nu, prefix="load_"),
        newton=NewtonSettings(
            tol_abs=reader.get_float(
                "solver", "newton_tol_abs", 1e-14, check=lambda v: v > 0, describe="must be > 0"
            ),
            tol_rel=reader.get_float(
                "solver", "newton_tol_rel", 1e-12, check=lambda v: v > 0, describe="must be > 0"
            ),
            max_iter=reader.get_int(
                "solver", "newton_max_iter", 30, check=lambda v: v >= 1, describe="must be >= 1"
            ),
            line_search=reader.get_bool("solver", "line_search", True),
        ),
        quad_order=reader.get_int(
            "solver", "quad_order", 3, check=lambda v: v >= 1, describe="must be >= 1"
        ),
        output_dir=reader.get_str("output", "directory", None),
        snapshot_stride=reader.get_int(
            "output", "stride", 10, check=lambda v: v >= 1, describe="must be >= 1"
        ),
    )
    if run.t_final < run.dt and not any(i.section == "physics" for i in issues):
        reader.error("physics", "t", f"T={run.t_final} must be at least dt={run.dt}")

    defaults = VerifyThresholds()
    verify = VerifyThresholds(
        energy_identity_tol=reader.get_float("verify", "energy_identity_tol", defaults.energy_identity_tol),
        eps_values=reader.get_floats("verify", "eps_values", defaults.eps_values),
        eps_ref=reader.get_float("verify", "eps_ref", defaults.eps_ref),
        eps_slope_min=reader.get_float("verify", "eps_slope_min", defaults.eps_slope_min),
        dirichlet_factor=reader.get_float("verify", "dirichlet_factor", defaults.dirichlet_factor),
        dirichlet_trace_ratio=reader.get_float("verify", "dirichlet_trace_ratio", defaults.dirichlet_trace_ratio),
        dirichlet_distance_rel=reader.get_float("verify", "dirichlet_distance_rel", defaults.dirichlet_distance_rel),
        neumann_match_rel=reader.get_float("verify", "neumann_match_rel", defaults.neumann_match_rel),
        defect_margin=reader.get_float("verify", "defect_margin", defaults.defect_margin),
        delta_margin=reader.get_float("verify", "delta_margin", defaults.delta_margin),
        mesh_levels=tuple(
            int(v) for v in reader.get_floats("verify", "mesh_levels", defaults.mesh_levels)
        ),
        l2_rate_min=reader.get_float("verify", "l2_rate_min", defaults.l2_rate_min),
        h1_rate_min=reader.get_float("verify", "h1_rate_min", defaults.h1_rate_min),
        dt_values=reader.get_floats("verify", "dt_values", defaults.dt_values),
        dt_ref=reader.get_float("verify", "dt_ref", defaults.dt_ref),
        dt_order_min=reader.get_float("verify", "dt_order_min", defaults.dt_order_min),
    )

    if issues:
        raise ConfigError(issues)
    try:
        run.validate()
    except ValueError as exc:
        raise ConfigError([ConfigIssue("?", "?", None, str(exc))]) from exc
    return LoadedConfig(run=run, verify=verify, path=str(path))


def parse_config(path: str | Path) -> RunConfig:
    return load_config(path).run
