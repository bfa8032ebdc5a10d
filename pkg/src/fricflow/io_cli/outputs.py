"""Plain-text result files: timeseries.csv, snapshot tables, mesh dump.

Floats are written with repr (shortest round-trip form), so identical runs
produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

from ..mesh import IN, dump_text
from ..timestepper import Trajectory

TIMESERIES_COLUMNS = ["t", "energy", "j", "j_eps", "max_defect", "delta", "newton_iters", "h1_norm"]


def _fmt(value) -> str:
    if isinstance(value, (int,)):
        return str(value)
    return repr(float(value))


def timeseries_text(trajectory: Trajectory) -> str:
    lines = [",".join(TIMESERIES_COLUMNS)]
    for row in trajectory.rows:
        lines.append(",".join(_fmt(row[c]) for c in TIMESERIES_COLUMNS))
    return "\n".join(lines) + "\n"


def snapshot_text(trajectory: Trajectory, index: int) -> str:
    state = trajectory.states[index]
    cfg = trajectory.cfg
    spaces = trajectory.spaces
    mesh_hash = spaces.mesh.content_hash()
    lines = [
        f"# t={_fmt(state.t)} dt={_fmt(cfg.dt)} eps={_fmt(cfg.eps)} mesh={mesh_hash}",
        f"# velocity nodes={spaces.vmap.num_nodes} pressure dofs={spaces.pmap.num_dofs}",
    ]
    coords = spaces.vmap.node_coords
    for node, (x, y) in enumerate(coords):
        lines.append(f"{_fmt(x)} {_fmt(y)} {_fmt(state.u[2 * node])} {_fmt(state.u[2 * node + 1])}")
    pmap = spaces.pmap
    verts = spaces.mesh.vertices
    for dof in range(pmap.num_dofs):
        x, y = verts[pmap.dof_vertex[dof]]
        side = "IN" if pmap.dof_side[dof] == IN else "OUT"
        lines.append(f"{_fmt(x)} {_fmt(y)} {side} {_fmt(state.p[dof])}")
    return "\n".join(lines) + "\n"


def snapshot_indices(num_states: int, stride: int) -> list[int]:
    """Every stride-th state plus always the final one."""
    idx = list(range(0, num_states, stride))
    if idx[-1] != num_states - 1:
        idx.append(num_states - 1)
    return idx


def write_outputs(trajectory: Trajectory, out_dir: str | Path) -> list[Path]:
    """Write timeseries, snapshots and the mesh dump; returns written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "timeseries.csv"
    path.write_text(timeseries_text(trajectory))
    written.append(path)

    mesh_path = out / "mesh.txt"
    mesh_path.write_text(dump_text(trajectory.spaces.mesh))
    written.append(mesh_path)

    for index in snapshot_indices(len(trajectory.states), trajectory.cfg.snapshot_stride):
        spath = out / f"snapshot_{index:06d}.txt"
        spath.write_text(snapshot_text(trajectory, index))
        written.append(spath)
    return written


def check_writable(out_dir: str | Path) -> None:
    """Fail fast before a run starts if the output directory is unusable."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
