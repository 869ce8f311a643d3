"""Plain-text artifacts: history tables, vertex fields, mesh sidecars, manifests.

All files are written with LF line endings and floats in ``%.17g`` so they
round-trip exactly through the readers below.
"""

import csv
import json
import os
from pathlib import Path

import numpy as np

from .exceptions import SolverError
from .game import summed_objective

HISTORY_HEADER = ("k", "gamma", "beta", "sum_objectives", "newton_iters", "damping", "wall_ms")


class ArtifactError(SolverError):
    """Reading or writing a run artifact failed."""


def _fmt(x):
    return "%.17g" % float(x)


def _write_text(path, lines):
    path = Path(path)
    try:
        with open(path, "w", newline="\n", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc}") from exc
    return path


def _read_rows(path):
    try:
        with open(path, newline="", encoding="ascii") as fh:
            return list(csv.reader(fh))
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from exc


def history_rows(history, real_time=False):
    """Rows of the history table; ``wall_ms`` is 0 unless ``real_time``."""
    rows = []
    for rec in history:
        rows.append((
            str(rec.k), _fmt(rec.gamma), _fmt(rec.beta), _fmt(rec.sum_objectives),
            str(rec.newton.iterations), _fmt(rec.newton.damping),
            _fmt(rec.wall_ms if real_time else 0.0),
        ))
    return rows


def write_history(history, path, real_time=False):
    """Write ``k,gamma,beta,sum_objectives,newton_iters,damping,wall_ms``.

    Wall times are machine dependent; they are written as 0 by default so
    identical runs give byte-identical files.
    """
    if len(history) == 0:
        raise ValueError("history is empty")
    lines = [",".join(HISTORY_HEADER)] + [",".join(r) for r in history_rows(history, real_time)]
    return _write_text(path, lines)


def read_history(path):
    """Parse a history file into a dict of column arrays."""
    rows = _read_rows(path)
    if not rows or tuple(rows[0]) != HISTORY_HEADER:
        raise ArtifactError(f"{path}: unexpected history header")
    body = rows[1:]
    out = {}
    for j, name in enumerate(HISTORY_HEADER):
        conv = int if name in ("k", "newton_iters") else float
        out[name] = np.array([conv(r[j]) for r in body])
    return out


def write_field(mesh, values, path, vertices=None, arclength=None):
    """Write a vertex field as ``x,y,value`` (plus ``s`` for boundary fields).

    ``vertices`` restricts the rows to a subset in the given order; the
    optional ``arclength`` column holds the boundary parameter of each row.
    """
    values = np.asarray(getattr(values, "values", values), dtype=float)
    idx = np.arange(mesh.n_vertices) if vertices is None else np.asarray(vertices)
    if values.shape != (idx.size,) and values.shape != (mesh.n_vertices,):
        raise ValueError(f"field has shape {values.shape}, mesh has {mesh.n_vertices} vertices")
    vals = values if values.shape == (idx.size,) else values[idx]
    header = "x,y,value" if arclength is None else "x,y,s,value"
    lines = [header]
    for r, v in enumerate(idx):
        x, y = mesh.vertices[v]
        cols = [_fmt(x), _fmt(y)]
        if arclength is not None:
            cols.append(_fmt(arclength[r]))
        cols.append(_fmt(vals[r]))
        lines.append(",".join(cols))
    return _write_text(path, lines)


def read_field(path):
    """Returns ``(xy, values, s)``; ``s`` is ``None`` for volume fields."""
    rows = _read_rows(path)
    if not rows or rows[0] not in (["x", "y", "value"], ["x", "y", "s", "value"]):
        raise ArtifactError(f"{path}: unexpected field header")
    data = np.array([[float(c) for c in r] for r in rows[1:]]).reshape(-1, len(rows[0]))
    s = data[:, 2] if len(rows[0]) == 4 else None
    return data[:, :2], data[:, -1], s


def write_connectivity(mesh, path):
    lines = ["v0,v1,v2"] + [",".join(str(int(v)) for v in t) for t in mesh.triangles]
    return _write_text(path, lines)


def read_connectivity(path):
    rows = _read_rows(path)
    if not rows or rows[0] != ["v0", "v1", "v2"]:
        raise ArtifactError(f"{path}: unexpected connectivity header")
    return np.array([[int(c) for c in r] for r in rows[1:]], dtype=int).reshape(-1, 3)


def boundary_arclength(mesh, vertices):
    """Counter-clockwise arc length from the origin along the unit square's boundary."""
    xy = mesh.vertices[np.asarray(vertices)]
    x, y = xy[:, 0], xy[:, 1]
    s = np.where(np.isclose(y, 0.0), x, 0.0)
    s = np.where(np.isclose(x, 1.0) & ~np.isclose(y, 0.0), 1.0 + y, s)
    s = np.where(np.isclose(y, 1.0) & ~np.isclose(x, 1.0), 3.0 - x, s)
    s = np.where(np.isclose(x, 0.0) & ~np.isclose(y, 0.0) & ~np.isclose(y, 1.0), 4.0 - y, s)
    return s


def combined_control(game, controls):
    """``sum_i 1_{carrier_i} u_i`` as a vertex field; shared vertices get the weighted mean."""
    num = np.zeros(game.mesh.n_vertices)
    den = np.zeros(game.mesh.n_vertices)
    for pl, u in zip(game.players, controls):
        num[pl.support] += pl.weights * u
        den[pl.support] += pl.weights
    out = np.zeros_like(num)
    mask = den > 0
    out[mask] = num[mask] / den[mask]
    return out, np.flatnonzero(mask)


def write_json(obj, path):
    try:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc}") from exc
    return Path(path)


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from exc


def write_run(out_dir, game, path_cfg, state, history, real_time=False):
    """Write all artifacts of one run into ``out_dir`` and return the manifest."""
    out = Path(out_dir)
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise ArtifactError(f"cannot create {out}: {exc}") from exc
    mesh = game.mesh
    write_history(history, out / "history.csv", real_time)
    write_connectivity(mesh, out / "mesh_triangles.csv")
    write_field(mesh, state.y.values, out / "state.csv")
    u, support = combined_control(game, state.controls)
    files = {"history": "history.csv", "state": "state.csv", "connectivity": "mesh_triangles.csv"}
    if game.cfg.kind == "boundary":
        order = support[np.argsort(boundary_arclength(mesh, support), kind="stable")]
        write_field(mesh, u[order], out / "control.csv", vertices=order,
                    arclength=boundary_arclength(mesh, order))
    else:
        write_field(mesh, u, out / "control.csv")
    files["control"] = "control.csv"
    for g, p in enumerate(state.adjoints):
        name = f"adjoint_{g + 1}.csv"
        write_field(mesh, p.values, out / name)
        files[f"adjoint_{g + 1}"] = name
    last = history.records[-1]
    manifest = {
        "game": game.cfg.to_dict(),
        "path": {k: getattr(path_cfg, k) for k in
                 ("gamma0", "c_path", "eps", "gamma_max", "beta_tol", "max_steps")},
        "mesh_n": mesh.n_segments,
        "mode": game.cfg.mode,
        "problem": game.cfg.kind,
        "determinism": "no random numbers are used; equal inputs give equal files"
                       + ("" if not real_time else " except wall_ms"),
        "files": files,
        "stop_reason": history.stop_reason,
        "steps": len(history),
        "final_gamma": last.gamma,
        "final_beta": last.beta,
        "sum_objectives": summed_objective(game, state.controls, state.y),
        "max_violation": last.max_violation,
    }
    write_json(manifest, out / "manifest.json")
    return manifest


def read_run(run_dir):
    """Manifest and history of a run directory."""
    run = Path(run_dir)
    manifest = read_json(run / "manifest.json")
    history = read_history(run / manifest["files"]["history"])
    return manifest, history
