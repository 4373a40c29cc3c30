"""Field reconstruction from potentials, cross-formulation comparison, export."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .formulations import AssembledSystem
from .grid import Grid
from .operators import OperatorSet

COMPONENTS = ("Ex", "Ey", "Ez", "Bx", "By", "Bz")
CSV_COLUMNS = ["cell", "x", "y", "z"] + [f"{c}_{p}" for c in COMPONENTS for p in ("re", "im")]


@dataclass(frozen=True, eq=False)
class FieldSolution:
    grid: Grid
    e: np.ndarray  # edge voltages (V)
    b: np.ndarray  # facet fluxes (Wb)
    E: np.ndarray  # (n_cells, 3) cell-centred field intensity (V/m)
    B: np.ndarray  # (n_cells, 3) cell-centred flux density (T)
    omega: float | None = None
    time: float | None = None


def _cell_average(grid: Grid, kind: str) -> sp.csr_matrix:
    """Rows: 3*n_cells (component-major); averages the parallel edges (4) or faces (2)."""
    n = grid.shape
    ci, cj, ck = grid.entity_lattice("cell", 0)
    cells = np.arange(grid.n_cells)
    rows, cols, vals = [], [], []
    for axis in range(3):
        others = [ax for ax in range(3) if ax != axis]
        if kind == "edge":
            shifts = [(s1, s2) for s1 in (0, 1) for s2 in (0, 1)]
            measure = grid.edge_lengths
        else:
            shifts = [(0,), (1,)]
            measure = grid.face_areas
        for shift in shifts:
            ijk = [ci.copy(), cj.copy(), ck.copy()]
            if kind == "edge":
                ijk[others[0]] += shift[0]
                ijk[others[1]] += shift[1]
            else:
                ijk[axis] += shift[0]
            idx = grid.index(kind, axis, *ijk)
            rows.append(axis * grid.n_cells + cells)
            cols.append(idx)
            vals.append(1.0 / (len(shifts) * measure[idx]))
    del n
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(3 * grid.n_cells, grid.n_edges if kind == "edge" else grid.n_faces),
    )


def fields_from_potentials(ops: OperatorSet, a: np.ndarray, phi: np.ndarray, omega: float | None = None, da_dt: np.ndarray | None = None, time: float | None = None) -> FieldSolution:
    """e = -d a/dt - G phi, b = C a; d/dt is j omega in frequency domain."""
    grid = ops.grid
    a = np.asarray(a)
    phi = np.asarray(phi)
    if a.shape != (grid.n_edges,) or phi.shape != (grid.n_nodes,):
        raise ValueError("potential vectors do not match the grid")
    if da_dt is None:
        if omega is None:
            raise ValueError("need omega or da_dt")
        da_dt = 1j * omega * a
    e = -np.asarray(da_dt) - ops.G @ phi
    b = ops.C @ a
    E = (_cell_average(grid, "edge") @ e).reshape(3, -1).T
    B = (_cell_average(grid, "face") @ b).reshape(3, -1).T
    return FieldSolution(grid, e, b, E, B, omega, time)


def reconstruct_fields(system: AssembledSystem, x: np.ndarray, ops: OperatorSet) -> FieldSolution:
    """Fields of a reduced frequency-domain solution (psi systems handled)."""
    if system.omega is None:
        raise ValueError("time-domain systems: use fields_from_potentials with da_dt")
    a, phi = system.potentials(x)
    return fields_from_potentials(ops, a, phi, system.omega)


# --------------------------------------------------------------------------- comparison


@dataclass(frozen=True)
class DifferenceStats:
    quantity: str
    part: str
    max_rel: float
    mean_rel: float
    argmax_cell: int
    location: tuple[float, float, float]


@dataclass(frozen=True)
class ComparisonReport:
    normalization: dict
    stats: tuple[DifferenceStats, ...]

    def get(self, quantity: str, part: str) -> DifferenceStats:
        for s in self.stats:
            if s.quantity == quantity and s.part == part:
                return s
        raise KeyError((quantity, part))

    def max_rel(self, quantity: str) -> float:
        return max(s.max_rel for s in self.stats if s.quantity == quantity)

    def rows(self) -> list[dict]:
        return [
            {"quantity": s.quantity, "part": s.part, "max_rel": s.max_rel, "mean_rel": s.mean_rel,
             "argmax_cell": s.argmax_cell, "x": s.location[0], "y": s.location[1], "z": s.location[2]}
            for s in self.stats
        ]


def compare_fields(candidate: FieldSolution, reference: FieldSolution) -> ComparisonReport:
    """Cell-wise differences normalized by the reference field's global maximum magnitude.

    Parts: ``real``, ``imag`` and ``complex`` (magnitude of the complex difference).
    """
    g1, g2 = candidate.grid, reference.grid
    if g1 is not g2 and (g1.shape != g2.shape or not all(np.array_equal(u, v) for u, v in zip((g1.hx, g1.hy, g1.hz), (g2.hx, g2.hy, g2.hz)))):
        raise ValueError("field solutions live on different grids")
    centers = g2.cell_centers()
    stats = []
    norms = {}
    for q in ("E", "B"):
        c, r = getattr(candidate, q), getattr(reference, q)
        scale = float(np.max(np.linalg.norm(np.abs(r), axis=1))) if r.size else 0.0
        norms[q] = scale
        for part, fn in (("real", np.real), ("imag", np.imag), ("complex", lambda z: z)):
            d = np.linalg.norm(np.abs(fn(c) - fn(r)), axis=1)
            rel = d / scale if scale > 0 else d
            k = int(np.argmax(rel))
            stats.append(DifferenceStats(q, part, float(rel[k]), float(rel.mean()), k, tuple(centers[k])))
    return ComparisonReport(norms, tuple(stats))


# --------------------------------------------------------------------------- export


def _cell_rows(fields: FieldSolution):
    centers = fields.grid.cell_centers()
    cols = []
    for q in ("E", "B"):
        v = getattr(fields, q)
        for ax in range(3):
            cols += [v[:, ax].real, v[:, ax].imag]
    return centers, np.column_stack(cols)


def export_fields(fields: FieldSolution, path, fmt: str | None = None) -> Path:
    """Write cell-centred E/B as legacy ASCII VTK or CSV (format from suffix if not given)."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix == ".csv" else "vtk-structured-ascii")
    if fmt == "csv":
        _write_csv(fields, path)
    elif fmt in ("vtk", "vtk-structured-ascii"):
        _write_vtk(fields, path)
    else:
        raise ValueError(f"unknown field format {fmt!r}")
    return path


def _write_csv(fields: FieldSolution, path: Path) -> None:
    centers, data = _cell_rows(fields)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for i in range(centers.shape[0]):
            w.writerow([i] + [repr(float(v)) for v in centers[i]] + [repr(float(v)) for v in data[i]])


def read_fields_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(centers, E, B)`` from a CSV written by :func:`export_fields`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header in {path}")
        rows = [[float(v) for v in row[1:]] for row in reader]
    arr = np.array(rows, dtype=float).reshape(-1, len(CSV_COLUMNS) - 1)
    centers = arr[:, :3]
    comp = arr[:, 3::2] + 1j * arr[:, 4::2]
    return centers, comp[:, :3], comp[:, 3:]


def _fmt(v) -> str:
    return repr(float(v))


def _write_vtk(fields: FieldSolution, path: Path) -> None:
    grid = fields.grid
    nx, ny, nz = grid.shape
    lines = ["# vtk DataFile Version 3.0", "emqs cell fields", "ASCII"]
    if grid.is_uniform():
        lines += [
            "DATASET STRUCTURED_POINTS",
            f"DIMENSIONS {nx + 1} {ny + 1} {nz + 1}",
            "ORIGIN " + " ".join(_fmt(o) for o in grid.spec.origin),
            "SPACING " + " ".join(_fmt(h[0]) for h in (grid.hx, grid.hy, grid.hz)),
        ]
    else:
        lines += ["DATASET RECTILINEAR_GRID", f"DIMENSIONS {nx + 1} {ny + 1} {nz + 1}"]
        for name, xs in zip("XYZ", grid.node_coords_1d):
            lines.append(f"{name}_COORDINATES {xs.size} double")
            lines.append(" ".join(_fmt(v) for v in xs))
    lines.append(f"CELL_DATA {grid.n_cells}")
    for q in ("E", "B"):
        v = getattr(fields, q)
        for part, fn in (("real", np.real), ("imag", np.imag)):
            lines.append(f"VECTORS {q}_{part} double")
            lines += [" ".join(_fmt(c) for c in row) for row in fn(v)]
    path.write_text("\n".join(lines) + "\n")
