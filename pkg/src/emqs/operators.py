"""Topological incidence matrices and diagonal material (Hodge) matrices."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .grid import Grid
from .materials import MaterialField


def _ddx(n: int) -> sp.csr_matrix:
    """n x (n+1) forward difference with entries -1, +1."""
    return sp.diags([-np.ones(n, dtype=np.int64), np.ones(n, dtype=np.int64)], [0, 1], shape=(n, n + 1), format="csr")


def _eye(n: int) -> sp.csr_matrix:
    return sp.identity(n, dtype=np.int64, format="csr")


def _kron3(a, b, c) -> sp.csr_matrix:
    # c acts on the fastest (i) index
    return sp.kron(a, sp.kron(b, c, format="csr"), format="csr")


def build_incidence(grid: Grid) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    """Gradient G (edges x nodes), curl C (faces x edges), divergence D (cells x faces)."""
    nx, ny, nz = grid.shape
    dx, dy, dz = _ddx(nx), _ddx(ny), _ddx(nz)
    I = _eye

    G = sp.vstack(
        [
            _kron3(I(nz + 1), I(ny + 1), dx),
            _kron3(I(nz + 1), dy, I(nx + 1)),
            _kron3(dz, I(ny + 1), I(nx + 1)),
        ],
        format="csr",
    )

    # derivative of the a-directed edge block along b, landing on faces normal to the third axis
    dy_z = _kron3(I(nz), dy, I(nx + 1))
    dz_y = _kron3(dz, I(ny), I(nx + 1))
    dz_x = _kron3(dz, I(ny + 1), I(nx))
    dx_z = _kron3(I(nz), I(ny + 1), dx)
    dx_y = _kron3(I(nz + 1), I(ny), dx)
    dy_x = _kron3(I(nz + 1), dy, I(nx))
    C = sp.bmat(
        [
            [None, -dz_y, dy_z],
            [dz_x, None, -dx_z],
            [-dy_x, dx_y, None],
        ],
        format="csr",
        dtype=np.int64,
    )

    D = sp.hstack(
        [
            _kron3(I(nz), I(ny), dx),
            _kron3(I(nz), dy, I(nx)),
            _kron3(dz, I(ny), I(nx)),
        ],
        format="csr",
    )
    return G.astype(np.int64), C, D.astype(np.int64)


def edge_cell_weights(grid: Grid) -> sp.csr_matrix:
    """Portion of each edge's dual face lying inside each adjacent cell (m^2).

    Row sums equal the dual face areas.
    """
    n = grid.shape
    h = (grid.hx, grid.hy, grid.hz)
    rows, cols, vals = [], [], []
    offsets = grid.axis_offsets("edge")
    for axis in range(3):
        ijk = grid.entity_lattice("edge", axis)
        b, c = (ax for ax in range(3) if ax != axis)
        flat = offsets[axis] + np.arange(ijk[0].size)
        for sb in (-1, 0):
            for sc in (-1, 0):
                cell = list(ijk)
                cell[b] = ijk[b] + sb
                cell[c] = ijk[c] + sc
                ok = (cell[b] >= 0) & (cell[b] < n[b]) & (cell[c] >= 0) & (cell[c] < n[c])
                cidx = np.ravel_multi_index(tuple(x[ok] for x in cell), n, order="F")
                rows.append(flat[ok])
                cols.append(cidx)
                vals.append(0.25 * h[b][cell[b][ok]] * h[c][cell[c][ok]])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_edges, grid.n_cells),
    )


def face_cell_weights(grid: Grid) -> sp.csr_matrix:
    """Portion of each face's dual edge lying inside each adjacent cell (m).

    Row sums equal the dual edge lengths.
    """
    n = grid.shape
    h = (grid.hx, grid.hy, grid.hz)
    rows, cols, vals = [], [], []
    offsets = grid.axis_offsets("face")
    for axis in range(3):
        ijk = grid.entity_lattice("face", axis)
        flat = offsets[axis] + np.arange(ijk[0].size)
        for s in (-1, 0):
            cell = list(ijk)
            cell[axis] = ijk[axis] + s
            ok = (cell[axis] >= 0) & (cell[axis] < n[axis])
            cidx = np.ravel_multi_index(tuple(x[ok] for x in cell), n, order="F")
            rows.append(flat[ok])
            cols.append(cidx)
            vals.append(0.5 * h[axis][cell[axis][ok]])
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_faces, grid.n_cells),
    )


@dataclass(frozen=True, eq=False)
class OperatorSet:
    grid: Grid
    G: sp.csr_matrix
    C: sp.csr_matrix
    D: sp.csr_matrix
    edge_weights: sp.csr_matrix
    face_weights: sp.csr_matrix
    M_nu: np.ndarray
    M_kappa: np.ndarray
    M_eps: np.ndarray
    M_kappa_hat: np.ndarray
    M_kappa_eqs: np.ndarray
    """Edge Hodge of kappa in conductors plus kappa_hat in non-conductive cells."""

    def edge_hodge(self, cell_values: np.ndarray) -> np.ndarray:
        """Parallel (dual-face-area weighted) edge Hodge of a per-cell parameter."""
        return (self.edge_weights @ np.asarray(cell_values, float)) / self.grid.edge_lengths

    def face_hodge(self, cell_values: np.ndarray) -> np.ndarray:
        """Series (dual-edge-length weighted) face Hodge of a per-cell reluctivity."""
        return (self.face_weights @ np.asarray(cell_values, float)) / self.grid.face_areas

    def curlcurl(self) -> sp.csr_matrix:
        return (self.C.T @ sp.diags(self.M_nu) @ self.C).tocsr()


def build_hodges(grid: Grid, mat: MaterialField, edge_weights=None, face_weights=None):
    """Return ``(M_nu, M_kappa, M_eps, M_kappa_hat)`` as 1-D diagonals."""
    if mat.n_cells != grid.n_cells:
        raise ValueError(f"material field has {mat.n_cells} cells, grid has {grid.n_cells}")
    W_e = edge_cell_weights(grid) if edge_weights is None else edge_weights
    W_f = face_cell_weights(grid) if face_weights is None else face_weights
    L = grid.edge_lengths
    eps = mat.eps if mat.eps_hodge is None else mat.eps_hodge
    M_nu = (W_f @ mat.nu) / grid.face_areas
    M_kappa = (W_e @ mat.kappa) / L
    M_eps = (W_e @ eps) / L
    M_kappa_hat = (W_e @ mat.kappa_hat_cells()) / L
    return M_nu, M_kappa, M_eps, M_kappa_hat


def build_operators(grid: Grid, mat: MaterialField) -> OperatorSet:
    G, C, D = build_incidence(grid)
    W_e, W_f = edge_cell_weights(grid), face_cell_weights(grid)
    M_nu, M_kappa, M_eps, M_kappa_hat = build_hodges(grid, mat, W_e, W_f)
    M_kappa_eqs = (W_e @ mat.kappa_conductor_plus_hat()) / grid.edge_lengths
    return OperatorSet(grid, G, C, D, W_e, W_f, M_nu, M_kappa, M_eps, M_kappa_hat, M_kappa_eqs)


def export_matrix_market(matrix, path, comment: str = "") -> Path:
    """Write a sparse matrix (or a 1-D diagonal) in Matrix Market coordinate format."""
    path = Path(path)
    m = sp.diags(matrix) if np.ndim(matrix) == 1 else matrix
    scipy.io.mmwrite(str(path), sp.coo_matrix(m), comment=comment)
    if path.suffix != ".mtx" and not path.exists():
        path = path.with_suffix(path.suffix + ".mtx")
    return path
