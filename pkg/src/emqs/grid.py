"""Tensor-product hexahedral primal grid and its orthogonal dual.

Entities are ordered axis-major: every x-directed edge (or x-normal face)
first, then y, then z. Inside one axis block the index runs lexicographically
with ``i`` fastest, then ``j``, then ``k``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

Spacing = Union[float, Sequence[float], np.ndarray]

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class GridSpec:
    """Cell counts, spacings (m) and origin (m) of a box-shaped grid.

    ``dx``, ``dy`` and ``dz`` may be scalars (uniform) or arrays holding one
    spacing per cell along the axis.
    """

    nx: int
    ny: int
    nz: int
    dx: Spacing = 1.0
    dy: Spacing = 1.0
    dz: Spacing = 1.0
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def spacings(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        out = []
        for name, n, d in (("x", self.nx, self.dx), ("y", self.ny, self.dy), ("z", self.nz, self.dz)):
            if int(n) != n or n < 1:
                raise ValueError(f"n{name} must be a positive integer, got {n!r}")
            h = np.asarray(d, dtype=float)
            if h.ndim == 0:
                h = np.full(int(n), float(h))
            if h.shape != (int(n),):
                raise ValueError(f"d{name} must be a scalar or have length n{name}={n}")
            if not np.all(np.isfinite(h)) or np.any(h <= 0):
                raise ValueError(f"d{name} spacings must be positive and finite")
            out.append(h)
        return out[0], out[1], out[2]


def _shapes(n: tuple[int, int, int]) -> dict[str, list[tuple[int, int, int]]]:
    nx, ny, nz = n
    return {
        "node": [(nx + 1, ny + 1, nz + 1)],
        "edge": [(nx, ny + 1, nz + 1), (nx + 1, ny, nz + 1), (nx + 1, ny + 1, nz)],
        "face": [(nx + 1, ny, nz), (nx, ny + 1, nz), (nx, ny, nz + 1)],
        "cell": [(nx, ny, nz)],
    }


def _dual_lengths(h: np.ndarray) -> np.ndarray:
    """Dual extents around each primal node along one axis (halved at the ends)."""
    d = np.zeros(h.size + 1)
    d[:-1] += 0.5 * h
    d[1:] += 0.5 * h
    return d


@dataclass(frozen=True, eq=False)
class Grid:
    spec: GridSpec
    hx: np.ndarray
    hy: np.ndarray
    hz: np.ndarray
    edge_lengths: np.ndarray
    face_areas: np.ndarray
    cell_volumes: np.ndarray
    dual_edge_lengths: np.ndarray | None = None
    dual_face_areas: np.ndarray | None = None

    # counts and index maps -------------------------------------------------

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.hx.size, self.hy.size, self.hz.size

    @property
    def n_nodes(self) -> int:
        nx, ny, nz = self.shape
        return (nx + 1) * (ny + 1) * (nz + 1)

    @property
    def n_edges(self) -> int:
        return sum(int(np.prod(s)) for s in _shapes(self.shape)["edge"])

    @property
    def n_faces(self) -> int:
        return sum(int(np.prod(s)) for s in _shapes(self.shape)["face"])

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.shape
        return nx * ny * nz

    def entity_shapes(self, kind: str) -> list[tuple[int, int, int]]:
        return _shapes(self.shape)[kind]

    def axis_offsets(self, kind: str) -> np.ndarray:
        sizes = [int(np.prod(s)) for s in self.entity_shapes(kind)]
        return np.concatenate([[0], np.cumsum(sizes)])

    def index(self, kind: str, axis: int, i, j, k):
        """Flat index of entity ``(axis, i, j, k)``; nodes and cells use axis 0."""
        shapes = self.entity_shapes(kind)
        if axis >= len(shapes):
            raise ValueError(f"{kind} has no axis {axis}")
        flat = np.ravel_multi_index((i, j, k), shapes[axis], order="F")
        return self.axis_offsets(kind)[axis] + flat

    def unindex(self, kind: str, flat):
        """Inverse of :meth:`index`: returns ``(axis, i, j, k)``."""
        flat = np.asarray(flat)
        offsets = self.axis_offsets(kind)
        if np.any(flat < 0) or np.any(flat >= offsets[-1]):
            raise IndexError(f"{kind} index out of range")
        axis = np.searchsorted(offsets, flat, side="right") - 1
        i = np.empty_like(flat)
        j = np.empty_like(flat)
        k = np.empty_like(flat)
        for a, shape in enumerate(self.entity_shapes(kind)):
            sel = axis == a
            i[sel], j[sel], k[sel] = np.unravel_index(flat[sel] - offsets[a], shape, order="F")
        return axis, i, j, k

    def entity_lattice(self, kind: str, axis: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(i, j, k)`` arrays of every entity of one axis block, in flat order."""
        shape = self.entity_shapes(kind)[axis]
        return np.unravel_index(np.arange(int(np.prod(shape))), shape, order="F")

    # geometry --------------------------------------------------------------

    @property
    def node_coords_1d(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        o = self.spec.origin
        return tuple(o[a] + np.concatenate([[0.0], np.cumsum(h)]) for a, h in enumerate((self.hx, self.hy, self.hz)))

    @property
    def extent(self) -> np.ndarray:
        return np.array([self.hx.sum(), self.hy.sum(), self.hz.sum()])

    def node_coords(self) -> np.ndarray:
        xs, ys, zs = self.node_coords_1d
        i, j, k = self.entity_lattice("node", 0)
        return np.column_stack([xs[i], ys[j], zs[k]])

    def cell_centers(self) -> np.ndarray:
        xs, ys, zs = self.node_coords_1d
        cx, cy, cz = 0.5 * (xs[1:] + xs[:-1]), 0.5 * (ys[1:] + ys[:-1]), 0.5 * (zs[1:] + zs[:-1])
        i, j, k = self.entity_lattice("cell", 0)
        return np.column_stack([cx[i], cy[j], cz[k]])

    def is_uniform(self) -> bool:
        return all(np.all(h == h[0]) for h in (self.hx, self.hy, self.hz))

    def boundary_nodes(self) -> np.ndarray:
        nx, ny, nz = self.shape
        i, j, k = self.entity_lattice("node", 0)
        return (i == 0) | (i == nx) | (j == 0) | (j == ny) | (k == 0) | (k == nz)

    def boundary_edges(self) -> np.ndarray:
        """Mask of edges lying in the domain boundary (tangential edges)."""
        n = self.shape
        out = []
        for axis in range(3):
            ijk = self.entity_lattice("edge", axis)
            mask = np.zeros(ijk[0].size, dtype=bool)
            for other in range(3):
                if other != axis:
                    mask |= (ijk[other] == 0) | (ijk[other] == n[other])
            out.append(mask)
        return np.concatenate(out)

    def edge_axes(self) -> np.ndarray:
        off = self.axis_offsets("edge")
        return np.repeat(np.arange(3), np.diff(off))

    def face_axes(self) -> np.ndarray:
        off = self.axis_offsets("face")
        return np.repeat(np.arange(3), np.diff(off))


def build_grid(spec: GridSpec) -> Grid:
    """Build the primal grid with all primal and dual metrics."""
    hx, hy, hz = spec.spacings()
    h = (hx, hy, hz)
    proto = Grid(spec, hx, hy, hz, np.empty(0), np.empty(0), np.empty(0))

    lengths = []
    for axis in range(3):
        ijk = proto.entity_lattice("edge", axis)
        lengths.append(h[axis][ijk[axis]])

    areas = []
    for axis in range(3):
        ijk = proto.entity_lattice("face", axis)
        a, b = (ax for ax in range(3) if ax != axis)
        areas.append(h[a][ijk[a]] * h[b][ijk[b]])

    i, j, k = proto.entity_lattice("cell", 0)
    volumes = hx[i] * hy[j] * hz[k]

    grid = dataclasses.replace(
        proto,
        edge_lengths=np.concatenate(lengths),
        face_areas=np.concatenate(areas),
        cell_volumes=volumes,
    )
    return dual_metrics(grid)


def dual_metrics(grid: Grid) -> Grid:
    """Fill dual edge lengths (per primal face) and dual face areas (per primal edge).

    Dual nodes sit at cell centres; dual cells touching the boundary are
    truncated at the boundary.
    """
    dual = [_dual_lengths(h) for h in (grid.hx, grid.hy, grid.hz)]

    dual_areas = []
    for axis in range(3):
        ijk = grid.entity_lattice("edge", axis)
        a, b = (ax for ax in range(3) if ax != axis)
        dual_areas.append(dual[a][ijk[a]] * dual[b][ijk[b]])

    dual_lengths = []
    for axis in range(3):
        ijk = grid.entity_lattice("face", axis)
        dual_lengths.append(dual[axis][ijk[axis]])

    return dataclasses.replace(
        grid,
        dual_edge_lengths=np.concatenate(dual_lengths),
        dual_face_areas=np.concatenate(dual_areas),
    )
