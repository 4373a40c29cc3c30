import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emqs.grid import GridSpec, build_grid, dual_metrics


def test_counts_2x2x2():
    g = build_grid(GridSpec(2, 2, 2))
    assert (g.n_nodes, g.n_edges, g.n_faces, g.n_cells) == (27, 54, 36, 8)


def test_unit_cube_counts():
    g = build_grid(GridSpec(1, 1, 1))
    assert (g.n_edges, g.n_faces, g.n_cells) == (12, 6, 1)


def test_euler_3x2x1_against_enumeration():
    g = build_grid(GridSpec(3, 2, 1))
    assert g.n_nodes == 24
    # direct enumeration of the entity lattices
    n_e = sum(len(list(np.ndindex(*s))) for s in g.entity_shapes("edge"))
    n_f = sum(len(list(np.ndindex(*s))) for s in g.entity_shapes("face"))
    assert (n_e, n_f) == (g.n_edges, g.n_faces)
    assert g.n_nodes - g.n_edges + g.n_faces - g.n_cells == 1


@pytest.mark.parametrize("bad", [dict(nx=0, ny=1, nz=1), dict(nx=1, ny=1, nz=1, dx=0.0), dict(nx=1, ny=1, nz=1, dy=-1.0),
                                 dict(nx=2, ny=1, nz=1, dx=[1.0])])
def test_rejects_bad_specs(bad):
    with pytest.raises(ValueError):
        build_grid(GridSpec(**bad))


def _x_edge(g, i, j, k):
    return g.index("edge", 0, i, j, k)


def test_dual_area_uniform():
    g = build_grid(GridSpec(2, 2, 2))
    assert g.dual_face_areas[_x_edge(g, 0, 1, 1)] == 1.0
    assert g.dual_face_areas[_x_edge(g, 0, 0, 0)] == 0.25
    assert g.dual_face_areas[_x_edge(g, 0, 0, 1)] == 0.5


def test_dual_area_anisotropic():
    g = build_grid(GridSpec(2, 2, 2, 1.0, 2.0, 4.0))
    assert g.dual_face_areas[_x_edge(g, 0, 1, 1)] == 8.0


def test_dual_edge_lengths():
    g = dual_metrics(build_grid(GridSpec(2, 2, 2)))
    face = g.index("face", 0, 1, 0, 0)
    assert g.dual_edge_lengths[face] == 1.0
    assert g.dual_edge_lengths[g.index("face", 0, 0, 0, 0)] == 0.5


specs = st.builds(
    lambda n, h: GridSpec(*n, *h),
    st.tuples(*[st.integers(1, 5)] * 3),
    st.tuples(*[st.floats(0.1, 3.0)] * 3),
)


@settings(max_examples=30, deadline=None)
@given(specs)
def test_index_round_trip_and_metrics(spec):
    g = build_grid(spec)
    for kind in ("node", "edge", "face", "cell"):
        total = {"node": g.n_nodes, "edge": g.n_edges, "face": g.n_faces, "cell": g.n_cells}[kind]
        flat = np.arange(total)
        axis, i, j, k = g.unindex(kind, flat)
        back = np.array([g.index(kind, a, ii, jj, kk) for a, ii, jj, kk in zip(axis, i, j, k)])
        assert np.array_equal(back, flat)
    assert np.isclose(g.cell_volumes.sum(), np.prod(g.extent), rtol=1e-13)
    # dual faces of the z-edges in one layer tile the xy cross-section
    z_layer = g.axis_offsets("edge")[2] + np.arange((spec.nx + 1) * (spec.ny + 1))
    assert np.isclose(g.dual_face_areas[z_layer].sum(), g.extent[0] * g.extent[1], rtol=1e-13)
    assert np.all(g.dual_face_areas > 0) and np.all(g.dual_edge_lengths > 0)
    assert g.n_nodes - g.n_edges + g.n_faces - g.n_cells == 1


def test_nonuniform_spacing_arrays():
    g = build_grid(GridSpec(3, 1, 1, [1.0, 2.0, 3.0], 1.0, 1.0))
    assert np.allclose(g.node_coords_1d[0], [0, 1, 3, 6])
    assert not g.is_uniform()
