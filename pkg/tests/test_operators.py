import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from emqs.grid import GridSpec, build_grid
from emqs.materials import EPS0, MU0, MaterialBox, build_material_field
from emqs.operators import build_hodges, build_incidence, build_operators, export_matrix_market


def test_unit_cube_shapes_and_exactness():
    G, C, D = build_incidence(build_grid(GridSpec(1, 1, 1)))
    assert C.shape == (6, 12) and G.shape == (12, 8) and D.shape == (1, 6)
    assert (C @ G).nnz == 0 or not (C @ G).toarray().any()
    assert C.dtype.kind == "i"


def test_row_structure():
    G, C, D = build_incidence(build_grid(GridSpec(2, 3, 2)))
    for M, k in ((G, 2), (C, 4), (D, 6)):
        assert np.all(np.diff(M.indptr) == k)
        assert set(np.unique(M.data)) == {-1, 1}


def test_unit_cube_x_face_orientation():
    g = build_grid(GridSpec(1, 1, 1))
    _, C, _ = build_incidence(g)
    row = C[g.index("face", 0, 0, 0, 0)].toarray().ravel()
    expect = np.zeros(12, dtype=int)
    expect[g.index("edge", 1, 0, 0, 0)] = 1
    expect[g.index("edge", 2, 0, 1, 0)] = 1
    expect[g.index("edge", 1, 0, 0, 1)] = -1
    expect[g.index("edge", 2, 0, 0, 0)] = -1
    assert np.array_equal(row, expect)


@settings(max_examples=25, deadline=None)
@given(st.tuples(*[st.integers(1, 6)] * 3))
def test_exactness_random(n):
    G, C, D = build_incidence(build_grid(GridSpec(*n)))
    assert not (C @ G).toarray().any()
    assert not (D @ C).toarray().any()


def _interior_edge(g, axis):
    i = [1, 1, 1]
    i[axis] = 0
    return g.index("edge", axis, *i)


def test_hodge_examples():
    g = build_grid(GridSpec(2, 2, 2))
    m = build_material_field(g)
    M_nu, M_k, M_e, M_kh = build_hodges(g, m)
    assert M_e[_interior_edge(g, 0)] == EPS0
    # mu_r = 4000 everywhere
    m2 = build_material_field(g, boxes=[MaterialBox((-1, -1, -1), (3, 3, 3), mu_r=4000.0)])
    M_nu2 = build_hodges(g, m2)[0]
    assert M_nu2[g.index("face", 0, 1, 0, 0)] == pytest.approx(1 / (4000 * MU0), rel=1e-15)
    # z edge at (1,1): cells x<1 conductive, x>1 void -> half of the dual face in conductor
    m3 = build_material_field(g, boxes=[MaterialBox((0, 0, 0), (1, 2, 2), kappa=5.96e7)])
    M_k3 = build_hodges(g, m3)[1]
    assert M_k3[g.index("edge", 2, 1, 1, 0)] == pytest.approx(5.96e7 * 0.5, rel=1e-15)


def test_face_hodge_is_series_in_mu():
    g = build_grid(GridSpec(2, 1, 1))
    m = build_material_field(g, boxes=[MaterialBox((0, 0, 0), (1, 1, 1), mu_r=4.0)])
    M_nu = build_hodges(g, m)[0]
    f = g.index("face", 0, 1, 0, 0)  # x-face between the two cells
    assert M_nu[f] == pytest.approx(0.5 * (1 / (4 * MU0) + 1 / MU0), rel=1e-15)


def test_hodge_positivity_and_kernel():
    g = build_grid(GridSpec(3, 2, 2))
    m = build_material_field(g, boxes=[MaterialBox((0, 0, 0), (1, 2, 2), kappa=1.0)])
    ops = build_operators(g, m)
    assert np.all(ops.M_nu > 0) and np.all(ops.M_eps > 0) and np.all(ops.M_kappa >= 0)
    zero = ops.M_kappa == 0
    touches = (ops.edge_weights @ m.is_conductive.astype(float)) > 0
    assert np.array_equal(zero, ~touches)


def test_curlcurl_kernel_is_gradient_range():
    g = build_grid(GridSpec(2, 2, 2))
    ops = build_operators(g, build_material_field(g))
    K = ops.curlcurl().toarray()
    assert np.array_equal(K, K.T)
    ev = np.linalg.eigvalsh(K)
    assert ev.min() > -1e-9 * ev.max()
    null = int(np.sum(ev < 1e-9 * ev.max()))
    assert null == np.linalg.matrix_rank(ops.G.toarray())


def test_size_mismatch_rejected():
    g = build_grid(GridSpec(2, 2, 2))
    m = build_material_field(build_grid(GridSpec(1, 1, 1)))
    with pytest.raises(ValueError):
        build_hodges(g, m)


def test_matrix_market_round_trip(tmp_path):
    g = build_grid(GridSpec(2, 1, 1))
    _, C, _ = build_incidence(g)
    p = export_matrix_market(C, tmp_path / "C.mtx", "curl")
    back = sp.csr_matrix(scipy.io.mmread(str(p)))
    assert (back != C).nnz == 0
