import logging

import numpy as np
import pytest

from emqs.grid import GridSpec, build_grid
from emqs.materials import EPS0, MU0, KappaHatPolicy, MaterialBox, build_material_field


@pytest.fixture
def grid():
    return build_grid(GridSpec(4, 2, 2))


def test_vacuum_default(grid):
    m = build_material_field(grid)
    assert not m.is_conductive.any()
    assert np.all(m.kappa == 0) and np.all(m.eps == EPS0) and np.all(m.nu == 1 / MU0)
    assert m.kappa_hat == 0.0


def test_conductor_and_yoke(grid):
    boxes = [MaterialBox((0, 0, 0), (2, 2, 2), kappa=5.96e7, tag="cu"), MaterialBox((2, 0, 0), (4, 2, 2), kappa=2e-3, mu_r=4000, tag="yoke")]
    m = build_material_field(grid, boxes=boxes)
    cu = m.tags == "cu"
    assert cu.sum() == 8 and np.all(m.is_conductive[cu])
    assert np.allclose(m.nu[m.tags == "yoke"], 1 / (4000 * MU0), rtol=0, atol=0)
    assert np.array_equal(m.is_conductive, m.kappa > 0)
    # default kappa-hat: 1e-4 of the smallest conductivity
    assert m.kappa_hat == pytest.approx(2e-7)


def test_painters_order(grid):
    a = MaterialBox((0, 0, 0), (4, 2, 2), kappa=1.0, tag="a")
    b = MaterialBox((1, 0, 0), (2, 2, 2), kappa=2.0, tag="b")
    m = build_material_field(grid, boxes=[a, b])
    assert set(m.kappa[m.tags == "b"]) == {2.0}
    m2 = build_material_field(grid, boxes=[b, a])
    assert not (m2.tags == "b").any()


def test_non_overlapping_permutation_invariant(grid):
    a = MaterialBox((0, 0, 0), (1, 2, 2), kappa=1.0, tag="a")
    b = MaterialBox((3, 0, 0), (4, 2, 2), eps_r=4.0, tag="b")
    m1, m2 = build_material_field(grid, boxes=[a, b]), build_material_field(grid, boxes=[b, a])
    for f in ("kappa", "eps", "nu", "tags"):
        assert np.array_equal(getattr(m1, f), getattr(m2, f))


@pytest.mark.parametrize("kw", [dict(kappa=-1.0), dict(mu_r=0.0), dict(eps_r=-1.0)])
def test_rejects_invalid_parameters(kw):
    with pytest.raises(ValueError):
        MaterialBox((0, 0, 0), (1, 1, 1), **kw)


def test_rejects_degenerate_box():
    with pytest.raises(ValueError):
        MaterialBox((0, 0, 0), (1, 0, 1))


def test_clipping_warns(grid, caplog):
    with caplog.at_level(logging.WARNING):
        build_material_field(grid, boxes=[MaterialBox((-1, 0, 0), (1, 2, 2), kappa=1.0)])
    assert "clipped" in caplog.text


def test_kappa_hat_must_stay_below_conductors(grid):
    box = MaterialBox((0, 0, 0), (1, 2, 2), kappa=1.0)
    with pytest.raises(ValueError):
        build_material_field(grid, boxes=[box], kappa_hat=KappaHatPolicy(value=1.0))
    m = build_material_field(grid, boxes=[box], kappa_hat=KappaHatPolicy(value=0.5, placement="nonconductive"))
    cells = m.kappa_hat_cells()
    assert np.all(cells[m.is_conductive] == 0) and np.all(cells[~m.is_conductive] == 0.5)
    assert np.array_equal(m.kappa_conductor_plus_hat(), np.where(m.is_conductive, 1.0, 0.5))


def test_restrict_eps(grid):
    box = MaterialBox((0, 0, 0), (1, 2, 2), kappa=1.0, eps_r=3.0)
    m = build_material_field(grid, boxes=[box], restrict_eps=True)
    assert np.all(m.eps_hodge[m.is_conductive] == 0)
    assert np.all(m.eps[m.is_conductive] == 3 * EPS0)
