"""Per-cell material parameters painted from axis-aligned boxes."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid

logger = logging.getLogger(__name__)

MU0 = 4e-7 * np.pi
EPS0 = 8.8541878128e-12
C0 = 1.0 / np.sqrt(MU0 * EPS0)

KAPPA_HAT_PLACEMENTS = ("everywhere", "nonconductive")
DEFAULT_KAPPA_HAT_RATIO = 1e-4


@dataclass(frozen=True)
class MaterialBox:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    kappa: float = 0.0
    eps_r: float = 1.0
    mu_r: float = 1.0
    tag: str = ""

    def __post_init__(self):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("box corners must be 3-vectors")
        if np.any(lo >= hi):
            raise ValueError(f"box {self.tag!r}: lo must be < hi componentwise")
        if self.kappa < 0:
            raise ValueError(f"box {self.tag!r}: negative conductivity {self.kappa}")
        if self.mu_r <= 0:
            raise ValueError(f"box {self.tag!r}: mu_r must be positive")
        if self.eps_r < 0:
            raise ValueError(f"box {self.tag!r}: eps_r must be non-negative")


VOID = MaterialBox(lo=(-np.inf,) * 3, hi=(np.inf,) * 3, tag="void")


@dataclass(frozen=True)
class KappaHatPolicy:
    """Artificial conductivity: magnitude (None = ratio of the smallest real
    conductivity) and placement."""

    value: float | None = None
    placement: str = "everywhere"
    ratio: float = DEFAULT_KAPPA_HAT_RATIO

    def __post_init__(self):
        if self.placement not in KAPPA_HAT_PLACEMENTS:
            raise ValueError(f"placement must be one of {KAPPA_HAT_PLACEMENTS}")
        if self.value is not None and self.value < 0:
            raise ValueError("kappa_hat must be non-negative")


@dataclass(frozen=True, eq=False)
class MaterialField:
    kappa: np.ndarray
    eps: np.ndarray
    nu: np.ndarray
    tags: np.ndarray
    kappa_hat: float = 0.0
    kappa_hat_placement: str = "everywhere"
    restrict_eps: bool = False
    eps_hodge: np.ndarray = field(default=None, repr=False)

    @property
    def is_conductive(self) -> np.ndarray:
        return self.kappa > 0

    @property
    def n_cells(self) -> int:
        return self.kappa.size

    def kappa_hat_cells(self, placement: str | None = None) -> np.ndarray:
        placement = placement or self.kappa_hat_placement
        out = np.full(self.n_cells, self.kappa_hat)
        if placement == "nonconductive":
            out[self.is_conductive] = 0.0
        return out

    def kappa_conductor_plus_hat(self) -> np.ndarray:
        """kappa in conductive cells, kappa_hat in non-conductive ones."""
        return np.where(self.is_conductive, self.kappa, self.kappa_hat)

    def with_kappa_hat(self, value: float, placement: str | None = None) -> "MaterialField":
        if value < 0:
            raise ValueError("kappa_hat must be non-negative")
        _check_kappa_hat(self.kappa, value)
        return MaterialField(
            self.kappa, self.eps, self.nu, self.tags, float(value),
            placement or self.kappa_hat_placement, self.restrict_eps, self.eps_hodge,
        )


def _check_kappa_hat(kappa: np.ndarray, value: float) -> None:
    cond = kappa[kappa > 0]
    if value > 0 and cond.size and value >= cond.min():
        raise ValueError(f"kappa_hat={value} must stay below the smallest conductivity {cond.min()}")


def build_material_field(
    grid: Grid,
    background: MaterialBox = VOID,
    boxes: list[MaterialBox] | tuple = (),
    kappa_hat: KappaHatPolicy | None = None,
    restrict_eps: bool = False,
) -> MaterialField:
    """Paint boxes onto cells in list order using the cell-centre test.

    With ``restrict_eps`` the permittivity seen by the edge Hodge is zeroed in
    conductive cells; ``eps`` itself keeps the painted value.
    """
    kappa_hat = kappa_hat or KappaHatPolicy()
    n = grid.n_cells
    centers = grid.cell_centers()
    lo_dom = np.asarray(grid.spec.origin, float)
    hi_dom = lo_dom + grid.extent

    kappa = np.full(n, float(background.kappa))
    eps_r = np.full(n, float(background.eps_r))
    mu_r = np.full(n, float(background.mu_r))
    tags = np.full(n, background.tag or "background", dtype=object)

    for box in boxes:
        lo, hi = np.asarray(box.lo, float), np.asarray(box.hi, float)
        if np.any(lo < lo_dom - 1e-12 * grid.extent) or np.any(hi > hi_dom + 1e-12 * grid.extent):
            logger.warning("box %r extends outside the domain and is clipped", box.tag)
        inside = np.all((centers >= lo) & (centers <= hi), axis=1)
        if not inside.any():
            logger.warning("box %r contains no cell centre", box.tag)
        kappa[inside] = box.kappa
        eps_r[inside] = box.eps_r
        mu_r[inside] = box.mu_r
        tags[inside] = box.tag

    if kappa_hat.value is None:
        cond = kappa[kappa > 0]
        value = kappa_hat.ratio * cond.min() if cond.size else 0.0
    else:
        value = float(kappa_hat.value)
    _check_kappa_hat(kappa, value)

    eps = EPS0 * eps_r
    eps_hodge = np.where(kappa > 0, 0.0, eps) if restrict_eps else eps
    return MaterialField(
        kappa=kappa,
        eps=eps,
        nu=1.0 / (MU0 * mu_r),
        tags=tags,
        kappa_hat=value,
        kappa_hat_placement=kappa_hat.placement,
        restrict_eps=restrict_eps,
        eps_hodge=eps_hodge,
    )
