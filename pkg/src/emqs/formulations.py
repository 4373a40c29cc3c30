"""Assembly of the frequency- and time-domain (A, phi) block systems.

Every formulation works on the full edge/node vectors first and is then
reduced to the free DOFs: vector potential on interior edges (``a = 0`` on
boundary-tangential edges), scalar potential on non-terminal nodes, and,
for the Lagrange form, one multiplier per interior non-terminal node.
Dirichlet values are folded into the right-hand side by row/column
elimination, which keeps symmetric formulations exactly symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .materials import MaterialField
from .operators import OperatorSet

FORMULATIONS = (
    "monolithic",
    "regularized",
    "regularized-psi",
    "symmetric",
    "lagrange",
    "graddiv",
    "eqs-gauge",
    "tsm",
    "dd-combined",
    "td-symmetric",
)


class StaticLimitError(ValueError):
    """Raised for omega <= 0: potential formulations degenerate in the static limit."""


@dataclass(frozen=True, eq=False)
class Excitation:
    """Terminal potentials, impressed edge currents and nodal charge sources.

    Node sets hold flat node indices. ``js`` (A, per edge) and ``rho_s``
    (C, per node) default to zero.
    """

    source_nodes: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    ground_nodes: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    phi_source: complex = 1.0
    phi_ground: complex = 0.0
    js: np.ndarray | None = None
    rho_s: np.ndarray | None = None

    def __post_init__(self):
        s = np.unique(np.asarray(self.source_nodes, dtype=int))
        g = np.unique(np.asarray(self.ground_nodes, dtype=int))
        if np.intersect1d(s, g).size:
            raise ValueError("source and ground terminals share nodes")
        object.__setattr__(self, "source_nodes", s)
        object.__setattr__(self, "ground_nodes", g)

    def with_potentials(self, phi_source: complex, phi_ground: complex = 0.0) -> "Excitation":
        return Excitation(self.source_nodes, self.ground_nodes, phi_source, phi_ground, self.js, self.rho_s)

    def dirichlet_nodes(self) -> np.ndarray:
        return np.concatenate([self.source_nodes, self.ground_nodes])

    def node_values(self, n_nodes: int) -> np.ndarray:
        phi = np.zeros(n_nodes, dtype=complex)
        phi[self.source_nodes] = self.phi_source
        phi[self.ground_nodes] = self.phi_ground
        return phi

    def edge_currents(self, n_edges: int) -> np.ndarray:
        if self.js is None:
            return np.zeros(n_edges, dtype=complex)
        js = np.asarray(self.js, dtype=complex)
        if js.shape != (n_edges,):
            raise ValueError(f"js must have one entry per edge ({n_edges})")
        return js

    def node_charges(self, n_nodes: int) -> np.ndarray:
        if self.rho_s is None:
            return np.zeros(n_nodes, dtype=complex)
        rho = np.asarray(self.rho_s, dtype=complex)
        if rho.shape != (n_nodes,):
            raise ValueError(f"rho_s must have one entry per node ({n_nodes})")
        return rho


@dataclass(frozen=True, eq=False)
class DofPartition:
    n_edges: int
    n_nodes: int
    free_edges: np.ndarray
    free_nodes: np.ndarray
    gamma_nodes: np.ndarray
    node_unknown: str = "phi"  # "phi" or "psi" (phi = j omega psi)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return self.free_edges.size, self.free_nodes.size, self.gamma_nodes.size

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    @property
    def n_dofs(self) -> int:
        return int(sum(self.sizes))

    def slices(self) -> tuple[slice, slice, slice]:
        o = self.offsets
        return slice(o[0], o[1]), slice(o[1], o[2]), slice(o[2], o[3])

    def free_full_index(self) -> np.ndarray:
        """Positions of the free DOFs inside ``[a_full, nodes_full, gamma]``."""
        return np.concatenate(
            [self.free_edges, self.n_edges + self.free_nodes, self.n_edges + self.n_nodes + np.arange(self.gamma_nodes.size)]
        )

    def fixed_full_index(self) -> np.ndarray:
        fixed_e = np.setdiff1d(np.arange(self.n_edges), self.free_edges)
        fixed_n = np.setdiff1d(np.arange(self.n_nodes), self.free_nodes)
        return np.concatenate([fixed_e, self.n_edges + fixed_n])


@dataclass(frozen=True, eq=False)
class AssembledSystem:
    formulation: str
    matrix: sp.csr_matrix
    rhs: np.ndarray
    partition: DofPartition
    fixed_values: np.ndarray
    """Full ``[a, nodes]`` vector carrying the Dirichlet values (free entries zero)."""
    is_symmetric: bool
    expected_singular: bool
    block_triangular: bool
    omega: float | None = None
    dt: float | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def block(self, row: int, col: int) -> sp.csr_matrix:
        s = self.partition.slices()
        return self.matrix[s[row], :][:, s[col]]

    def expand(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Full ``(a, node potential, gamma)`` vectors from a reduced solution.

        The node vector is in the system's own unknown (phi or psi).
        """
        p = self.partition
        x = np.asarray(x)
        if x.shape != (p.n_dofs,):
            raise ValueError(f"solution has shape {x.shape}, system has {p.n_dofs} DOFs")
        sa, sn, sg = p.slices()
        a = self.fixed_values[: p.n_edges].astype(complex)
        nodes = self.fixed_values[p.n_edges:].astype(complex)
        a[p.free_edges] = x[sa]
        nodes[p.free_nodes] = x[sn]
        return a, nodes, x[sg].copy()

    def potentials(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Full ``(a, phi)``; psi-scaled systems are mapped back with phi = j omega psi."""
        a, nodes, _ = self.expand(x)
        if self.partition.node_unknown == "psi":
            nodes = 1j * self.omega * nodes
        return a, nodes


# --------------------------------------------------------------------------- helpers


def _check_omega(omega: float) -> float:
    if not np.isfinite(omega) or omega <= 0:
        raise StaticLimitError(
            f"omega={omega!r}: frequency-domain potential formulations need omega > 0 "
            "(the static limit is unstable and out of scope)"
        )
    return float(omega)


def _diag(v) -> sp.dia_matrix:
    return sp.diags(np.asarray(v))


def gauge_nodes(ops: OperatorSet, exc: Excitation) -> np.ndarray:
    """Interior, non-terminal nodes: the support of the gradient null space of the curl-curl."""
    interior = np.flatnonzero(~ops.grid.boundary_nodes())
    return np.setdiff1d(interior, exc.dirichlet_nodes())


def make_partition(ops: OperatorSet, exc: Excitation, node_unknown: str = "phi", with_gamma: bool = False) -> DofPartition:
    grid = ops.grid
    if exc.dirichlet_nodes().size and (exc.dirichlet_nodes().max() >= grid.n_nodes or exc.dirichlet_nodes().min() < 0):
        raise ValueError("terminal node index out of range")
    free_edges = np.flatnonzero(~grid.boundary_edges())
    free_nodes = np.setdiff1d(np.arange(grid.n_nodes), exc.dirichlet_nodes())
    gamma = gauge_nodes(ops, exc) if with_gamma else np.empty(0, dtype=int)
    return DofPartition(grid.n_edges, grid.n_nodes, free_edges, free_nodes, gamma, node_unknown)


def _reduce(full: sp.spmatrix, rhs_full: np.ndarray, part: DofPartition, fixed: np.ndarray):
    full = full.tocsr()
    free = part.free_full_index()
    n_fixed = part.n_edges + part.n_nodes
    fixed_idx = part.fixed_full_index()
    A_ff = full[free, :][:, free]
    A_fd = full[free, :][:, fixed_idx]
    b = rhs_full[free] - A_fd @ fixed[:n_fixed][fixed_idx]
    A_ff.sort_indices()
    return A_ff.tocsr(), np.asarray(b, dtype=complex)


def _gradient_nullspace_nodes(ops: OperatorSet, part: DofPartition, exc: Excitation, edge_mass: np.ndarray) -> bool:
    """True if some interior free node has only zero-mass incident edges."""
    interior = gauge_nodes(ops, exc)
    if interior.size == 0:
        return False
    touched = abs(ops.G.T) @ (np.abs(edge_mass) > 0).astype(float)
    return bool(np.any(touched[interior] == 0))


def _floating(exc: Excitation) -> bool:
    return exc.dirichlet_nodes().size == 0


def _assemble(
    ident: str,
    ops: OperatorSet,
    exc: Excitation,
    blocks: list[list],
    rhs_blocks: list[np.ndarray],
    part: DofPartition,
    node_fixed: np.ndarray,
    *,
    is_symmetric: bool,
    expected_singular: bool,
    block_triangular: bool = False,
    omega: float | None = None,
    dt: float | None = None,
) -> AssembledSystem:
    full = sp.bmat(blocks, format="csr", dtype=complex)
    rhs_full = np.concatenate([np.asarray(r, dtype=complex) for r in rhs_blocks])
    fixed = np.concatenate([np.zeros(part.n_edges, dtype=complex), node_fixed])
    A, b = _reduce(full, rhs_full, part, fixed)
    return AssembledSystem(
        formulation=ident,
        matrix=A,
        rhs=b,
        partition=part,
        fixed_values=fixed,
        is_symmetric=is_symmetric,
        expected_singular=bool(expected_singular or _floating(exc)),
        block_triangular=block_triangular,
        omega=omega,
        dt=dt,
    )


def _kappa_hat_hodge(ops: OperatorSet, mat: MaterialField | None, kappa_hat: float | None) -> np.ndarray:
    if kappa_hat is None:
        return ops.M_kappa_hat
    if mat is None:
        raise ValueError("an explicit kappa_hat needs the material field")
    return ops.edge_hodge(mat.with_kappa_hat(kappa_hat).kappa_hat_cells())


# --------------------------------------------------------------------------- frequency domain


def fd_monolithic_darwin(ops: OperatorSet, mat: MaterialField | None, exc: Excitation, omega: float) -> AssembledSystem:
    """Darwin-Ampere plus Darwin continuity. Singular by construction."""
    return _darwin_fd(ops, exc, omega, np.zeros(ops.grid.n_edges), "monolithic")


def fd_darwin_regularized(
    ops: OperatorSet,
    mat: MaterialField | None,
    exc: Excitation,
    omega: float,
    kappa_hat: float | None = None,
    scaled_psi: bool = False,
) -> AssembledSystem:
    """Darwin continuity augmented by the implicit kappa-hat Coulomb-type gauge.

    With ``scaled_psi`` the node unknown is psi with phi = j omega psi.
    """
    M_hat = _kappa_hat_hodge(ops, mat, kappa_hat)
    ident = "regularized-psi" if scaled_psi else "regularized"
    return _darwin_fd(ops, exc, omega, M_hat, ident, scaled_psi=scaled_psi)


def _darwin_fd(ops, exc, omega, M_hat, ident, scaled_psi=False) -> AssembledSystem:
    w = _check_omega(omega)
    jw = 1j * w
    G = ops.G
    K = ops.curlcurl()
    Mk, Me = ops.M_kappa, ops.M_eps
    Ms = Mk + jw * Me
    js = exc.edge_currents(ops.grid.n_edges)
    phi_fixed = exc.node_values(ops.grid.n_nodes)

    A11 = K + _diag(jw * Mk)
    GtMsG = G.T @ _diag(Ms) @ G
    # the kappa-hat gauge acts on interior nodes only; on the boundary it would
    # add a spurious current through the insulating surface
    mask = np.zeros(ops.grid.n_nodes)
    mask[gauge_nodes(ops, exc)] = 1.0
    Gt_reg = G.T @ _diag(Mk) + _diag(mask) @ G.T @ _diag(M_hat)
    if scaled_psi:
        part = make_partition(ops, exc, node_unknown="psi")
        blocks = [[A11, jw * (_diag(Ms) @ G)], [jw * Gt_reg, jw * GtMsG]]
        rhs = [js, G.T @ js]
        node_fixed = phi_fixed / jw
    else:
        part = make_partition(ops, exc)
        blocks = [[A11, _diag(Ms) @ G], [Gt_reg, GtMsG / jw]]
        rhs = [js, (G.T @ js) / jw]
        node_fixed = phi_fixed
    singular = _gradient_nullspace_nodes(ops, part, exc, M_hat)
    return _assemble(ident, ops, exc, blocks, rhs, part, node_fixed, is_symmetric=False, expected_singular=singular, omega=w)


def fd_symmetric_full_continuity(ops: OperatorSet, mat: MaterialField | None, exc: Excitation, omega: float) -> AssembledSystem:
    """Darwin-Ampere plus the frequency-domain full Maxwell continuity equation."""
    w = _check_omega(omega)
    return _combined(ops, exc, 1j * w, w, "symmetric")


def fd_dd_combined_gauge(
    ops: OperatorSet,
    mat: MaterialField | None,
    exc: Excitation,
    omega: float,
    beta: complex | None = None,
) -> AssembledSystem:
    """Darwin-Ampere plus the combined MQS/Gauss gauge with weight kappa + beta*eps.

    The time derivative in both equations is represented by ``beta``
    (default ``j omega``); a real ``beta`` gives the time-stepping form.
    The gauge row is divided by ``beta``, so a nodal charge ``rho_s``
    contributes ``rho_s`` to the reduced right-hand side (``beta*rho_s``
    before scaling).
    """
    w = _check_omega(omega)
    beta = 1j * w if beta is None else complex(beta)
    if beta == 0:
        raise StaticLimitError("beta must be non-zero")
    return _combined(ops, exc, beta, w, "dd-combined", charge=True)


def _combined(ops, exc, s, omega, ident, charge=False, dt=None) -> AssembledSystem:
    G = ops.G
    K = ops.curlcurl()
    Mk, Me = ops.M_kappa, ops.M_eps
    Msb = Mk + s * Me
    js = exc.edge_currents(ops.grid.n_edges)
    MsbG = _diag(Msb) @ G
    blocks = [[K + _diag(s * Mk), MsbG], [MsbG.T, (G.T @ MsbG) / s]]
    rhs2 = (G.T @ js) / s
    if charge:
        rhs2 = rhs2 + exc.node_charges(ops.grid.n_nodes)
    part = make_partition(ops, exc)
    singular = _gradient_nullspace_nodes(ops, part, exc, Me)
    return _assemble(
        ident, ops, exc, blocks, [js, rhs2], part, exc.node_values(ops.grid.n_nodes),
        is_symmetric=True, expected_singular=singular, omega=omega, dt=dt,
    )


def default_gauge_matrix(ops: OperatorSet, exc: Excitation, omega: float, scale: float = 1.0) -> np.ndarray:
    """Diagonal N for the Lagrange / grad-div forms, one entry per gauge node.

    N0[n] = omega^2 * mean of M_eps[e]^2 over edges incident to n, rescaled so
    the largest diagonal entry of the grad-div term equals the largest
    diagonal entry of the curl-curl matrix (times ``1/scale``).
    """
    w = _check_omega(omega)
    nodes = gauge_nodes(ops, exc)
    if nodes.size == 0:
        return np.empty(0)
    absG = abs(ops.G).tocsc()[:, nodes]
    Me = ops.M_eps
    deg = np.asarray(absG.sum(axis=0)).ravel()
    N0 = w**2 * (absG.T @ Me**2) / deg
    if np.any(N0 <= 0):
        raise ValueError("gauge nodes without permittivity: supply N explicitly")
    Gg = ops.G[:, nodes]
    td = w**2 * Me**2 * (Gg.multiply(Gg) @ (1.0 / N0))
    free = ~ops.grid.boundary_edges()
    kd = ops.curlcurl().diagonal()
    s = td[free].max() / kd[free].max()
    return s * N0 / scale


def _gauge_inputs(ops, exc, omega, N):
    nodes = gauge_nodes(ops, exc)
    if N is None:
        N = default_gauge_matrix(ops, exc, omega)
    if sp.issparse(N):
        N = N.tocsr()
        if N.shape != (nodes.size, nodes.size):
            raise ValueError(f"N must be {nodes.size}x{nodes.size}")
        if abs(N - N.T).max() if N.nnz else 0:
            raise ValueError("N must be symmetric")
        return nodes, N
    N = np.asarray(N, dtype=float)
    if N.ndim == 0:
        N = np.full(nodes.size, float(N))
    if N.shape != (nodes.size,):
        raise ValueError(f"N must have one entry per gauge node ({nodes.size})")
    return nodes, N


def fd_lagrange_coulomb(
    ops: OperatorSet, mat: MaterialField | None, exc: Excitation, omega: float, N=None
) -> AssembledSystem:
    """Symmetric form with the eps-Coulomb gauge enforced by Lagrange multipliers.

    ``N`` is a diagonal (1-D array or scalar) or a sparse symmetric matrix over
    the gauge nodes; zero reproduces the classical saddle-point system.
    """
    w = _check_omega(omega)
    jw = 1j * w
    nodes, N = _gauge_inputs(ops, exc, omega, N)
    G = ops.G
    K = ops.curlcurl()
    Mk, Me = ops.M_kappa, ops.M_eps
    Ms = Mk + jw * Me
    js = exc.edge_currents(ops.grid.n_edges)
    MsG = _diag(Ms) @ G
    MeGg = jw * (_diag(Me) @ G[:, nodes])
    Nm = N if sp.issparse(N) else _diag(N)
    n_nodes = ops.grid.n_nodes
    blocks = [
        [K + _diag(jw * Mk), MsG, MeGg],
        [MsG.T, (G.T @ MsG) / jw, sp.csr_matrix((n_nodes, nodes.size))],
        [MeGg.T, sp.csr_matrix((nodes.size, n_nodes)), Nm],
    ]
    rhs = [js, (G.T @ js) / jw, np.zeros(nodes.size)]
    part = make_partition(ops, exc, with_gamma=True)
    return _assemble(
        "lagrange", ops, exc, blocks, rhs, part, exc.node_values(n_nodes),
        is_symmetric=True, expected_singular=False, omega=w,
    )


def graddiv_term(ops: OperatorSet, exc: Excitation, omega: float, N) -> sp.csr_matrix:
    """omega^2 M_eps G N^-1 G^T M_eps over the gauge nodes (full edge size)."""
    nodes, N = _gauge_inputs(ops, exc, omega, N)
    if sp.issparse(N):
        Nd = N.diagonal()
        if abs(N - sp.diags(Nd)).max() if N.nnz else 0:
            raise ValueError("the grad-div form needs a diagonal N")
        N = Nd
    if np.any(N <= 0):
        raise ValueError("the grad-div form needs a positive definite N")
    MeGg = _diag(ops.M_eps) @ ops.G[:, nodes]
    T = omega**2 * (MeGg @ _diag(1.0 / N) @ MeGg.T)
    # the sparse triple product is symmetric only up to round-off
    return (0.5 * (T + T.T)).tocsr()


def fd_graddiv_schur(ops: OperatorSet, mat: MaterialField | None, exc: Excitation, omega: float, N=None) -> AssembledSystem:
    """Schur complement of the Lagrange form: grad-div augmented curl-curl block."""
    w = _check_omega(omega)
    jw = 1j * w
    G = ops.G
    Kgd = ops.curlcurl() + graddiv_term(ops, exc, w, N)
    Mk, Me = ops.M_kappa, ops.M_eps
    Ms = Mk + jw * Me
    js = exc.edge_currents(ops.grid.n_edges)
    MsG = _diag(Ms) @ G
    blocks = [[Kgd + _diag(jw * Mk), MsG], [MsG.T, (G.T @ MsG) / jw]]
    part = make_partition(ops, exc)
    return _assemble(
        "graddiv", ops, exc, blocks, [js, (G.T @ js) / jw], part, exc.node_values(ops.grid.n_nodes),
        is_symmetric=True, expected_singular=False, omega=w,
    )


def fd_eqs_gauge(
    ops: OperatorSet, mat: MaterialField | None, exc: Excitation, omega: float, kappa_hat: float | None = None
) -> AssembledSystem:
    """Two-step Darwin (TSD) system: EQS continuity gauge, block upper-triangular.

    The curl-curl block carries kappa in conductors and ``kappa_hat`` in
    non-conductive cells (default: the material field's value).
    """
    if kappa_hat is None:
        M_reg = ops.M_kappa_eqs
    else:
        if mat is None:
            raise ValueError("an explicit kappa_hat needs the material field")
        M_reg = ops.edge_hodge(mat.with_kappa_hat(kappa_hat).kappa_conductor_plus_hat())
    w = _check_omega(omega)
    part = make_partition(ops, exc)
    singular = _gradient_nullspace_nodes(ops, part, exc, M_reg)
    return _two_step(ops, exc, w, 1j * w * M_reg, "eqs-gauge", singular)


def fd_full_maxwell_two_step(ops: OperatorSet, mat: MaterialField | None, exc: Excitation, omega: float) -> AssembledSystem:
    """Two-step full Maxwell (TSM) reference: curl-curl block keeps -omega^2 M_eps."""
    w = _check_omega(omega)
    Ms = ops.M_kappa + 1j * w * ops.M_eps
    return _two_step(ops, exc, w, 1j * w * Ms, "tsm", False)


def _two_step(ops, exc, w, mass, ident, singular) -> AssembledSystem:
    G = ops.G
    Ms = ops.M_kappa + 1j * w * ops.M_eps
    js = exc.edge_currents(ops.grid.n_edges)
    MsG = _diag(Ms) @ G
    n_nodes = ops.grid.n_nodes
    blocks = [[ops.curlcurl() + _diag(mass), MsG], [sp.csr_matrix((n_nodes, ops.grid.n_edges)), G.T @ MsG]]
    part = make_partition(ops, exc)
    return _assemble(
        ident, ops, exc, blocks, [js, G.T @ js], part, exc.node_values(n_nodes),
        is_symmetric=False, expected_singular=singular, block_triangular=True, omega=w,
    )


# --------------------------------------------------------------------------- time domain

RhsBuilder = Callable[..., np.ndarray]


def td_symmetric_step(
    ops: OperatorSet, mat: MaterialField | None, exc: Excitation, dt: float, gamma: float = 1.0
) -> tuple[AssembledSystem, RhsBuilder]:
    """Constant step matrix and right-hand-side builder of the symmetric one-step scheme.

    With beta = gamma/dt the time derivative of ``a`` and ``phi`` is replaced by
    ``beta * (x^{n+1} - x^n)`` (implicit Euler for gamma = 1) in the
    Darwin-Ampere equation and in the semi-discrete continuity equation; the
    continuity row is divided by beta.

    The builder is called as ``rhs(a_n, phi_n, js_next=None, terminals=None)``
    with full-length ``a_n``/``phi_n``; ``terminals`` is ``(phi_S, phi_G)`` at
    the new time level (defaults to the excitation's values).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    beta = gamma / dt
    system = _combined(ops, exc, beta, None, "td-symmetric", dt=dt)
    system = AssembledSystem(
        system.formulation, system.matrix.real.tocsr(), system.rhs, system.partition, system.fixed_values,
        True, system.expected_singular, False, None, dt,
    )
    G = ops.G
    Mk, Me = ops.M_kappa, ops.M_eps
    Msb = Mk + beta * Me
    n_edges, n_nodes = ops.grid.n_edges, ops.grid.n_nodes
    part = system.partition
    free = part.free_full_index()
    fixed_idx = part.fixed_full_index()
    full = sp.bmat([[ops.curlcurl() + _diag(beta * Mk), _diag(Msb) @ G], [G.T @ _diag(Msb), (G.T @ _diag(Msb) @ G) / beta]], format="csr")
    A_fd = full[free, :][:, fixed_idx]

    def rhs(a_n, phi_n, js_next=None, terminals=None) -> np.ndarray:
        js = np.zeros(n_edges) if js_next is None else np.asarray(js_next)
        Gphi = G @ phi_n
        r1 = js + beta * (Mk * a_n) + beta * (Me * Gphi)
        r2 = (G.T @ js) / beta + G.T @ (Msb * a_n) + G.T @ (Me * Gphi)
        rhs_full = np.concatenate([r1, r2])
        if terminals is None:
            fixed = system.fixed_values
        else:
            fixed = np.concatenate([np.zeros(n_edges), exc.with_potentials(*terminals).node_values(n_nodes)])
        b = rhs_full[free] - A_fd @ fixed[fixed_idx]
        if np.iscomplexobj(b) and not np.any(b.imag):
            b = b.real
        return b

    return system, rhs


# --------------------------------------------------------------------------- dispatch


def assemble(ident: str, ops: OperatorSet, mat: MaterialField | None, exc: Excitation, omega: float, **options) -> AssembledSystem:
    """Assemble a frequency-domain formulation by its id."""
    if ident == "monolithic":
        return fd_monolithic_darwin(ops, mat, exc, omega)
    if ident == "regularized":
        return fd_darwin_regularized(ops, mat, exc, omega, options.get("kappa_hat"))
    if ident == "regularized-psi":
        return fd_darwin_regularized(ops, mat, exc, omega, options.get("kappa_hat"), scaled_psi=True)
    if ident == "symmetric":
        return fd_symmetric_full_continuity(ops, mat, exc, omega)
    if ident == "lagrange":
        return fd_lagrange_coulomb(ops, mat, exc, omega, options.get("N"))
    if ident == "graddiv":
        return fd_graddiv_schur(ops, mat, exc, omega, options.get("N"))
    if ident == "eqs-gauge":
        return fd_eqs_gauge(ops, mat, exc, omega, options.get("kappa_hat"))
    if ident == "tsm":
        return fd_full_maxwell_two_step(ops, mat, exc, omega)
    if ident == "dd-combined":
        return fd_dd_combined_gauge(ops, mat, exc, omega, options.get("beta"))
    if ident == "td-symmetric":
        raise ValueError("td-symmetric is a time-domain formulation; use td_symmetric_step")
    raise ValueError(f"unknown formulation {ident!r}; expected one of {FORMULATIONS}")
