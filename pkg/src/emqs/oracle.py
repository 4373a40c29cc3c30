"""Dense verification harness for tiny grids: rank, symmetry, conditioning,
gauge residuals and time/frequency-domain consistency."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .formulations import AssembledSystem, Excitation, assemble, gauge_nodes, td_symmetric_step
from .solvers import EPS, equilibrate, factorize, refine, solve_direct

RANK_FACTOR = 64
MAX_DOFS = 3000
GAUGE_KINDS = ("coulomb-kappa-hat", "coulomb-eps", "mqs-kappa")


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class DiagnosticsReport:
    matrix_id: str
    dim: int
    rank: int
    nullity: int
    symmetry_defect: float
    condition: float
    """2-norm condition number of the equilibrated matrix (inf only for an exactly zero singular value)."""
    condition_raw: float
    smin: float
    smax: float


def _dense(system) -> tuple[str, np.ndarray]:
    if isinstance(system, AssembledSystem):
        return system.formulation, system.matrix.toarray()
    return "matrix", (system.toarray() if sp.issparse(system) else np.asarray(system))


def dense_diagnostics(system, max_dofs: int = MAX_DOFS, rank_factor: float = RANK_FACTOR, scale: bool = True) -> DiagnosticsReport:
    """Dense SVD diagnostics.

    Rank uses the threshold ``smax * dim * eps * rank_factor``. With ``scale``
    (default) the singular values are those of the Ruiz-equilibrated matrix:
    entries of these systems span dozens of decades, so raw singular values
    only reflect unit choices. Diagonal scaling does not change the rank.
    """
    ident, A = _dense(system)
    n = A.shape[0]
    if n > max_dofs:
        raise TooLarge(f"{ident}: dimension {n} exceeds max_dofs={max_dofs}")
    defect = float(np.max(np.abs(A - A.T))) if n else 0.0
    sv_raw = np.linalg.svd(A, compute_uv=False)
    if scale:
        dr, dc = equilibrate(sp.csr_matrix(A))
        As = dr[:, None] * A * dc[None, :]
        sv = np.linalg.svd(As, compute_uv=False)
    else:
        sv = sv_raw
    thr = sv[0] * n * EPS * rank_factor if n else 0.0
    rank = int(np.sum(sv > thr))
    cond = float(sv[0] / sv[-1]) if n and sv[-1] > 0 else np.inf
    cond_raw = float(sv_raw[0] / sv_raw[-1]) if n and sv_raw[-1] > 0 else np.inf
    return DiagnosticsReport(ident, n, rank, n - rank, defect, cond, cond_raw, float(sv[-1]) if n else 0.0, float(sv[0]) if n else 0.0)


@dataclass(frozen=True)
class SweepRow:
    omega: float
    condition: float
    condition_raw: float


@dataclass(frozen=True)
class SweepTable:
    formulation: str
    rows: tuple[SweepRow, ...]
    monotone: bool | None
    """True if the equilibrated condition number grows as omega decreases; None for fewer than 2 points."""


def condition_sweep(formulation: str, problem, omegas, max_dofs: int = MAX_DOFS, **options) -> SweepTable:
    """Raw and equilibrated dense condition numbers over a list of angular frequencies.

    ``problem`` is anything with ``ops``, ``mat`` and ``exc`` attributes.
    The trend check uses the equilibrated condition number: the raw one is
    dominated by the unit scaling of the blocks (conductivities next to
    permittivities) and barely moves with omega.
    """
    rows = []
    for w in omegas:
        rep = dense_diagnostics(assemble(formulation, problem.ops, problem.mat, problem.exc, w, **options), max_dofs)
        rows.append(SweepRow(float(w), rep.condition, rep.condition_raw))
    monotone = None
    if len(rows) >= 2:
        ordered = sorted(rows, key=lambda r: -r.omega)
        monotone = all(b.condition > a.condition for a, b in zip(ordered, ordered[1:]))
    return SweepTable(formulation, tuple(rows), monotone)


def _gauge_weight(ops, kind: str, weight=None) -> np.ndarray:
    if weight is not None:
        return np.asarray(weight, float)
    if kind == "coulomb-kappa-hat":
        return ops.M_kappa_hat
    if kind == "coulomb-eps":
        return ops.M_eps
    if kind == "mqs-kappa":
        return ops.M_kappa
    raise ValueError(f"gauge kind must be one of {GAUGE_KINDS}")


def conductor_adjacent_nodes(ops, exc: Excitation) -> np.ndarray:
    """Gauge nodes touching at least one conductive edge."""
    nodes = gauge_nodes(ops, exc)
    touched = abs(ops.G.T) @ (ops.M_kappa > 0).astype(float)
    return nodes[touched[nodes] > 0]


def gauge_residual(a: np.ndarray, omega: float, ops, kind: str, nodes=None, weight=None) -> float:
    """||G^T M (j omega a)|| / (||G^T M||_F ||j omega a||) over ``nodes``.

    ``nodes`` defaults to all interior nodes; the gauges are only implied
    there. ``weight`` overrides the edge Hodge diagonal of the selected kind.
    """
    M = _gauge_weight(ops, kind, weight)
    if nodes is None:
        nodes = np.flatnonzero(~ops.grid.boundary_nodes())
    GtM = (ops.G.T @ sp.diags(M)).tocsr()[np.asarray(nodes, dtype=int)]
    v = 1j * omega * np.asarray(a)
    nv = np.linalg.norm(v)
    nG = sp.linalg.norm(GtM) if GtM.nnz else 0.0
    if nv == 0 or nG == 0:
        return 0.0
    return float(np.linalg.norm(GtM @ v) / (nG * nv))


# --------------------------------------------------------------------------- time domain


@dataclass
class TDTrace:
    times: np.ndarray
    a: np.ndarray  # (n_records, n_edges)
    phi: np.ndarray  # (n_records, n_nodes)


def td_march(problem, dt: float, n_steps: int, drive, a0=None, phi0=None, record=None, gamma: float = 1.0, js=None, refine_steps: int = 1) -> TDTrace:
    """Implicit time stepping of the symmetric scheme with one factorization.

    Each step gets ``refine_steps`` of extended-precision refinement; without
    it round-off accumulates in the conserved eps-weighted divergence.

    ``drive(t)`` returns the terminal potentials ``(phi_S, phi_G)`` at time t;
    ``js(t)`` optionally returns impressed edge currents. ``record`` selects
    the step indices (1..n_steps) kept in the trace; default all.
    """
    ops, exc = problem.ops, problem.exc
    system, rhs = td_symmetric_step(ops, problem.mat, exc, dt, gamma)
    lu = factorize(system.matrix)
    a = np.zeros(ops.grid.n_edges) if a0 is None else np.array(a0, dtype=float)
    phi = np.zeros(ops.grid.n_nodes) if phi0 is None else np.array(phi0, dtype=float)
    keep = set(range(1, n_steps + 1)) if record is None else set(record)
    ts, As, Ps = [], [], []
    p = system.partition
    sa, sn, _ = p.slices()
    for n in range(1, n_steps + 1):
        t = n * dt
        term = drive(t)
        b = rhs(a, phi, None if js is None else js(t), term)
        x = refine(system.matrix, lu, b, lu.solve(b), refine_steps).real
        a = np.zeros(p.n_edges)
        a[p.free_edges] = x[sa]
        phi = exc.with_potentials(*term).node_values(p.n_nodes).real
        phi[p.free_nodes] = x[sn]
        if n in keep:
            ts.append(t)
            As.append(a.copy())
            Ps.append(phi.copy())
    return TDTrace(np.array(ts), np.array(As).reshape(len(ts), -1), np.array(Ps).reshape(len(ts), -1))


@dataclass(frozen=True)
class ConsistencyReport:
    omega: float
    dt: float
    n_periods: int
    amplitude_error: float
    """Max over significant DOFs of | |X_td| - |X_fd| | / |X_fd|."""
    phase_error_deg: float
    fit_residual: float
    transient_flag: bool
    n_dofs: int
    per_dof: dict = field(repr=False, default_factory=dict)


def fit_phasor(times: np.ndarray, samples: np.ndarray, omega: float) -> tuple[np.ndarray, float]:
    """Least-squares fit x(t) = Re(X e^{j omega t}) per column; returns (X, relative residual)."""
    B = np.column_stack([np.cos(omega * times), -np.sin(omega * times)])
    coef, *_ = np.linalg.lstsq(B, samples, rcond=None)
    X = coef[0] + 1j * coef[1]
    fit = B @ coef
    ns = np.linalg.norm(samples)
    res = float(np.linalg.norm(samples - fit) / ns) if ns > 0 else 0.0
    return X, res


def td_fd_consistency(problem, omega: float, amplitude: float = 1.0, steps_per_period: int = 200, n_periods: int = 10, significance: float = 1e-5) -> ConsistencyReport:
    """Drive the source terminal with ``amplitude * sin(omega t)`` and compare the
    last-period phasor of every free DOF with the frequency-domain symmetric
    solution for the phasor ``-j * amplitude``.

    DOFs whose FD magnitude is below ``significance`` times the largest one
    in their block (a or phi) carry no phase information and are skipped.
    """
    T = 2 * np.pi / omega
    dt = T / steps_per_period
    n_steps = steps_per_period * n_periods
    first = n_steps - steps_per_period
    trace = td_march(problem, dt, n_steps, lambda t: (amplitude * np.sin(omega * t), 0.0), record=range(first + 1, n_steps + 1))
    exc_fd = problem.exc.with_potentials(-1j * amplitude, 0.0)
    sys_fd = assemble("symmetric", problem.ops, problem.mat, exc_fd, omega)
    x_fd, _ = solve_direct(sys_fd)
    a_fd, phi_fd = sys_fd.potentials(x_fd)
    p = sys_fd.partition
    X_a, r_a = fit_phasor(trace.times, trace.a[:, p.free_edges], omega)
    X_p, r_p = fit_phasor(trace.times, trace.phi[:, p.free_nodes], omega)
    amp, ph, keep = [], [], 0
    per = {}
    for name, Xt, Xf in (("a", X_a, a_fd[p.free_edges]), ("phi", X_p, phi_fd[p.free_nodes])):
        if Xf.size == 0:
            continue
        mask = np.abs(Xf) > significance * np.abs(Xf).max()
        ea = np.abs(np.abs(Xt[mask]) - np.abs(Xf[mask])) / np.abs(Xf[mask])
        ep = np.abs(np.degrees(np.angle(Xt[mask] / Xf[mask])))
        per[name] = (ea, ep)
        amp.append(ea.max(initial=0.0))
        ph.append(ep.max(initial=0.0))
        keep += int(mask.sum())
    res = max(r_a, r_p)
    return ConsistencyReport(omega, dt, n_periods, float(max(amp)), float(max(ph)), res, res > 0.05, keep, per)


def td_fixed_point(problem, dt: float, n_steps: int, value: float = 1.0) -> float:
    """DC drive: relative change of the state over the last step."""
    tr = td_march(problem, dt, n_steps, lambda t: (value, 0.0), record=(n_steps - 1, n_steps))
    x = np.concatenate([tr.a, tr.phi], axis=1)
    return float(np.linalg.norm(x[1] - x[0]) / max(np.linalg.norm(x[1]), 1e-300))


def resonance_estimate(problem) -> float:
    """Rough LC resonance 1/sqrt(L C) (rad/s) from the dense generalized eigenproblem
    K a = w^2 M_eps a restricted to free edges; a guide for choosing test frequencies."""
    ops = problem.ops
    free = np.flatnonzero(~ops.grid.boundary_edges())
    K = ops.curlcurl()[free][:, free].toarray()
    Me = ops.M_eps[free]
    vals = np.linalg.eigvalsh(K / np.sqrt(np.outer(Me, Me)))
    pos = vals[vals > vals.max() * 1e-10]
    return float(np.sqrt(pos.min())) if pos.size else np.inf
