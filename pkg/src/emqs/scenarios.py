"""Scenario files, the run pipeline and its reports."""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .fields import FieldSolution, compare_fields, export_fields, fields_from_potentials, reconstruct_fields
from .formulations import FORMULATIONS, AssembledSystem, Excitation, StaticLimitError, assemble, default_gauge_matrix
from .grid import Grid, GridSpec, build_grid
from .materials import C0, VOID, KappaHatPolicy, MaterialBox, MaterialField, build_material_field
from .operators import OperatorSet, build_operators
from .solvers import SingularMatrix, SolverError, solve

logger = logging.getLogger(__name__)

BUILTINS = ("coil", "transformer_toy", "mini")
REFERENCE = "tsm"
_TOL = 1e-9  # relative geometric tolerance for terminal boxes


class ScenarioError(ValueError):
    """Invalid scenario; ``path`` names the offending key."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class TimeDrive:
    frequency: float
    amplitude: float = 1.0
    steps_per_period: int = 200
    n_periods: int = 10
    check_fd: bool = True


@dataclass(frozen=True)
class Problem:
    grid: Grid
    mat: MaterialField
    ops: OperatorSet
    exc: Excitation


@dataclass(frozen=True)
class Scenario:
    name: str
    grid_spec: GridSpec
    background: MaterialBox
    boxes: tuple[MaterialBox, ...]
    source_box: tuple[tuple, tuple]
    ground_box: tuple[tuple, tuple]
    phi_source: float
    phi_ground: float
    frequencies: tuple[float, ...]
    formulations: tuple[str, ...]
    kappa_hat: KappaHatPolicy = KappaHatPolicy()
    formulation_options: dict = field(default_factory=dict)
    restrict_eps: bool = False
    time_drive: TimeDrive | None = None
    solver: dict = field(default_factory=lambda: {"method": "direct", "tol": 1e-8, "maxiter": None})
    out_dir: str = "out"
    field_formats: tuple[str, ...] = ("vtk", "csv")
    description: str = ""

    def build(self) -> Problem:
        grid = build_grid(self.grid_spec)
        mat = build_material_field(grid, self.background, self.boxes, self.kappa_hat, self.restrict_eps)
        ops = build_operators(grid, mat)
        src = _terminal_nodes(grid, mat, self.source_box, "terminals.source")
        gnd = _terminal_nodes(grid, mat, self.ground_box, "terminals.ground")
        if np.intersect1d(src, gnd).size:
            raise ScenarioError("source and ground terminals overlap", "terminals")
        return Problem(grid, mat, ops, Excitation(src, gnd, self.phi_source, self.phi_ground))

    def options_for(self, ident: str, problem: Problem | None = None, omega: float | None = None) -> dict:
        opts = dict(self.formulation_options.get(ident, {}))
        scale = opts.pop("N_scale", None)
        if scale is not None and problem is not None and omega is not None:
            opts["N"] = default_gauge_matrix(problem.ops, problem.exc, omega, scale)
        return opts

    def wavelength_check(self) -> bool:
        """Warn (and return False) if the domain diagonal exceeds a tenth of the
        shortest wavelength in the scenario."""
        freqs = list(self.frequencies) + ([self.time_drive.frequency] if self.time_drive else [])
        if not freqs:
            return True
        hx, hy, hz = self.grid_spec.spacings()
        size = float(np.linalg.norm([hx.sum(), hy.sum(), hz.sum()]))
        lam = C0 / max(freqs)
        if size > lam / 10:
            logger.warning("domain size %.3g m exceeds lambda/10 = %.3g m: quasistatic assumptions are doubtful", size, lam / 10)
            return False
        return True


# --------------------------------------------------------------------------- parsing


def _schema() -> dict:
    return json.loads(resources.files("emqs.data").joinpath("scenario.schema.json").read_text())


def _key_path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = err.message.split("'")[1] if "'" in err.message else ""
        parts.append(missing)
    return ".".join(parts) or "<root>"


def parse_scenario(text: str | dict) -> Scenario:
    """Validate a scenario document (JSON text or a decoded dict)."""
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as err:
            raise ScenarioError(f"invalid JSON: {err}") from err
    else:
        doc = text
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(list(e.absolute_path)), str(list(e.absolute_path))))
    if errors:
        err = errors[0]
        raise ScenarioError(err.message, _key_path(err))

    g = doc["grid"]
    spec = GridSpec(*g["cells"], *g["spacing"], origin=tuple(g.get("origin", (0.0, 0.0, 0.0))))
    try:
        hx, hy, hz = spec.spacings()
    except ValueError as err:
        raise ScenarioError(str(err), "grid.spacing") from err
    lo_dom = np.asarray(spec.origin, float)
    hi_dom = lo_dom + np.array([hx.sum(), hy.sum(), hz.sum()])

    bg = doc.get("background", {})
    background = MaterialBox(VOID.lo, VOID.hi, bg.get("kappa", 0.0), bg.get("eps_r", 1.0), bg.get("mu_r", 1.0), bg.get("tag", "void"))
    boxes = []
    for n, b in enumerate(doc.get("materials", [])):
        path = f"materials.{n}"
        try:
            box = MaterialBox(tuple(b["lo"]), tuple(b["hi"]), b.get("kappa", 0.0), b.get("eps_r", 1.0), b.get("mu_r", 1.0), b.get("tag", f"box{n}"))
        except ValueError as err:
            raise ScenarioError(str(err), path) from err
        if np.any(np.asarray(box.hi) <= lo_dom) or np.any(np.asarray(box.lo) >= hi_dom):
            raise ScenarioError("box lies entirely outside the domain", path)
        boxes.append(box)

    t = doc["terminals"]
    term = {}
    for key in ("source", "ground"):
        lo, hi = np.asarray(t[key]["lo"], float), np.asarray(t[key]["hi"], float)
        if np.any(lo > hi):
            raise ScenarioError("lo must not exceed hi", f"terminals.{key}")
        tol = _TOL * float(np.max(hi_dom - lo_dom))
        if np.any(lo < lo_dom - tol) or np.any(hi > hi_dom + tol):
            raise ScenarioError("terminal box outside the domain", f"terminals.{key}")
        term[key] = (tuple(lo), tuple(hi))

    forms = tuple(doc["formulations"])
    freqs = tuple(float(f) for f in doc.get("frequencies", ()))
    td = doc.get("time_domain")
    fd_forms = [f for f in forms if f != "td-symmetric"]
    if fd_forms and not freqs:
        raise ScenarioError("frequency-domain formulations need a frequency list", "frequencies")
    if "td-symmetric" in forms and td is None:
        raise ScenarioError("td-symmetric needs a time_domain block", "time_domain")

    kh = doc.get("kappa_hat", {})
    solver = {"method": "direct", "tol": 1e-8, "maxiter": None}
    solver.update(doc.get("solver", {}))
    out = doc.get("output", {})
    return Scenario(
        name=doc["name"],
        grid_spec=spec,
        background=background,
        boxes=tuple(boxes),
        source_box=term["source"],
        ground_box=term["ground"],
        phi_source=float(t["phi_source"]),
        phi_ground=float(t.get("phi_ground", 0.0)),
        frequencies=freqs,
        formulations=forms,
        kappa_hat=KappaHatPolicy(kh.get("value"), kh.get("placement", "everywhere"), kh.get("ratio", 1e-4)),
        formulation_options={k: dict(v) for k, v in doc.get("formulation_options", {}).items()},
        restrict_eps=bool(doc.get("restrict_eps", False)),
        time_drive=TimeDrive(**td) if td else None,
        solver=solver,
        out_dir=out.get("dir", "out"),
        field_formats=tuple(out.get("fields", ("vtk", "csv"))),
        description=doc.get("description", ""),
    )


def load_scenario(path_or_name) -> Scenario:
    """Load a scenario file, or a built-in by name (``coil``, ``coil.json``...)."""
    p = Path(path_or_name)
    if p.exists():
        return parse_scenario(p.read_text())
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    if stem in BUILTINS:
        return parse_scenario(builtin_text(stem))
    raise FileNotFoundError(f"no scenario file or built-in named {path_or_name!r}")


def builtin_text(name: str) -> str:
    return resources.files("emqs.data").joinpath(f"{name}.json").read_text()


def _terminal_nodes(grid: Grid, mat: MaterialField, box, path: str) -> np.ndarray:
    xyz = grid.node_coords()
    lo, hi = np.asarray(box[0]), np.asarray(box[1])
    tol = _TOL * float(grid.extent.max())
    nodes = np.flatnonzero(np.all((xyz >= lo - tol) & (xyz <= hi + tol), axis=1))
    if nodes.size == 0:
        raise ScenarioError("terminal box contains no grid node", path)
    if not np.all(grid.boundary_nodes()[nodes]):
        raise ScenarioError("terminal nodes must lie on the domain boundary", path)
    # node touches a conductive cell
    cells = _node_cells(grid, nodes)
    if not np.any(mat.is_conductive[cells]):
        raise ScenarioError("terminal does not touch a conductor", path)
    return nodes


def _node_cells(grid: Grid, nodes: np.ndarray) -> np.ndarray:
    _, i, j, k = grid.unindex("node", nodes)
    n = grid.shape
    out = []
    for di in (-1, 0):
        for dj in (-1, 0):
            for dk in (-1, 0):
                ci, cj, ck = i + di, j + dj, k + dk
                ok = (ci >= 0) & (ci < n[0]) & (cj >= 0) & (cj < n[1]) & (ck >= 0) & (ck < n[2])
                out.append(np.ravel_multi_index((ci[ok], cj[ok], ck[ok]), n, order="F"))
    return np.unique(np.concatenate(out))


# --------------------------------------------------------------------------- pipeline


@dataclass
class RunRecord:
    formulation: str
    frequency: float
    status: str  # ok | expected-singular | failed
    n_dofs: int = 0
    method: str = ""
    residual: float = float("nan")
    iterations: int = 0
    message: str = ""
    wall_time: float = 0.0
    fields: FieldSolution | None = None
    files: list = field(default_factory=list)


@dataclass
class RunResult:
    scenario: Scenario
    records: list
    comparisons: list  # (formulation, frequency, ComparisonReport)
    consistency: object | None
    files: list

    @property
    def exit_status(self) -> int:
        return 1 if any(r.status == "failed" for r in self.records) else 0


def freq_label(f: float) -> str:
    f = float(f"{float(f):.12g}")
    return str(int(f)) if f.is_integer() else repr(f)


def _solve_one(sc: Scenario, problem: Problem, ident: str, f: float, method: str, tol: float, maxiter) -> tuple[RunRecord, AssembledSystem | None]:
    w = 2 * np.pi * f
    t0 = time.perf_counter()
    system = None
    try:
        system = assemble(ident, problem.ops, problem.mat, problem.exc, w, **sc.options_for(ident, problem, w))
        kw = {"tol": tol, "maxiter": maxiter} if method == "iterative" else {}
        x, rep = solve(system, method, **kw)
        fs = reconstruct_fields(system, x, problem.ops)
        return RunRecord(ident, f, "ok", system.partition.n_dofs, rep.method, rep.residual, rep.iterations,
                         wall_time=time.perf_counter() - t0, fields=fs), system
    except (SolverError, StaticLimitError, ValueError) as err:
        expected = system is not None and system.expected_singular and isinstance(err, SingularMatrix)
        status = "expected-singular" if expected else "failed"
        n = system.partition.n_dofs if system is not None else 0
        return RunRecord(ident, f, status, n, method, message=str(err), wall_time=time.perf_counter() - t0), system


def run_scenario(sc: Scenario, out_dir=None, method: str | None = None, tol: float | None = None, kappa_hat: float | None = None, write: bool = True) -> RunResult:
    """Assemble, solve, reconstruct and export every formulation x frequency.

    With ``tsm`` in the list every other frequency-domain result is compared
    against it. Failures are recorded per formulation and the run continues.
    """
    if kappa_hat is not None:
        sc = override_kappa_hat(sc, kappa_hat)
    sc.wavelength_check()
    problem = sc.build()
    method = method or sc.solver["method"]
    tol = tol or sc.solver["tol"]
    out = Path(out_dir or sc.out_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)
    records: list[RunRecord] = []
    comparisons = []
    files: list[Path] = []
    fd = [f for f in sc.formulations if f != "td-symmetric"]
    for f in sc.frequencies:
        ref = None
        batch = []
        for ident in fd:
            rec, _ = _solve_one(sc, problem, ident, f, method, tol, sc.solver.get("maxiter"))
            logger.info("%s %s @ %s Hz: %s", sc.name, ident, freq_label(f), rec.status)
            batch.append(rec)
            if ident == REFERENCE and rec.status == "ok":
                ref = rec.fields
        for rec in batch:
            if rec.fields is not None and write:
                stem = out / f"{sc.name}_{rec.formulation}_{freq_label(f)}"
                for fmt in sc.field_formats:
                    rec.files.append(export_fields(rec.fields, stem.with_suffix("." + fmt)))
                files += rec.files
            if ref is not None and rec.fields is not None and rec.formulation != REFERENCE:
                comparisons.append((rec.formulation, f, compare_fields(rec.fields, ref)))
        records += batch
    consistency = None
    if "td-symmetric" in sc.formulations and sc.time_drive is not None:
        rec, consistency, fs = _run_td(sc, problem)
        records.append(rec)
        if fs is not None and write:
            stem = out / f"{sc.name}_td-symmetric_{freq_label(sc.time_drive.frequency)}"
            for fmt in sc.field_formats:
                rec.files.append(export_fields(fs, stem.with_suffix("." + fmt)))
            files += rec.files
    result = RunResult(sc, records, comparisons, consistency, files)
    if write:
        files += write_reports(result, out)
    return result


def _run_td(sc: Scenario, problem: Problem):
    from .oracle import td_fd_consistency, td_march

    d = sc.time_drive
    w = 2 * np.pi * d.frequency
    dt = 2 * np.pi / w / d.steps_per_period
    n = d.steps_per_period * d.n_periods
    t0 = time.perf_counter()
    try:
        tr = td_march(problem, dt, n, lambda t: (d.amplitude * np.sin(w * t), sc.phi_ground), record=(n - 1, n))
        da = (tr.a[1] - tr.a[0]) / dt
        fs = fields_from_potentials(problem.ops, tr.a[1], tr.phi[1], da_dt=da, time=float(tr.times[1]))
        cons = None
        if d.check_fd:
            cons = td_fd_consistency(problem, w, d.amplitude, d.steps_per_period, d.n_periods)
        p = problem.grid.n_edges + problem.grid.n_nodes
        rec = RunRecord("td-symmetric", d.frequency, "ok", p, "direct", wall_time=time.perf_counter() - t0, fields=fs)
        return rec, cons, fs
    except (SolverError, ValueError) as err:
        return RunRecord("td-symmetric", d.frequency, "failed", message=str(err), wall_time=time.perf_counter() - t0), None, None


def override_kappa_hat(sc: Scenario, value: float) -> Scenario:
    from dataclasses import replace

    opts = {k: dict(v) for k, v in sc.formulation_options.items()}
    for ident in ("regularized", "regularized-psi", "eqs-gauge"):
        opts.setdefault(ident, {})["kappa_hat"] = value
    return replace(sc, kappa_hat=KappaHatPolicy(value, sc.kappa_hat.placement), formulation_options=opts)


SUMMARY_COLUMNS = ["formulation", "frequency_hz", "status", "n_dofs", "method", "residual", "iterations",
                   "B_max_rel", "B_mean_rel", "E_max_rel", "E_mean_rel", "message"]
COMPARISON_COLUMNS = ["formulation", "frequency_hz", "quantity", "part", "max_rel", "mean_rel", "argmax_cell", "x", "y", "z"]


def _num(v) -> str:
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else repr(float(v))


def write_reports(result: RunResult, out: Path) -> list[Path]:
    """Summary and comparison CSVs (deterministic: no timings) plus a text table."""
    sc = result.scenario
    comp = {(c[0], c[1]): c[2] for c in result.comparisons}
    summary = out / f"{sc.name}_summary.csv"
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in result.records:
            rep = comp.get((r.formulation, r.frequency))
            stats = []
            for q in ("B", "E"):
                s = rep.get(q, "complex") if rep else None
                stats += [_num(s.max_rel if s else None), _num(s.mean_rel if s else None)]
            w.writerow([r.formulation, freq_label(r.frequency), r.status, r.n_dofs, r.method, _num(r.residual), r.iterations, *stats, r.message])
    paths = [summary]
    if result.comparisons:
        cpath = out / f"{sc.name}_comparison.csv"
        with open(cpath, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(COMPARISON_COLUMNS)
            for ident, f, rep in result.comparisons:
                for row in rep.rows():
                    w.writerow([ident, freq_label(f), row["quantity"], row["part"], _num(row["max_rel"]), _num(row["mean_rel"]),
                                row["argmax_cell"], _num(row["x"]), _num(row["y"]), _num(row["z"])])
        paths.append(cpath)
    if result.consistency is not None:
        c = result.consistency
        tpath = out / f"{sc.name}_td_consistency.csv"
        with open(tpath, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["frequency_hz", "dt", "n_periods", "amplitude_error", "phase_error_deg", "fit_residual", "transient_flag", "n_dofs"])
            w.writerow([freq_label(c.omega / (2 * np.pi)), _num(c.dt), c.n_periods, _num(c.amplitude_error), _num(c.phase_error_deg),
                        _num(c.fit_residual), c.transient_flag, c.n_dofs])
        paths.append(tpath)
    txt = out / f"{sc.name}_summary.txt"
    txt.write_text(format_table(result))
    paths.append(txt)
    return paths


def format_table(result: RunResult) -> str:
    comp = {(c[0], c[1]): c[2] for c in result.comparisons}
    head = f"{'formulation':<16}{'f [Hz]':>12}  {'status':<18}{'dofs':>7}  {'residual':>10}  {'B diff':>10}  {'E diff':>10}  {'time [s]':>8}"
    lines = [f"scenario {result.scenario.name}", head, "-" * len(head)]
    for r in result.records:
        rep = comp.get((r.formulation, r.frequency))
        b = f"{rep.max_rel('B'):.2e}" if rep else "-"
        e = f"{rep.max_rel('E'):.2e}" if rep else "-"
        res = f"{r.residual:.2e}" if np.isfinite(r.residual) else "-"
        lines.append(f"{r.formulation:<16}{freq_label(r.frequency):>12}  {r.status:<18}{r.n_dofs:>7}  {res:>10}  {b:>10}  {e:>10}  {r.wall_time:>8.2f}")
        if r.message:
            lines.append(f"    {r.message}")
    if result.consistency is not None:
        c = result.consistency
        lines.append(f"TD/FD consistency: amplitude {c.amplitude_error:.2e}, phase {c.phase_error_deg:.2e} deg, fit residual {c.fit_residual:.1e}")
    return "\n".join(lines) + "\n"


__all__ = [
    "BUILTINS", "FORMULATIONS", "Problem", "RunRecord", "RunResult", "Scenario", "ScenarioError", "TimeDrive",
    "builtin_text", "format_table", "override_kappa_hat", "freq_label", "load_scenario", "parse_scenario", "run_scenario", "write_reports",
]
