"""Command line entry point: ``emqs run|verify|sweep|export-matrix``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .formulations import FORMULATIONS, assemble, td_symmetric_step
from .oracle import MAX_DOFS, TooLarge, condition_sweep, conductor_adjacent_nodes, dense_diagnostics, gauge_residual
from .operators import export_matrix_market
from .scenarios import ScenarioError, override_kappa_hat, format_table, freq_label, load_scenario, run_scenario
from .solvers import SolverError, solve

logger = logging.getLogger("emqs")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="emqs", description="FIT solvers for Darwin-type EMQS formulations.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario JSON file or built-in name (coil, transformer_toy, mini)")
        sp.add_argument("--out-dir", help="output directory (default: the scenario's output.dir)")
        sp.add_argument("--kappa-hat", type=float, help="artificial conductivity (S/m) for all kappa-hat formulations")

    r = sub.add_parser("run", help="assemble, solve, export and compare")
    common(r)
    r.add_argument("--solver", choices=("direct", "iterative"))
    r.add_argument("--tol", type=float, help="Krylov tolerance")

    v = sub.add_parser("verify", help="dense diagnostics of every formulation")
    common(v)
    v.add_argument("--max-dofs", type=int, default=MAX_DOFS)

    s = sub.add_parser("sweep", help="condition numbers over a frequency list")
    common(s)
    s.add_argument("--freqs", type=float, nargs="+", required=True, help="frequencies in Hz")
    s.add_argument("--max-dofs", type=int, default=MAX_DOFS)

    e = sub.add_parser("export-matrix", help="write one system matrix in Matrix Market format")
    common(e)
    e.add_argument("--formulation", choices=FORMULATIONS, required=True)
    e.add_argument("--out", required=True, help="target .mtx path")
    e.add_argument("--freq", type=float, help="frequency in Hz (default: first scenario frequency)")
    return p


def _out_dir(args, sc) -> Path:
    out = Path(args.out_dir or sc.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def cmd_run(args, sc) -> int:
    result = run_scenario(sc, out_dir=_out_dir(args, sc), method=args.solver, tol=args.tol)
    sys.stdout.write(format_table(result))
    return result.exit_status


def cmd_verify(args, sc) -> int:
    problem = sc.build()
    f = sc.frequencies[0] if sc.frequencies else sc.time_drive.frequency
    w = 2 * np.pi * f
    header = ["formulation", "dim", "rank", "nullity", "symmetry_defect", "condition", "expected_singular",
              "flag_is_symmetric", "flags_consistent", "gauge_kind", "gauge_residual"]
    rows, bad = [], 0
    for ident in sc.formulations:
        if ident == "td-symmetric":
            d = sc.time_drive
            system, _ = td_symmetric_step(problem.ops, problem.mat, problem.exc, 1.0 / (d.frequency * d.steps_per_period))
        else:
            system = assemble(ident, problem.ops, problem.mat, problem.exc, w, **sc.options_for(ident, problem, w))
        try:
            rep = dense_diagnostics(system, args.max_dofs)
        except TooLarge as err:
            rows.append([ident, system.shape[0], "", "", "", "", system.expected_singular, system.is_symmetric, "skipped", "", ""])
            logger.warning("%s", err)
            continue
        ok = (rep.nullity > 0) == system.expected_singular and (rep.symmetry_defect == 0) == system.is_symmetric
        kind, res = "", ""
        if not system.expected_singular and ident in ("regularized", "regularized-psi", "eqs-gauge"):
            try:
                x, _ = solve(system)
                a, _ = system.potentials(x)
                if ident == "eqs-gauge":
                    kind = "mqs-kappa"
                    res = gauge_residual(a, w, problem.ops, kind, conductor_adjacent_nodes(problem.ops, problem.exc),
                                         weight=problem.ops.M_kappa_eqs if problem.mat.kappa_hat > 0 else None)
                else:
                    kind = "coulomb-kappa-hat"
                    res = gauge_residual(a, w, problem.ops, kind)
                res = repr(res)
            except SolverError as err:
                res = f"solve failed: {err}"
        bad += not ok
        rows.append([ident, rep.dim, rep.rank, rep.nullity, repr(rep.symmetry_defect), repr(rep.condition),
                     system.expected_singular, system.is_symmetric, ok, kind, res])
    path = _out_dir(args, sc) / f"{sc.name}_verify.csv"
    _write_rows(path, header, rows)
    for row in [header] + rows:
        print(",".join(str(c) for c in row))
    return 1 if bad else 0


def cmd_sweep(args, sc) -> int:
    problem = sc.build()
    omegas = [2 * np.pi * f for f in args.freqs]
    rows = []
    for ident in sc.formulations:
        if ident == "td-symmetric":
            continue
        try:
            table = condition_sweep(ident, problem, omegas, args.max_dofs, **sc.options_for(ident))
        except TooLarge as err:
            logger.warning("%s", err)
            continue
        for r in table.rows:
            rows.append([ident, freq_label(r.omega / (2 * np.pi)), repr(r.condition_raw), repr(r.condition), table.monotone])
    header = ["formulation", "frequency_hz", "condition_raw", "condition_equilibrated", "monotone"]
    _write_rows(_out_dir(args, sc) / f"{sc.name}_sweep.csv", header, rows)
    for row in [header] + rows:
        print(",".join(str(c) for c in row))
    return 0


def cmd_export(args, sc) -> int:
    problem = sc.build()
    if args.formulation == "td-symmetric":
        d = sc.time_drive
        if d is None:
            raise ScenarioError("td-symmetric needs a time_domain block", "time_domain")
        system, _ = td_symmetric_step(problem.ops, problem.mat, problem.exc, 1.0 / (d.frequency * d.steps_per_period))
        comment = f"{sc.name} td-symmetric dt={system.dt!r}"
    else:
        f = args.freq or (sc.frequencies[0] if sc.frequencies else None)
        if f is None:
            raise ScenarioError("no frequency given", "frequencies")
        w = 2 * np.pi * f
        system = assemble(args.formulation, problem.ops, problem.mat, problem.exc, w, **sc.options_for(args.formulation, problem, w))
        comment = f"{sc.name} {args.formulation} f={freq_label(f)} Hz"
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    path = export_matrix_market(system.matrix, args.out, comment)
    print(path)
    return 0


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "sweep": cmd_sweep, "export-matrix": cmd_export}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        sc = load_scenario(args.scenario)
        if args.kappa_hat is not None:
            sc = override_kappa_hat(sc, args.kappa_hat)
        if getattr(args, "solver", None) and args.solver != sc.solver["method"]:
            sc = replace(sc, solver={**sc.solver, "method": args.solver})
        return COMMANDS[args.command](args, sc)
    except (ScenarioError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
