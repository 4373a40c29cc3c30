import json

import numpy as np
import pytest

from emqs.scenarios import (
    BUILTINS,
    ScenarioError,
    builtin_text,
    freq_label,
    load_scenario,
    override_kappa_hat,
    parse_scenario,
    run_scenario,
)


def _mini(**changes):
    doc = json.loads(builtin_text("mini"))
    doc.update(changes)
    return doc


@pytest.mark.parametrize("name", BUILTINS)
def test_builtins_parse_and_build(name):
    sc = load_scenario(name)
    assert sc.name == name
    p = sc.build()
    assert p.exc.source_nodes.size and p.exc.ground_nodes.size
    assert load_scenario(name + ".json").name == name


def test_load_from_file(tmp_path):
    f = tmp_path / "s.json"
    f.write_text(builtin_text("mini"))
    assert load_scenario(f).name == "mini"
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "missing.json")


@pytest.mark.parametrize(
    "mutate, path",
    [
        (lambda d: d.pop("grid"), "grid"),
        (lambda d: d["grid"].pop("spacing"), "grid.spacing"),
        (lambda d: d["grid"].update(cells=[2, 0, 2]), "grid.cells.1"),
        (lambda d: d["materials"][0].update(kappa=-1), "materials.0.kappa"),
        (lambda d: d["materials"][0].update(colour="red"), "materials.0"),
        (lambda d: d.update(formulations=["symmetric", "magic"]), "formulations.1"),
        (lambda d: d["terminals"].pop("phi_source"), "terminals.phi_source"),
        (lambda d: d.update(frequencies=[-1.0]), "frequencies.0"),
        (lambda d: d.update(solver={"method": "cholesky"}), "solver.method"),
        (lambda d: d.pop("frequencies"), "frequencies"),
        (lambda d: d.pop("time_domain"), "time_domain"),
        (lambda d: d["terminals"]["source"].update(lo=[0.0, 0.0, -1.0]), "terminals.source"),
        (lambda d: d["materials"][0].update(lo=[1, 1, 1], hi=[2, 2, 2]), "materials.0"),
    ],
)
def test_schema_errors_name_the_key(mutate, path):
    doc = _mini()
    mutate(doc)
    with pytest.raises(ScenarioError) as info:
        parse_scenario(doc)
    assert info.value.path == path
    assert str(info.value).startswith(path)


def test_invalid_json():
    with pytest.raises(ScenarioError, match="invalid JSON"):
        parse_scenario("{not json")


def test_terminal_must_touch_a_conductor():
    doc = _mini()
    doc["terminals"]["source"] = {"lo": [0.02, 0.02, 0.0], "hi": [0.02, 0.02, 0.0]}
    with pytest.raises(ScenarioError) as info:
        parse_scenario(doc).build()
    assert info.value.path == "terminals.source"
    assert "conductor" in str(info.value)


def test_terminal_must_be_on_the_boundary():
    doc = _mini()
    doc["terminals"]["source"] = {"lo": [0.01, 0.01, 0.01], "hi": [0.01, 0.01, 0.01]}
    with pytest.raises(ScenarioError, match="boundary"):
        parse_scenario(doc).build()


def test_terminal_box_without_nodes():
    doc = _mini()
    doc["terminals"]["source"] = {"lo": [0.002, 0.002, 0.0], "hi": [0.004, 0.004, 0.0]}
    with pytest.raises(ScenarioError, match="no grid node"):
        parse_scenario(doc).build()


def test_overlapping_terminals():
    doc = _mini()
    doc["terminals"]["ground"] = dict(doc["terminals"]["source"])
    with pytest.raises(ScenarioError, match="overlap"):
        parse_scenario(doc).build()


def test_kappa_hat_override():
    sc = override_kappa_hat(load_scenario("coil"), 1e-2)
    assert sc.kappa_hat.value == 1e-2
    assert sc.options_for("eqs-gauge")["kappa_hat"] == 1e-2
    assert sc.build().mat.kappa_hat == 1e-2


def test_N_scale_option():
    doc = _mini(formulation_options={"graddiv": {"N_scale": 2.0}})
    sc = parse_scenario(doc)
    p = sc.build()
    w = 2 * np.pi * 1e5
    assert "N" in sc.options_for("graddiv", p, w)
    assert sc.options_for("graddiv") == {}


def test_wavelength_warning(caplog):
    doc = _mini(frequencies=[1e10])
    assert parse_scenario(doc).wavelength_check() is False
    assert "lambda/10" in caplog.text
    assert load_scenario("mini").wavelength_check() is True


def test_freq_label():
    assert freq_label(1e7) == "10000000"
    assert freq_label(999.9999999999999) == "1000"
    assert freq_label(2.5) == "2.5"


def test_mini_run(tmp_path):
    res = run_scenario(load_scenario("mini"), out_dir=tmp_path)
    status = {r.formulation: r.status for r in res.records}
    assert status.pop("monolithic") == "expected-singular"
    assert set(status.values()) == {"ok"}
    assert res.exit_status == 0
    assert res.consistency is not None and res.consistency.amplitude_error < 1e-3
    names = {p.name for p in tmp_path.iterdir()}
    for suffix in ("summary.csv", "comparison.csv", "td_consistency.csv", "summary.txt"):
        assert f"mini_{suffix}" in names
    assert "mini_symmetric_100000.vtk" in names and "mini_td-symmetric_100000.csv" in names
    assert "mini_monolithic_100000.csv" not in names
    for ident, _, rep in res.comparisons:
        assert rep.max_rel("B") < 1e-4, ident


def test_failures_are_recorded_not_raised(tmp_path):
    doc = _mini(formulations=["symmetric", "tsm", "graddiv"], formulation_options={"graddiv": {"N_scale": 1.0}})
    doc.pop("time_domain")
    sc = parse_scenario(doc)
    res = run_scenario(sc, out_dir=tmp_path, method="iterative", tol=1e-30)
    assert res.exit_status == 1
    assert any(r.status == "failed" and "tol" in r.message for r in res.records)


def test_summary_is_deterministic(tmp_path):
    sc = parse_scenario(_mini(formulations=["symmetric", "tsm"]))
    run_scenario(sc, out_dir=tmp_path / "a")
    run_scenario(sc, out_dir=tmp_path / "b")
    for name in ("mini_summary.csv", "mini_comparison.csv", "mini_symmetric_100000.csv", "mini_tsm_100000.vtk"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
