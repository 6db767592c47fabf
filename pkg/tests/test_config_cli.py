import csv
import hashlib
import json

import numpy as np
import pytest

from oscbus.cli import EXIT_CONFIG, EXIT_NUMERIC, main
from oscbus.config import (
    PRESETS,
    apply_override,
    parse_config,
    parse_config_dict,
    serialize_config,
)
from oscbus.errors import ConfigError
from oscbus.runner import emit_series, run_experiment, run_sweep

SMALL = """
[system]
network = "chain"
N = 4
omega = 1.0
kappa = 2.0
Omega = 1.0
attachments = [["a", 4, 0.03], ["b", 1, 0.03]]

[initial]
n_b = 1.0

[run]
resonant_mode = 1
t_max = 300.0
samples = 61
outputs = ["occupation_exact", "occupation_effective", "fidelity"]
"""


def test_fig3_preset_values():
    cfg = parse_config('preset = "fig3"')
    net = cfg.system.network
    assert (net.kind, net.N, net.omega, net.kappa) == ("chain", 10, 1.0, 20.0)
    assert cfg.system.Omega == 1.0
    assert [(a.external_id, a.site, a.epsilon) for a in cfg.system.attachments] == [("a", 10, 0.03), ("b", 1, 0.03)]
    assert cfg.initial.n_b == 1.0 and cfg.baths is None


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_validate_and_round_trip(name):
    cfg = parse_config(f'preset = "{name}"')
    again = parse_config(serialize_config(cfg))
    assert serialize_config(again) == serialize_config(cfg)


def test_empty_document_lists_required_keys():
    with pytest.raises(ConfigError) as info:
        parse_config("")
    assert "system.network" in str(info.value) and "run.outputs" in str(info.value)


@pytest.mark.parametrize(
    "patch, path",
    [
        ({"system": {"N": "ten"}}, "system.N"),
        ({"system": {"colour": 1}}, "system.colour"),
        ({"run": {"outputs": ["plot"]}}, "run.outputs[0]"),
        ({"run": {"samples": 1}}, "run.samples"),
        ({"system": {"attachments": [["c", 1, 0.1]]}}, "system.attachments[0]"),
        ({"system": {"attachments": [["a", 11, 0.1]]}}, "system.attachments[0]"),
        ({"run": {"resonant_mode": 12}}, "run.resonant_mode"),
        ({"extras": {}}, "extras"),
    ],
)
def test_config_errors_carry_path(patch, path):
    doc = {"preset": "fig3", **patch}
    with pytest.raises(ConfigError) as info:
        parse_config_dict(doc)
    assert info.value.path == path


def test_large_n_guard():
    doc = apply_override({"preset": "fig3"}, "system.N", "250")
    with pytest.raises(ConfigError):
        parse_config_dict(doc)
    parse_config_dict(apply_override(doc, "run.allow_large_n", "true"))


def test_override_list_index():
    doc = apply_override({"preset": "fig3"}, "system.attachments.0.2", "0.01")
    assert parse_config_dict(doc).system.attachments[0].epsilon == 0.01


def test_run_columns_and_determinism(tmp_path):
    cfg = parse_config(SMALL)
    result = run_experiment(cfg)
    assert result.column_names() == ["t_omega", "n_exact_a", "n_exact_b", "n_eff_a", "one_minus_fidelity"]
    emit_series(result, tmp_path / "one")
    emit_series(run_experiment(parse_config(SMALL)), tmp_path / "two")
    assert (tmp_path / "one/series.csv").read_bytes() == (tmp_path / "two/series.csv").read_bytes()
    rows = list(csv.reader((tmp_path / "one/series.csv").open()))
    assert len(rows) == 62 and rows[1][3] == "0"
    assert b"\r" not in (tmp_path / "one/series.csv").read_bytes()


def test_manifest_digest(tmp_path):
    emit_series(run_experiment(parse_config(SMALL)), tmp_path, "csv")
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    digest = hashlib.sha256((tmp_path / "series.csv").read_bytes()).hexdigest()
    assert manifest["files"]["series.csv"]["sha256"] == digest
    assert manifest["engine_version"]
    assert "wall_time_s" in manifest
    assert parse_config(manifest["config"]).system.network.N == 4


def test_json_format(tmp_path):
    emit_series(run_experiment(parse_config(SMALL)), tmp_path, "json")
    doc = json.loads((tmp_path / "series.json").read_text())
    assert doc["columns"][0] == "t_omega"
    assert len(doc["data"]["n_exact_a"]) == 61
    assert "wall_time_s" not in doc["manifest"]


def test_auxiliary_outputs(tmp_path):
    doc = apply_override(parse_config(SMALL).document, "run.outputs", '["cm_dump", "bath_classification", "rwa_report"]')
    result = run_experiment(parse_config_dict(doc))
    emit_series(result, tmp_path)
    baths = json.loads((tmp_path / "bath_classification.json").read_text())
    assert [b["label"] for b in baths] == ["a", "b", "mode1", "mode2", "mode3", "mode4"]
    assert [b["kind"] for b in baths][:3] == ["thermal_local"] * 3
    assert {b["kind"] for b in baths[3:]} == {"squeezed_local"}
    rwa = json.loads((tmp_path / "rwa_report.json").read_text())
    assert rwa["mode_set"] == [1] and rwa["eps_over_Omega"] == pytest.approx(0.03)
    dump = json.loads((tmp_path / "cm_dump.json").read_text())
    assert np.allclose(dump["exact_a"][0], 0.5 * np.eye(2))


def test_sweep_matches_single_runs(tmp_path):
    doc = parse_config(SMALL).document
    done = run_sweep(doc, "initial.n_b", ["0.0", "2.0"], tmp_path / "sweep")
    single = tmp_path / "single"
    emit_series(run_experiment(parse_config_dict(apply_override(doc, "initial.n_b", "2.0"))), single)
    assert (done["2.0"] / "series.csv").read_bytes() == (single / "series.csv").read_bytes()


def test_cli_run(tmp_path, capsys):
    path = tmp_path / "small.toml"
    path.write_text(SMALL)
    assert main(["run", str(path), "--out", str(tmp_path / "out")]) == 0
    assert (tmp_path / "out/series.csv").exists()


def test_cli_preset_header(tmp_path):
    assert main(["run", "--preset", "fig8", "--set", "run.t_max=100", "--set", "run.samples=11", "--out", str(tmp_path)]) == 0
    header = (tmp_path / "series.csv").read_text().splitlines()[0]
    assert header == "t_omega,one_minus_fidelity"


def test_cli_config_error(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("[system]\nnetwork = 3\n")
    assert main(["run", str(path), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "system.network" in capsys.readouterr().err


def test_cli_missing_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.toml"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_cli_structural_violation(tmp_path, capsys):
    rng = np.random.default_rng(3)
    A = rng.standard_normal((6, 6))
    M = A @ A.T + 6 * np.eye(6)
    rows = ",".join("[" + ",".join(repr(float(x)) for x in row) + "]" for row in M)
    text = f"""
[system]
network = "custom"
custom_hessian = [{rows}]
attachments = [["a", 1, 0.001]]
[baths]
zeta = 0.01
n_th = 0.0
[run]
resonant_mode = 1
t_max = 10.0
samples = 3
outputs = ["occupation_effective"]
"""
    path = tmp_path / "custom.toml"
    path.write_text(text)
    code = main(["run", str(path), "--out", str(tmp_path / "o")])
    err = capsys.readouterr().err
    # a generic Hessian admits no Williamson matrix with diagonal S S^T
    assert code == EXIT_NUMERIC
    assert "mode 1" in err and "hint" in err
