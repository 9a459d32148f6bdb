import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from fqsd.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "src" / "fqsd" / "configs"


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return {name: np.array([float(r[i]) for r in rows[1:]]) for i, name in enumerate(rows[0])}


def write_config(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


ONE_QUBIT = """
model: {model: one_qubit, omega: 1.0}
kernel: {type: ou, gamma: 2.0, Omega: 0.5}
integrator: {T: 1.0, h: %s, coeff_source: riccati}
initial_state: {type: default}
outputs: {prefix: ou, observables: [rho21]}
"""


def test_step_bound_is_enforced(tmp_path, capsys):
    code = main(["run", write_config(tmp_path, ONE_QUBIT % 0.2), "--out", str(tmp_path)])
    assert code == 2
    assert "h <= T/10" in capsys.readouterr().err


def test_override_can_break_bound(tmp_path, capsys):
    code = main(["run", write_config(tmp_path, ONE_QUBIT % 0.01), "--T", "0.05", "--out", str(tmp_path)])
    assert code == 2
    assert "T/10" in capsys.readouterr().err


@pytest.mark.parametrize("text", ["[1, 2", "model: {model: one_qubit}\n", ONE_QUBIT.replace("riccati", "magic") % 0.01])
def test_bad_configs_exit_2(tmp_path, text):
    assert main(["run", write_config(tmp_path, text), "--out", str(tmp_path)]) == 2


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.yaml")]) == 2


def test_resonance_demo_returns_coherence_at_pi(tmp_path):
    assert main(["run", str(CONFIGS / "one_qubit_resonance.yaml"), "--out", str(tmp_path)]) == 0
    data = read_csv(tmp_path / "one_qubit_resonance_trajectory.csv")
    assert data["t"][-1] == pytest.approx(np.pi)
    z = data["Re(rho21)"] + 1j * data["Im(rho21)"]
    assert abs(z[-1] - z[0]) <= 1e-6


def test_pole_without_closed_form_exits_3(tmp_path, capsys):
    text = (CONFIGS / "one_qubit_resonance.yaml").read_text().replace("closed_form", "grid")
    assert main(["run", write_config(tmp_path, text), "--out", str(tmp_path)]) == 3
    assert "singular" in capsys.readouterr().err
    manifest = json.loads((tmp_path / "one_qubit_resonance_manifest.json").read_text())
    assert manifest["runs"][0]["truncated_at"] == pytest.approx(np.pi / 2, abs=5e-3)


def test_sweep_outputs(tmp_path):
    assert main(["run", str(CONFIGS / "two_qubit_ohmic_sweep.yaml"), "--out", str(tmp_path)]) == 0
    trajectories = sorted(p.name for p in tmp_path.glob("*_trajectory.csv"))
    assert len(trajectories) == 3
    combined = read_csv(tmp_path / "two_qubit_ohmic_sweep_concurrence.csv")
    assert [k for k in combined if k != "t"] == [f"concurrence[omega_c={w}]" for w in ("0.5", "1", "2")]
    for k, v in combined.items():
        if k != "t":
            assert v[0] == pytest.approx(1.0)


def test_manifest_lists_every_file_with_hash(tmp_path):
    assert main(["run", str(CONFIGS / "two_qubit_ohmic_sweep.yaml"), "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "two_qubit_ohmic_manifest.json").read_text())
    listed = {Path(f["path"]).name: f["sha256"] for f in manifest["files"]}
    on_disk = {p.name for p in tmp_path.glob("*.csv")}
    assert set(listed) == on_disk
    for name, digest in listed.items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest
    assert all(r["invariants"]["trace_violations"] == 0 for r in manifest["runs"])
    assert manifest["config"]["sweep"]["values"] == [0.5, 1.0, 2.0]


def test_runs_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, ONE_QUBIT % 0.01)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--out", str(a)]) == 0
    assert main(["run", cfg, "--out", str(b)]) == 0
    for f in a.glob("*.csv"):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FQSD_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", write_config(tmp_path, ONE_QUBIT % 0.01)]) == 0
    assert (tmp_path / "env" / "ou_trajectory.csv").exists()


def test_csv_uses_round_trip_precision(tmp_path):
    assert main(["run", write_config(tmp_path, ONE_QUBIT % 0.01), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "ou_trajectory.csv").read_text().splitlines()
    last = lines[-1].split(",")
    assert any(len(x.replace("-", "").replace(".", "").lstrip("0")) >= 15 for x in last)


@pytest.mark.parametrize("config", sorted(p.name for p in CONFIGS.glob("*.yaml")))
def test_shipped_configs_run_cleanly(tmp_path, config):
    assert main(["run", str(CONFIGS / config), "--out", str(tmp_path)]) == 0
    manifest = next(tmp_path.glob("*_manifest.json"))
    for run in json.loads(manifest.read_text())["runs"]:
        inv = run["invariants"]
        assert inv.get("max_trace_err", 0) <= 1e-10
        assert inv.get("max_herm_err", 0) <= 1e-10


def test_verify_novikov(tmp_path, capsys):
    report_path = tmp_path / "report.json"
    assert main(["verify", "novikov", "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert report["novikov_max"] <= 1e-8
    assert report["times"] == [0.25, 0.5, 1.0]
    assert all({"name", "residual", "tolerance", "passed"} <= set(c) for c in report["checks"])


def test_verify_exit_code_tracks_checks(tmp_path, capsys):
    code = main(["verify", "chain"])
    report = json.loads(capsys.readouterr().out)
    assert [c["name"] for c in report["checks"]] == ["chain_N2", "chain_N4", "chain_N8"]
    assert code == (0 if report["passed"] else 1)


def test_unknown_suite_and_figure(tmp_path):
    assert main(["verify", "everything"]) == 2
    assert main(["figdata", "fig9", "--out", str(tmp_path)]) == 2
    assert main([]) == 2


def test_fig4_fermionic_x3_vanishes(tmp_path):
    assert main(["figdata", "fig4", "--out", str(tmp_path)]) == 0
    data = read_csv(tmp_path / "fig4_coefficients.csv")
    assert np.all(data["fermion_|X3|"] == 0)
    assert np.max(data["boson_|X3|"]) >= 1e-3


def test_fig2_symmetric_traces(tmp_path):
    assert main(["figdata", "fig2", "--out", str(tmp_path)]) == 0
    data = read_csv(tmp_path / "fig2_F_traces.csv")
    assert np.max(np.abs(data["|F1|"] - data["|F2|"])) <= 1e-10


def test_fig3_gamma_series(tmp_path):
    assert main(["figdata", "fig3", "--out", str(tmp_path)]) == 0
    data = read_csv(tmp_path / "fig3_mean_q.csv")
    assert [k for k in data if k != "t"] == ["mean_q[gamma=0.5]", "mean_q[gamma=2]", "mean_q[gamma=8]"]


def test_figdata_overrides(tmp_path):
    cfg = write_config(tmp_path, "T: 2.0\nomega_c: [1.0, 3.0]\n", "fig.yaml")
    assert main(["figdata", "fig1", cfg, "--out", str(tmp_path)]) == 0
    data = read_csv(tmp_path / "fig1_concurrence.csv")
    assert data["t"][-1] == pytest.approx(2.0)
    assert len(data) == 3
