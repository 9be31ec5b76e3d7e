import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from lyapform.cli import main
from lyapform.cubical_map import read_flow_graph


def run(tmp_path, command, config=None, *extra, name="out"):
    args = [command, "--out", str(tmp_path / name)]
    if config is not None:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(config) if not isinstance(config, str) else config)
        args += ["--config", str(path)]
    return main(args + list(extra)), tmp_path / name


LINEAR = {"flow": "linear", "form": {"periods": [-1, 0], "potential": []}, "grid": 16}


class TestExitCodes:
    def test_discretize_zero_field(self, tmp_path):
        code, out = run(tmp_path, "discretize", {"flow": {"preset": "zero"}, "grid": 6,
                                                 "form": {"periods": [0, 0], "potential": []}})
        assert code == 0
        g = read_flow_graph(out / "graph_edges.csv", out / "graph_header.json")
        loops = g.tails == g.heads
        assert loops.sum() == 36 and np.all(g.weight[loops] == 0)

    def test_analyze_holds(self, tmp_path):
        code, out = run(tmp_path, "analyze", LINEAR)
        assert code == 0
        conds = json.loads((out / "conditions.json").read_text())
        assert all(conds[k]["holds"] for k in ("II", "III", "IV"))
        assert json.loads((out / "recurrence.json").read_text())["R_xi"] == []

    def test_analyze_fails_with_witness(self, tmp_path, capsys):
        cfg = dict(LINEAR, form={"periods": [1, 0], "potential": []})
        code, _ = run(tmp_path, "analyze", cfg, "--condition", "III")
        assert code == 3
        assert "witness" in capsys.readouterr().out

    def test_exact_class_vacuous(self, tmp_path):
        code, out = run(tmp_path, "analyze", dict(LINEAR, form={"periods": [0, 0], "potential": []}))
        assert code == 0
        assert json.loads((out / "recurrence.json").read_text())["C_xi"] == []

    def test_synthesize_verified(self, tmp_path):
        code, out = run(tmp_path, "synthesize", dict(LINEAR, n_samples=2000, margin=0.5))
        assert code == 0
        form = json.loads((out / "lyapunov_form.json").read_text())
        assert form["periods"] == [-1.0, 0.0]
        assert json.loads((out / "verification.json").read_text())["passed"] is True
        assert (out / "iota_heatmap.svg").read_text().startswith("<?xml")

    def test_synthesize_periodic_orbit(self, tmp_path):
        code, _ = run(tmp_path, "synthesize", {"flow": "periodic_orbit", "n_samples": 2000})
        assert code == 0

    def test_synthesize_infeasible(self, tmp_path, capsys):
        code, out = run(tmp_path, "synthesize", dict(LINEAR, form={"periods": [1, 0], "potential": []}))
        assert code == 4
        assert "witness" in capsys.readouterr().out
        assert json.loads((out / "lyapunov_data.json").read_text())["feasible"] is False

    def test_verification_failure(self, tmp_path):
        # an impossible margin turns a sound form into a verification failure
        code, out = run(tmp_path, "synthesize", dict(LINEAR, margin=5.0, n_samples=500))
        assert code == 5
        assert json.loads((out / "verification.json").read_text())["lambda1"]["passed"] is False

    def test_malformed_json(self, tmp_path, capsys):
        code, _ = run(tmp_path, "analyze", '{\n  "grid": 16,\n  "tau" 2\n}')
        assert code == 2
        err = capsys.readouterr().err
        assert "line 3" in err and "column" in err

    @pytest.mark.parametrize("cfg", [{"tau": 1.0}, {"bogus": 1}, {"flow": "nope"}, {"grid": [8, 8, 8]},
                                     {"flow": {"preset": "linear", "params": {"velocity": [1, 0, 0]}}}])
    def test_bad_values(self, tmp_path, cfg):
        code, _ = run(tmp_path, "analyze", cfg)
        assert code == 2

    def test_cfl_is_config_error(self, tmp_path):
        code, _ = run(tmp_path, "discretize", {"flow": "morse_gradient", "form": {"periods": [0, 0]}, "step": 1.0})
        assert code == 2


class TestOutputs:
    def test_effective_config_materialized(self, tmp_path):
        code, out = run(tmp_path, "discretize", {"grid": 8}, "--seed", "5", "--threads", "2")
        eff = json.loads((out / "effective_config.json").read_text())
        assert eff["seed"] == 5 and eff["threads"] == 2 and eff["tau"] == 2.0 and eff["grid"] == 8
        assert list(eff) == sorted(eff)

    def test_flow_from_file(self, tmp_path):
        flow = {"dim": 2, "components": [[{"c": 1.0, "k": [0, 0], "basis": "cos"}],
                                         [{"c": 0.5, "k": [0, 0], "basis": "cos"}]], "name": "mine"}
        (tmp_path / "flow_def.json").write_text(json.dumps(flow))
        code, out = run(tmp_path, "discretize", {"flow": "flow_def.json", "grid": 8})
        assert code == 0
        assert json.loads((out / "flow.json").read_text())["name"] == "mine"

    def test_asymptotic_csv(self, tmp_path):
        cfg = dict(LINEAR, x0=[[0.0, 0.0], [0.5, 0.25]], t_total=50.0, trajectory_step=0.1)
        code, out = run(tmp_path, "asymptotic", cfg)
        assert code == 0
        with open(out / "asymptotic.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert float(rows[1]["A_1"]) == pytest.approx(0.6180339887498949, abs=1e-12)
        assert float(rows[0]["pairing"]) == pytest.approx(-1.0, abs=1e-12)
        assert (out / "asymptotic.csv").read_bytes().count(b"\r\n") == 3

    def test_overlay_files(self, tmp_path):
        code, out = run(tmp_path, "analyze", {"flow": "periodic_orbit", "grid": 16})
        pgm = (out / "overlay.pgm").read_bytes()
        assert pgm.startswith(b"P5\n16 16\n255\n") and len(pgm) == len(b"P5\n16 16\n255\n") + 256
        svg = (out / "overlay.svg").read_text()
        assert 'version="1.1"' in svg and "#d62728" in svg

    def test_oracle_selftest(self, tmp_path):
        code, out = run(tmp_path, "oracle-selftest", {"selftest_instances": 20})
        assert code == 0
        assert json.loads((out / "oracle_selftest.json").read_text())["mismatches"] == 0

    def test_byte_identical_reruns(self, tmp_path):
        cfg = dict(LINEAR, n_samples=500, x0=None, t_total=20.0, trajectory_step=0.1)
        for name in ("a", "b"):
            for cmd in ("discretize", "synthesize", "asymptotic"):
                run(tmp_path, cmd, cfg, name=name)
        files = sorted(p.name for p in (tmp_path / "a").iterdir())
        assert "graph_edges.csv" in files and "verification.json" in files
        for f in files:
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "lyapform", "discretize", "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert "1024 cells" in res.stdout
