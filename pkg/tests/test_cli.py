"""Tests for the command line front end: formats, exit codes, reproducibility."""

import json
import os

import numpy as np
import pytest

from canonflow.cli import TRAJECTORY_HEADER, main, run_scenario


def invoke(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def ck_scenario(tmp_path, outdir, method="split_step", t_final=0.5, n=512):
    scenario = {
        "system": {"kind": "oscillator",
                   "family": {"m0": 1.0, "mu": 1.0, "nu": 0.0,
                              "alpha": 0.1, "Omega0": 1.0}},
        "initial_state": {"kind": "gaussian", "width_re": 1.0, "center": 1.0},
        "grid": {"xmin": -12.0, "xmax": 12.0, "n": n},
        "propagator": {"method": method, "dt": 0.001, "t_final": t_final,
                       "output_stride": 125},
        "outputs": {"directory": str(outdir)},
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(scenario))
    return path


class TestSubcommands:
    def test_flow_quadratic_example(self, capsys):
        code, out = invoke(capsys, "flow", "--f", "quadratic",
                           "--eps", "0.25", "--x", "2.0")
        assert code == 0
        assert out.strip() == "4.0"

    def test_flow_all_fields(self, capsys):
        code, out = invoke(capsys, "flow", "--f", "exp-decay", "--rate", "1.0",
                           "--eps", "0.5", "--x", "0.0", "--all")
        assert code == 0
        rec = json.loads(out)[0]
        assert rec["x_out"] == pytest.approx(np.log(1.5), abs=1e-12)
        assert rec["weight"] == pytest.approx(1.5, abs=1e-12)
        assert rec["weight"] * rec["jacobian"] == pytest.approx(1.0, abs=1e-12)

    def test_transform_dilation(self, capsys):
        code, out = invoke(capsys, "transform", "--a", "0.5", "--b", "0.5",
                           "--c", "0", "--op", "dilation",
                           "--eps", "0.1", "--deps", "0.2")
        assert code == 0
        rec = json.loads(out)
        assert rec["a"] == pytest.approx(0.4093653765389909)
        assert rec["b"] == pytest.approx(0.6107013790800849)
        assert rec["c"] == pytest.approx(-0.2)

    def test_solvable_constant_frequency_column(self, capsys):
        code, out = invoke(capsys, "solvable", "--m0", "1", "--mu", "1",
                           "--nu", "0", "--alpha", "0.1", "--Omega0", "1",
                           "--samples", "5")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "t,m,dm,ddm,omega,Omega"
        omegas = [float(line.split(",")[4]) for line in lines[1:]]
        assert np.allclose(omegas, np.sqrt(1.01), atol=1e-12)

    def test_metric_table(self, capsys):
        code, out = invoke(capsys, "metric", "--f", "quadratic", "--eps", "0.2",
                           "--xmin", "-2", "--xmax", "2", "--samples", "3")
        assert code == 0
        rows = [line.split(",") for line in out.strip().splitlines()[1:]]
        for x_str, g_str in rows:
            assert float(g_str) == pytest.approx(
                (1.0 - 0.2 * float(x_str)) ** -4, rel=1e-12)

    def test_metric_invert(self, capsys):
        code, out = invoke(capsys, "metric", "--f", "exp-decay", "--eps", "0.4",
                           "--invert", "--xmin", "-2", "--xmax", "2",
                           "--samples", "5")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "x,phi,f"
        for line in lines[1:]:
            x, phi, f = (float(v) for v in line.split(","))
            # recovery precision is set by the extension reach (~0.4 e^-8)
            assert phi == pytest.approx(np.log(np.exp(x) + 0.4), abs=1e-3)
            assert f > 0

    def test_verify_single_suite(self, capsys):
        code, out = invoke(capsys, "verify", "--suite", "closed_forms")
        assert code == 0
        payload = json.loads(out)
        assert payload["all_passed"] is True
        names = [c["name"] for c in payload["suites"]["closed_forms"]]
        assert "expdecay_momentum_weight_variant_documented" in names


class TestScenarios:
    def test_trajectory_format(self, tmp_path, capsys):
        outdir = tmp_path / "run"
        path = ck_scenario(tmp_path, outdir)
        code, out = invoke(capsys, "propagate", str(path))
        assert code == 0
        lines = (outdir / "trajectory.csv").read_text().splitlines()
        assert lines[0] == TRAJECTORY_HEADER
        first = [float(v) for v in lines[1].split(",")]
        assert first[0] == 0.0
        assert first[1] == pytest.approx(1.0, abs=1e-12)
        report = json.loads((outdir / "report.json").read_text())
        assert report["library_version"]
        assert report["report"]["max_norm_drift"] < 1e-8
        assert (outdir / "plot.gp").exists()

    def test_byte_stable(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        path = ck_scenario(tmp_path, out1)
        run_scenario(path)
        path2 = ck_scenario(tmp_path, out2)
        run_scenario(path2)
        assert (out1 / "trajectory.csv").read_bytes() == \
            (out2 / "trajectory.csv").read_bytes()

    def test_exact_method_fidelity_column(self, tmp_path, capsys):
        outdir = tmp_path / "run"
        path = ck_scenario(tmp_path, outdir, method="exact", n=1024)
        code, _ = invoke(capsys, "propagate", str(path))
        assert code == 0
        lines = (outdir / "trajectory.csv").read_text().splitlines()[1:]
        fidelities = [float(line.split(",")[2]) for line in lines]
        assert np.all(np.asarray(fidelities) > 1.0 - 1e-9)

    def test_env_var_overrides_directory(self, tmp_path, capsys, monkeypatch):
        ignored = tmp_path / "ignored"
        forced = tmp_path / "forced"
        path = ck_scenario(tmp_path, ignored)
        monkeypatch.setenv("CANONFLOW_OUT", str(forced))
        code, _ = invoke(capsys, "propagate", str(path))
        assert code == 0
        assert (forced / "trajectory.csv").exists()
        assert not ignored.exists()

    def test_curved_scenario(self, tmp_path, capsys):
        outdir = tmp_path / "curved"
        scenario = {
            "system": {"kind": "curved", "mass": 1.0,
                       "metric": {"type": "from_generator", "eps": 0.4,
                                  "generator": {"type": "exp_decay", "rate": 1.0}}},
            "initial_state": {"kind": "gaussian", "width_re": 1.0, "center": 4.0},
            "grid": {"xmin": -4.0, "xmax": 20.0, "n": 512},
            "propagator": {"method": "crank_nicolson", "dt": 0.002,
                           "t_final": 0.2, "output_stride": 50},
            "outputs": {"directory": str(outdir)},
        }
        path = tmp_path / "curved.json"
        path.write_text(json.dumps(scenario))
        code, _ = invoke(capsys, "propagate", str(path))
        assert code == 0
        lines = (outdir / "trajectory.csv").read_text().splitlines()
        assert lines[0] == TRAJECTORY_HEADER
        # curved runs have no exact reference: fidelity column is nan
        assert "nan" in lines[1].split(",")[2]


class TestErrorPaths:
    def test_domain_violation_exits_2(self, tmp_path, capsys):
        scenario = {
            "system": {"kind": "curved", "mass": 1.0,
                       "metric": {"type": "from_generator", "eps": 0.25,
                                  "generator": {"type": "quadratic"}}},
            "initial_state": {"kind": "gaussian", "width_re": 4.0, "center": 2.0},
            "grid": {"xmin": -2.0, "xmax": 6.0, "n": 256},
            "propagator": {"method": "crank_nicolson", "dt": 0.001,
                           "t_final": 0.1},
            "outputs": {"directory": str(tmp_path / "x")},
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(scenario))
        code, out = invoke(capsys, "propagate", str(path))
        assert code == 2
        assert json.loads(out)["error"]["kind"] == "DomainBlowup"

    def test_schema_error_exits_64(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text(json.dumps({"system": {}}))
        code, out = invoke(capsys, "propagate", str(path))
        assert code == 64
        assert json.loads(out)["error"]["kind"] == "ScenarioError"

    def test_usage_error_exits_64(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["flow", "--f", "nonsense", "--eps", "0.1", "--x", "1.0"])
        assert err.value.code == 64

    def test_unknown_suite_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["verify", "--suite", "bogus"])
        assert err.value.code == 64
