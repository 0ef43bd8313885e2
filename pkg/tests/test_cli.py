"""CLI thin client: subcommands, artifacts, exit codes."""

import pytest
import yaml

from parbuck.cli import main
from parbuck.coordinates import build_maps
from parbuck.costs import QuadraticCost, argmin_oracle
from parbuck.model import BankParams
from parbuck.trace import read_csv

SHORT = """
name: cli_short
bank: {L: [2.83e-3, 1.3e-3], C: 22.0e-3, R: 20.0, E: [24.0, 24.0]}
controller: {type: robust, Q_r: 0.264, k_d: 1.0, k_i: 10.0, K_lambda: 0.1}
cost: {type: tracking, C_star: 0.0}
sim: {duration: 0.6, decimate: 50}
checks:
  - {type: charge_regulation, rel_tol: 0.01}
"""


@pytest.fixture
def short_config(tmp_path):
    path = tmp_path / "short.yaml"
    path.write_text(SHORT)
    return path


class TestRun:
    def test_successful_run_writes_artifacts(self, short_config, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["run", "--config", str(short_config), "--out", str(out)])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "PASS" in stdout
        trace_csv = out / "cli_short_trace.csv"
        metrics = out / "cli_short_metrics.txt"
        assert trace_csv.exists() and metrics.exists()
        names, data = read_csv(trace_csv)
        assert names[0] == "t"
        assert names == ["t", "phi_1", "phi_2", "Q", "v", "C_1", "phi_T",
                         "d_1", "d_2", "lambda_1", "mu", "xi", "H", "H_d",
                         "J_cost", "sat_1", "sat_2"]
        assert data.shape[1] == len(names)
        assert "charge_regulation" in metrics.read_text()

    def test_dt_and_decimate_overrides(self, short_config, tmp_path):
        out = tmp_path / "out"
        code = main(["run", "--config", str(short_config), "--out", str(out),
                     "--dt", "2e-5", "--decimate", "100"])
        assert code == 0
        _, data = read_csv(out / "cli_short_trace.csv")
        assert len(data) == 301  # 0.6 s / 2e-5 s / 100 records + initial

    def test_malformed_config_exits_2_without_files(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("name: x\nbank: {L: [1.0]}\n")
        out = tmp_path / "out"
        code = main(["run", "--config", str(bad), "--out", str(out)])
        assert code == 2
        assert not out.exists()
        assert "error" in capsys.readouterr().err

    def test_failing_check_exits_1(self, tmp_path):
        doc = yaml.safe_load(SHORT)
        # charge cannot be at reference during the startup transient
        doc["checks"] = [{"type": "charge_hold", "start": 0.0, "end": 0.1,
                          "max_dev": 1e-6}]
        doc["name"] = "doomed"
        path = tmp_path / "doomed.yaml"
        path.write_text(yaml.safe_dump(doc))
        code = main(["run", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == 1

    def test_unreachable_server_exits_3(self, short_config, tmp_path):
        code = main(["--server", "http://127.0.0.1:9", "run",
                     "--config", str(short_config), "--out", str(tmp_path / "o")])
        assert code == 3


class TestVerifyCommand:
    def test_verify_green_and_reproducible(self, capsys, tmp_path):
        code = main(["verify", "--draws", "5", "--seed", "3",
                     "--out", str(tmp_path)])
        first = capsys.readouterr().out
        assert code == 0
        assert "PASS" in first
        assert (tmp_path / "verify_report.txt").exists()
        code = main(["verify", "--draws", "5", "--seed", "3"])
        second = capsys.readouterr().out
        assert code == 0
        assert first.splitlines()[:12] == second.splitlines()[:12]


class TestSweepCommand:
    def test_load_sweep_regulates_everywhere(self, short_config, tmp_path, capsys):
        out = tmp_path / "sweep"
        code = main(["sweep", "--config", str(short_config), "--parameter", "R",
                     "--values", "5", "10", "20", "--out", str(out)])
        assert code == 0
        csv_path = out / "cli_short_sweep_R.csv"
        lines = csv_path.read_text().splitlines()
        assert lines[0].startswith("R,final_Q,")
        assert len(lines) == 4
        for line in lines[1:]:
            rel_err = float(line.split(",")[2])
            assert rel_err < 0.01

    def test_resistance_scale_sweep_shifts_repartition(self, tmp_path):
        # uncompensated coil resistance keeps the charge regulated but
        # drags the repartition away from the ideal-model optimum
        doc = yaml.safe_load(SHORT)
        doc["name"] = "esr_sweep"
        doc["bank"]["r"] = [0.1, 0.1]
        doc["plant"] = {"esr": True, "pre_feedback": False}
        doc["cost"] = {"type": "quadratic", "K1": [1.623e4, 1.8343e5],
                       "K2": [130.7, 27.7]}
        doc["sim"]["duration"] = 1.0
        doc["checks"] = []
        path = tmp_path / "esr_sweep.yaml"
        path.write_text(yaml.safe_dump(doc))
        out = tmp_path / "sweep"
        code = main(["sweep", "--config", str(path), "--parameter", "r_scale",
                     "--values", "0.5", "1.0", "2.0", "--out", str(out)])
        assert code == 0
        lines = (out / "esr_sweep_sweep_r_scale.csv").read_text().splitlines()
        rows = [line.split(",") for line in lines[1:]]
        cols = lines[0].split(",")
        q_err = [float(r[cols.index("Q_rel_err")]) for r in rows]
        assert all(e < 0.01 for e in q_err)

        bank = BankParams(L=[2.83e-3, 1.3e-3], C=22e-3, R=20.0, E=[24.0, 24.0])
        maps = build_maps(bank)
        best = argmin_oracle(QuadraticCost(K1=[1.623e4, 1.8343e5], K2=[130.7, 27.7]),
                             maps, maps.L_eq_m * 12.0 / 20.0)
        c_final = [float(r[cols.index("final_C_1")]) for r in rows]
        drift = [abs(c - best.ccas[0]) for c in c_final]
        assert drift[0] < drift[1] < drift[2]
        assert drift[2] > 1e-5

    def test_missing_values_is_usage_error(self, short_config):
        with pytest.raises(SystemExit) as err:
            main(["sweep", "--config", str(short_config), "--parameter", "R",
                  "--values"])
        assert err.value.code == 2
