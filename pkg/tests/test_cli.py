"""End-to-end command-line checks: each subcommand through main(argv)."""

import json

import pytest

from v2xsim import analytics, ledger
from v2xsim.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"env.episode_len_ttis": 10}))
    return str(path)


# --------------------------------------------------------------- floor / oracle


class TestFloorAndOracle:
    def test_floor_table_and_csv(self, capsys, tmp_path):
        csv_path = tmp_path / "floor.csv"
        code, out, _ = run_cli(capsys, "floor", "--m", "5", "--n", "2", "4",
                               "--csv", str(csv_path))
        assert code == 0
        assert f"{analytics.nash_floor(5, 2):.6f}" in out
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "m_subchannels,n_vehicles,analytical_floor"
        assert lines[1] == f"5,2,{analytics.nash_floor(5, 2):.6f}"
        assert lines[2] == f"5,4,{analytics.nash_floor(5, 4):.6f}"

    def test_oracle_agrees_with_floor(self, capsys, tmp_path):
        csv_path = tmp_path / "oracle.csv"
        code, out, _ = run_cli(capsys, "oracle", "--m", "5", "--n", "4",
                               "--trials", "20000", "--seed", "0",
                               "--csv", str(csv_path))
        assert code == 0
        header, row = csv_path.read_text().splitlines()
        assert header == "m_subchannels,n_vehicles,analytical_floor,monte_carlo,std_err"
        _, _, floor, est, se = row.split(",")
        assert abs(float(est) - float(floor)) < 5 * float(se)


# ----------------------------------------------------------------- train / eval


class TestTrainEval:
    def test_train_writes_checkpoint_and_ledger(self, capsys, tmp_path, tiny_config):
        ck = tmp_path / "run.npz"
        led = tmp_path / "ledger.jsonl"
        code, out, _ = run_cli(
            capsys, "train", "--n", "2", "--episodes", "2",
            "--eval-episodes", "2", "--seed", "5", "--config", tiny_config,
            "--out", str(ck), "--ledger", str(led))
        assert code == 0
        metrics = json.loads(out.strip().splitlines()[-1])
        assert set(metrics) == {
            "m0_pdr_mean", "m1_pdr_mean", "m0_collision_rate",
            "m0_within_pool_collision_rate", "m0_sinr_mean_db",
            "m0_pdr_p05_intra"}
        assert ck.exists()
        (entry,) = ledger.read_ledger(str(led))
        assert entry["run_id"] == "adhoc-N2-M5-shared-0a-s5-ep2"
        assert entry["metrics"] == metrics

    def test_train_series_csv(self, capsys, tmp_path, tiny_config):
        out_csv = tmp_path / "series.csv"
        code, _, _ = run_cli(
            capsys, "train", "--n", "2", "--episodes", "3",
            "--eval-episodes", "1", "--seed", "5", "--config", tiny_config,
            "--series-csv", str(out_csv))
        assert code == 0
        rows = out_csv.read_text().strip().splitlines()
        assert rows[0] == "episode_index," + ",".join(ledger.METRIC_KEYS)
        assert len(rows) == 1 + 3
        assert [int(r.split(",")[0]) for r in rows[1:]] == [0, 1, 2]

    def test_eval_trace_csv(self, capsys, tmp_path, tiny_config):
        ck = tmp_path / "run.npz"
        run_cli(capsys, "train", "--n", "2", "--episodes", "2",
                "--eval-episodes", "1", "--seed", "5", "--config", tiny_config,
                "--out", str(ck))
        tr = tmp_path / "trace.csv"
        code, _, _ = run_cli(capsys, "eval", "--checkpoint", str(ck),
                             "--episodes", "2", "--seed", "44",
                             "--trace", str(tr))
        assert code == 0
        lines = tr.read_text().strip().splitlines()
        assert lines[0] == "tti,vehicle_id,subchannel,power_dbm,sinr_db,pdr,collision"
        # 10 TTIs x 2 vehicles x 2 episodes
        assert len(lines) == 1 + 10 * 2 * 2

    def test_anneal_episodes_enters_digest(self, capsys, tmp_path, tiny_config):
        entries = []
        for tag, extra in (("a", ()), ("b", ("--anneal-episodes", "1"))):
            led = tmp_path / f"{tag}.jsonl"
            code, _, _ = run_cli(
                capsys, "train", "--n", "2", "--episodes", "2",
                "--eval-episodes", "1", "--seed", "5", "--config", tiny_config,
                "--ledger", str(led), *extra)
            assert code == 0
            (entry,) = ledger.read_ledger(str(led))
            entries.append(entry)
        assert entries[0]["config_digest"] != entries[1]["config_digest"]

    def test_eval_roundtrip_is_deterministic(self, capsys, tmp_path, tiny_config):
        ck = tmp_path / "run.npz"
        run_cli(capsys, "train", "--n", "2", "--episodes", "2",
                "--eval-episodes", "1", "--seed", "5", "--config", tiny_config,
                "--out", str(ck))
        code1, out1, _ = run_cli(capsys, "eval", "--checkpoint", str(ck),
                                 "--episodes", "3", "--seed", "44")
        code2, out2, _ = run_cli(capsys, "eval", "--checkpoint", str(ck),
                                 "--episodes", "3", "--seed", "44")
        assert code1 == code2 == 0
        assert out1 == out2
        json.loads(out1.strip())            # valid metric JSON

    def test_duplicate_ledger_run_fails(self, capsys, tmp_path, tiny_config):
        led = tmp_path / "ledger.jsonl"
        args = ("train", "--n", "2", "--episodes", "1", "--eval-episodes", "1",
                "--seed", "5", "--config", tiny_config, "--ledger", str(led))
        assert run_cli(capsys, *args)[0] == 0
        code, _, err = run_cli(capsys, *args)
        assert code == 1
        assert "error:" in err and "refusing" in err
        assert len(ledger.read_ledger(str(led))) == 1

    def test_separated_requires_pool_size(self, capsys, tiny_config):
        code, _, err = run_cli(capsys, "train", "--n", "2", "--episodes", "1",
                               "--partition", "separated", "--config", tiny_config)
        assert code == 1
        assert "--m0-pool is required" in err

    def test_missing_checkpoint_is_one_line_error(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "eval", "--checkpoint",
                               str(tmp_path / "nope.npz"))
        assert code == 1
        assert err.startswith("error:")


# --------------------------------------------------------------- report / export


def write_baseline_ledger(tmp_path):
    path = str(tmp_path / "runs.jsonl")
    base = {
        "schema_version": ledger.SCHEMA_VERSION,
        "run_id": "A-N4-M5-shared-0a-s101-desk", "phase": "A", "scale": "desk",
        "n_vehicles": 4, "n_m0": 2, "m_subchannels": 5, "m0_pool": None,
        "partition": "shared", "mode": "0a", "seed": 101,
        "train_episodes": 1, "eval_episodes": 1,
        "config_digest": "c" * 64, "wall_time_s": 0.3,
        "metrics": {
            "m0_pdr_mean": 0.7, "m1_pdr_mean": 0.6, "m0_collision_rate": 0.3,
            "m0_within_pool_collision_rate": 0.3, "m0_sinr_mean_db": 9.0,
            "m0_pdr_p05_intra": 0.2,
        },
        "analysis": {
            "nash_floor": 0.5904, "within_pool_ceiling": 0.4, "rho_pool": 0.4,
            "pigeonhole_min_fraction": 0.0, "cross_class_residual": 0.5904,
        },
    }
    ledger.append_entry(path, base)
    better = json.loads(json.dumps(base))
    better["run_id"] = "D-N4-M5-p2-separated-0c-s101-desk"
    better["phase"] = "D"
    better["partition"] = "separated"
    better["m0_pool"] = 2
    better["mode"] = "0c"
    better["metrics"]["m0_pdr_mean"] = 0.99
    better["metrics"]["m1_pdr_mean"] = 0.65
    ledger.append_entry(path, better)
    return path


class TestReportExport:
    def test_report_prints_baseline_and_status(self, capsys, tmp_path):
        path = write_baseline_ledger(tmp_path)
        code, out, _ = run_cli(capsys, "report", "--ledger", path)
        assert code == 0
        assert "baseline: phase A N=4 M=5 shared" in out
        assert "strict Pareto" in out

    def test_report_without_baseline_fails(self, capsys, tmp_path):
        entry = ledger.read_ledger(write_baseline_ledger(tmp_path))[1]
        path = str(tmp_path / "no_baseline.jsonl")
        ledger.append_entry(path, entry)
        code, _, err = run_cli(capsys, "report", "--ledger", path)
        assert code == 1
        assert "baseline" in err

    def test_export_flattens_to_csv(self, capsys, tmp_path):
        path = write_baseline_ledger(tmp_path)
        csv_path = tmp_path / "runs.csv"
        code, out, _ = run_cli(capsys, "export", "--ledger", path,
                               "--csv", str(csv_path))
        assert code == 0
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 3              # header + two runs
        assert lines[0].startswith("schema_version,run_id")


# ------------------------------------------------------------ advisory / escalate


class TestAdvisory:
    def _snapshot(self, tmp_path, rows):
        path = tmp_path / "snapshot.csv"
        lines = ["vehicle_id,position_m,lane,speed_mps"]
        lines += [f"{vid},{pos},{lane},{spd}" for vid, pos, lane, spd in rows]
        path.write_text("\n".join(lines) + "\n")
        return str(path)

    def test_feasible_assignment_csv(self, capsys, tmp_path):
        snap = self._snapshot(tmp_path, [
            (0, 0.0, 0, 30.0), (1, 30.0, 0, 30.0), (2, 1500.0, 0, 30.0)])
        out_csv = tmp_path / "assign.csv"
        code, out, _ = run_cli(capsys, "advisory", "--snapshot", snap,
                               "--colors", "2", "--out", str(out_csv))
        assert code == 0
        assert "sub-zones=3 edges=1" in out
        assert "reuse_factor=1.500" in out
        lines = out_csv.read_text().splitlines()
        assert lines[0] == "subzone_id,vehicle_id,subchannel"
        assignment = {int(l.split(",")[0]): int(l.split(",")[2]) for l in lines[1:]}
        assert assignment[0] != assignment[1]

    def test_infeasible_is_exit_one(self, capsys, tmp_path):
        snap = self._snapshot(tmp_path, [
            (0, 0.0, 0, 30.0), (1, 10.0, 0, 30.0), (2, 20.0, 0, 30.0)])
        code, _, err = run_cli(capsys, "advisory", "--snapshot", snap,
                               "--colors", "2")
        assert code == 1
        assert "infeasible: sub-zone 2" in err

    def test_empty_snapshot_fails(self, capsys, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("vehicle_id,position_m,lane,speed_mps\n")
        code, _, err = run_cli(capsys, "advisory", "--snapshot", str(path))
        assert code == 1
        assert "no vehicles" in err


class TestEscalate:
    def test_scripted_lifecycle(self, capsys, tmp_path):
        events = tmp_path / "events.jsonl"
        script = [
            {"c1_sensor_verified": True, "c2_density_exceeded": True,
             "c3_preauthorized": True, "now": 0.0},
            {"c1_sensor_verified": False, "c2_density_exceeded": False,
             "c3_preauthorized": False, "now": 5.0, "hazard_resolved": True},
        ]
        events.write_text("\n".join(json.dumps(s) for s in script) + "\n")
        code, out, _ = run_cli(capsys, "escalate", "--events", str(events))
        assert code == 0
        assert "t=0.0: phase=mandatory_stop" in out
        assert "t=5.0: phase=cancelled" in out
        assert "log entries: 2 (chain verified)" in out

    def test_missing_events_file(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "escalate", "--events",
                               str(tmp_path / "none.jsonl"))
        assert code == 1
        assert err.startswith("error:")


class TestParser:
    def test_unknown_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_unknown_phase_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["phase", "Z", "--out", "x.jsonl"])
        assert exc.value.code == 2
