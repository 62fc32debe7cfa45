import json
import os

import numpy as np
import pandas as pd
import pytest

from rulkit import artifacts, cli, data


@pytest.fixture(scope="module")
def small_csv(tmp_path_factory):
    table = data.synth_generate(3, 150, seed=60)
    frame = pd.DataFrame(table.x, columns=table.feature_names)
    frame["rul"] = table.rul
    path = tmp_path_factory.mktemp("csv") / "cells.csv"
    frame.to_csv(path, index=False)
    return str(path)


@pytest.fixture(scope="module")
def model_file(tmp_path_factory, smoke_artifact):
    path = tmp_path_factory.mktemp("model") / "model.json"
    artifacts.save_model(str(path), smoke_artifact)
    return str(path)


def write_events(path, lines):
    with open(path, "w") as fh:
        for line in lines:
            fh.write(json.dumps(line) + "\n")
    return str(path)


class TestDataInspect:
    def test_summary_output(self, small_csv, capsys):
        assert cli.main(["data-inspect", "--data", small_csv]) == 0
        out = capsys.readouterr().out
        assert "rows: 450" in out
        assert "tercile thresholds" in out
        assert "class counts" in out

    def test_balanced_class_counts_reported(self, small_csv, capsys):
        cli.main(["data-inspect", "--data", small_csv])
        out = capsys.readouterr().out
        counts = [int(tok.split("=")[1]) for tok in
                  out.splitlines()[-1].replace("class counts: ", "").split()]
        assert max(counts) - min(counts) <= 1

    def test_missing_file_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["data-inspect", "--data", "/nonexistent/file.csv"])
        assert exc.value.code == 2

    def test_empty_file_exits_3(self, tmp_path, capsys):
        path = tmp_path / "empty.csv"
        path.write_text("")
        assert cli.main(["data-inspect", "--data", str(path)]) == 3
        assert "no header" in capsys.readouterr().err

    def test_snapshot_written(self, small_csv, tmp_path, capsys):
        out = str(tmp_path / "snap.json")
        cli.main(["data-inspect", "--data", small_csv, "--out", out])
        table, thresholds = data.load_snapshot(out)
        assert table.n_rows == 450
        assert thresholds.t1 < thresholds.t2

    def test_rul_data_env_var_supplies_default_path(self, small_csv, capsys,
                                                    monkeypatch):
        monkeypatch.setenv("RUL_DATA", small_csv)
        assert cli.main(["data-inspect"]) == 0
        assert "rows: 450" in capsys.readouterr().out


class TestTrain:
    def test_smoke_train_writes_model_report_history(self, small_csv, tmp_path, capsys):
        model = str(tmp_path / "m.json")
        report = str(tmp_path / "r.json")
        hist = str(tmp_path / "h.csv")
        code = cli.main([
            "train", "--model", "mlp", "--data", small_csv, "--out", model,
            "--report", report, "--history-csv", hist, "--profile", "smoke",
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "Training Accuracy" in out
        loaded = artifacts.load_model(model)
        assert loaded.kind == "mlp"
        assert "feature_ranges" in loaded.metadata
        with open(report) as fh:
            assert json.load(fh)["schema"] == "report.v1"
        assert os.path.exists(hist)

    def test_exclude_cycle_index_flag(self, small_csv, tmp_path):
        model = str(tmp_path / "m.json")
        code = cli.main([
            "train", "--model", "gbdt", "--data", small_csv, "--out", model,
            "--profile", "smoke", "--exclude-cycle-index",
        ])
        assert code == 0
        assert "cycle_index" not in artifacts.load_model(model).feature_names

    def test_unknown_model_kind_exits_2(self, small_csv):
        with pytest.raises(SystemExit) as exc:
            cli.main(["train", "--model", "svm", "--data", small_csv])
        assert exc.value.code == 2


class TestCv:
    def test_fold_table_printed(self, small_csv, tmp_path, capsys):
        out = str(tmp_path / "cv.json")
        code = cli.main([
            "cv", "--model", "gbdt", "--data", small_csv, "--folds", "3",
            "--profile", "smoke", "--out", out,
        ])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[1].startswith("Fold 1")
        assert any("Mean Accuracy" in line for line in lines)
        assert any("Standard Deviation" in line for line in lines)
        with open(out) as fh:
            doc = json.load(fh)
        assert len(doc["folds"]) == 3

    def test_identical_tables_across_runs(self, small_csv, capsys):
        args = ["cv", "--model", "gbdt", "--data", small_csv, "--folds", "2",
                "--profile", "smoke", "--seed", "7"]
        cli.main(args)
        first = capsys.readouterr().out
        cli.main(args)
        second = capsys.readouterr().out
        assert first == second

    def test_invalid_fold_count_exits_2(self, small_csv, capsys):
        code = cli.main(["cv", "--model", "gbdt", "--data", small_csv,
                         "--folds", "1", "--profile", "smoke"])
        assert code == 2


class TestSimulate:
    def test_scripted_trace(self, model_file, feature_rows, tmp_path, capsys):
        events = write_events(tmp_path / "events.jsonl", [
            {"kind": "features", "values": feature_rows[2]},
            {"kind": "features", "values": feature_rows[2]},
            {"kind": "features", "values": feature_rows[0]},
            {"kind": "manual", "state": "off"},
            {"kind": "release"},
        ])
        trace = str(tmp_path / "trace.log")
        code = cli.main(["simulate", "--model-file", model_file,
                         "--events", events, "--trace", trace])
        assert code == 0
        lines = open(trace).read().splitlines()
        predict_lines = [l for l in lines if "\tpredict\t" in l]
        assert "SET_RELAY_ON+NOTIFY_CHARGE_NEEDED" in predict_lines[2]
        manual = next(l for l in lines if "\tmanual\t" in l)
        assert "SET_RELAY_OFF" in manual

    def test_trace_byte_identical_across_runs(self, model_file, feature_rows, tmp_path):
        events = write_events(tmp_path / "events.jsonl", [
            {"kind": "features", "values": feature_rows[0]},
            {"kind": "features", "values": feature_rows[2]},
        ])
        t1, t2 = str(tmp_path / "a.log"), str(tmp_path / "b.log")
        cli.main(["simulate", "--model-file", model_file, "--events", events,
                  "--trace", t1])
        cli.main(["simulate", "--model-file", model_file, "--events", events,
                  "--trace", t2])
        assert open(t1, "rb").read() == open(t2, "rb").read()

    def test_empty_events_file(self, model_file, tmp_path):
        events = write_events(tmp_path / "events.jsonl", [])
        trace = str(tmp_path / "trace.log")
        code = cli.main(["simulate", "--model-file", model_file,
                         "--events", events, "--trace", trace])
        assert code == 0
        assert open(trace).read() == ""

    def test_heartbeat_drop_exits_4(self, model_file, feature_rows, tmp_path, capsys):
        events = write_events(tmp_path / "events.jsonl", [
            {"kind": "features", "values": feature_rows[2]},
            {"kind": "drop_heartbeats", "seconds": 10},
            {"kind": "features", "values": feature_rows[2]},
            {"kind": "features", "values": feature_rows[2]},
            {"kind": "features", "values": feature_rows[2]},
            {"kind": "features", "values": feature_rows[2]},
        ])
        trace = str(tmp_path / "trace.log")
        code = cli.main(["simulate", "--model-file", model_file,
                         "--events", events, "--trace", trace])
        assert code == 4
        assert any("FAULT" in line for line in open(trace))

    def test_missing_model_file_exits_2(self, tmp_path):
        events = write_events(tmp_path / "e.jsonl", [])
        code = cli.main(["simulate", "--model-file", "/nope.json",
                         "--events", events])
        assert code == 2


class TestServe:
    def test_missing_model_file_exits_2(self):
        assert cli.main(["serve", "--model-file", "/nope.json"]) == 2
