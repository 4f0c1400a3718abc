import json
from pathlib import Path

import pytest

from practicegp.cli import main
from practicegp.score_perf import Note, Score, build_smf, score_to_json


SCORE_PITCHES = (60, 62, 64, 65)  # C D E F


@pytest.fixture
def score_file(tmp_path):
    score = Score(
        notes=tuple(
            Note(pitch=p, onset_beats=float(i), duration_beats=1.0)
            for i, p in enumerate(SCORE_PITCHES)
        ),
        piece_id="scale4",
    )
    path = tmp_path / "score.json"
    path.write_text(score_to_json(score))
    return path


@pytest.fixture
def dataset_file(tmp_path):
    out = tmp_path / "data.csv"
    assert main(["simulate", "--n", "60", "--seed", "4", "--out", str(out)]) == 0
    return out


class TestFeatures:
    def test_perfect_performance_prints_zeros(self, tmp_path, score_file, capsys):
        midi = tmp_path / "perf.mid"
        midi.write_bytes(build_smf([(p, 480 * i, 240) for i, p in enumerate(SCORE_PITCHES)]))
        assert main(["features", "--score", str(score_file), "--midi", str(midi)]) == 0
        assert capsys.readouterr().out.strip() == "0.0,0.0"

    def test_one_wrong_pitch_quarter(self, tmp_path, score_file, capsys):
        midi = tmp_path / "perf.mid"
        notes = [(60, 0, 240), (61, 480, 240), (64, 960, 240), (65, 1440, 240)]  # D played as C#
        midi.write_bytes(build_smf(notes))
        assert main(["features", "--score", str(score_file), "--midi", str(midi)]) == 0
        assert capsys.readouterr().out.strip() == "0.25,0.0"

    def test_missing_file_is_data_error(self, capsys):
        assert main(["features", "--score", "missing.json", "--midi", "x.mid"]) == 2


class TestSimulate:
    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", "--n", "40", "--seed", "9", "--out", str(a)])
        main(["simulate", "--n", "40", "--seed", "9", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_always_rule(self, tmp_path):
        out = tmp_path / "p.csv"
        main(["simulate", "--n", "20", "--rule", "always-pitch", "--out", str(out)])
        rows = out.read_text().strip().split("\n")[1:]
        assert all(row.split(",")[4] == "0" for row in rows)

    def test_unknown_rule_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["simulate", "--rule", "bogus", "--out", str(tmp_path / "x.csv")])
        assert err.value.code == 1


class TestTrainEvalMap:
    def test_pipeline_and_deterministic_trace(self, tmp_path, dataset_file, capsys):
        model1, trace1 = tmp_path / "m1.json", tmp_path / "t1.csv"
        model2, trace2 = tmp_path / "m2.json", tmp_path / "t2.csv"
        args = ["train", "--dataset", str(dataset_file), "--budget", "1", "--seed", "3"]
        assert main(args + ["--out", str(model1), "--trace", str(trace1)]) == 0
        assert main(args + ["--out", str(model2), "--trace", str(trace2)]) == 0
        assert trace1.read_bytes() == trace2.read_bytes()
        assert model1.read_bytes() == model2.read_bytes()

        assert main(["eval", "--model", str(model1), "--dataset", str(dataset_file),
                     "--report", str(tmp_path / "report.json")]) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert "gp" in report and "linear" in report
        out = capsys.readouterr().out
        assert "GP policy accuracy" in out

        map_path = tmp_path / "map.csv"
        assert main(["policy-map", "--model", str(model1), "--bpm", "80",
                     "--resolution", "5", "--out", str(map_path)]) == 0
        lines = map_path.read_text().strip().split("\n")
        assert lines[0].startswith("t_pre,p_pre,chosen_pm")
        assert len(lines) == 26

    def test_unknown_kernel_is_usage_error(self, dataset_file, tmp_path):
        with pytest.raises(SystemExit) as err:
            main(["train", "--dataset", str(dataset_file), "--family", "cubic",
                  "--out", str(tmp_path / "m.json")])
        assert err.value.code == 1

    def test_train_missing_dataset_data_error(self, tmp_path):
        assert main(["train", "--dataset", str(tmp_path / "none.csv"),
                     "--out", str(tmp_path / "m.json")]) == 2

    def test_holdout_reporting(self, tmp_path, dataset_file, capsys):
        model = tmp_path / "m.json"
        assert main(["train", "--dataset", str(dataset_file), "--budget", "1", "--seed", "1",
                     "--holdout", "0.25", "--out", str(model)]) == 0
        assert "held-out accuracy" in capsys.readouterr().out
