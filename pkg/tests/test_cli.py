import json
import math

import numpy as np
import pytest

from clfeval.cli import EXIT_CONTRADICTION, EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from clfeval.io import write_matrix_json
from clfeval.matrix import ConfusionMatrix
from clfeval.metrics import DEFAULT_ROSTER, evaluate_all

from conftest import TWO_CLASS


@pytest.fixture
def two_class_json(tmp_path):
    path = tmp_path / "m.json"
    write_matrix_json(ConfusionMatrix.from_array(TWO_CLASS, ["neg", "pos"]), path)
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestEvaluate:
    def test_running_example(self, capsys, two_class_json):
        code, out, _ = run(capsys, "evaluate", "--input", two_class_json, "--metrics", "accuracy,macro_precision", "--format", "json")
        assert code == EXIT_OK
        values = [s["value"] for s in json.loads(out)["scores"]]
        assert values == [0.625, 0.625]

    def test_perfect_predictions(self, capsys, tmp_path):
        path = write(tmp_path, "p.csv", "gold,pred\na,a\nb,b\nc,c\na,a\n")
        code, out, _ = run(capsys, "evaluate", "--input", path, "--format", "json")
        assert code == EXIT_OK
        scores = json.loads(out)["scores"]
        assert len(scores) == len(DEFAULT_ROSTER)
        values = {s["metric"]: s["value"] for s in scores}
        # the betting gain is not normalised: s * (n - 1) for a perfect classifier
        assert values.pop("bookmaker_win") == 4 * 2
        assert set(values.values()) == {1.0}

    def test_unknown_label_line_numbered(self, capsys, tmp_path):
        path = write(tmp_path, "p.csv", "gold,pred\na,a\nb,x\n")
        code, _, err = run(capsys, "evaluate", "--input", path, "--labels", "a,b")
        assert code == EXIT_DATA
        assert "line 3" in err

    def test_malformed_row(self, capsys, tmp_path):
        path = write(tmp_path, "p.csv", "gold,pred\na,a,a\n")
        code, _, err = run(capsys, "evaluate", "--input", path)
        assert code == EXIT_DATA and "line 2" in err

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "evaluate", "--input", tmp_path / "none.csv")[0] == EXIT_DATA

    def test_unknown_metric(self, capsys, two_class_json):
        assert run(capsys, "evaluate", "--input", two_class_json, "--metric", "f7")[0] == EXIT_USAGE

    def test_missing_required_flag(self, capsys):
        assert run(capsys, "evaluate")[0] == EXIT_USAGE

    def test_bit_identical_to_library(self, capsys, tmp_path):
        rng = np.random.default_rng(3)
        cells = rng.random((4, 4)) * 7
        path = tmp_path / "r.json"
        write_matrix_json(ConfusionMatrix.from_array(cells), path)
        code, out, _ = run(capsys, "evaluate", "--input", path, "--calibrated", "--format", "json")
        assert code == EXIT_OK
        got = json.loads(out)["scores"]
        expected = evaluate_all(ConfusionMatrix.from_array(cells), [m for m in DEFAULT_ROSTER] + [m.name + "~" for m in DEFAULT_ROSTER])
        assert [s["metric"] for s in got] == [e.metric.name for e in expected]
        for s, e in zip(got, expected):
            assert (s["value"] is None and math.isnan(e.value)) or s["value"] == float(e.value)

    @pytest.mark.parametrize("fmt", ["table", "csv"])
    def test_text_formats(self, capsys, two_class_json, fmt):
        code, out, _ = run(capsys, "evaluate", "--input", two_class_json, "--metric", "kappa", "--format", fmt)
        assert code == EXIT_OK and "kappa" in out and "0.25" in out

    def test_output_file(self, capsys, two_class_json, tmp_path):
        target = tmp_path / "out.json"
        run(capsys, "evaluate", "--input", two_class_json, "--format", "json", "--output", target)
        assert json.loads(target.read_text())["labels"] == ["neg", "pos"]


class TestCalibrate:
    def test_running_example(self, capsys, two_class_json):
        code, out, _ = run(capsys, "calibrate", "--input", two_class_json, "--format", "json")
        assert code == EXIT_OK
        data = json.loads(out)
        np.testing.assert_allclose(data["matrix"], [[12, 20 / 3], [8, 40 / 3]], rtol=1e-15)
        np.testing.assert_allclose(data["scaling"], [0.8, 4 / 3], rtol=1e-15)

    def test_equal_prevalence_unchanged(self, capsys, tmp_path):
        path = tmp_path / "m.json"
        write_matrix_json(ConfusionMatrix.from_array([[3, 1], [2, 4]]), path)
        data = json.loads(run(capsys, "calibrate", "--input", path, "--format", "json")[1])
        assert data["matrix"] == [[3, 1], [2, 4]] and data["scaling"] == [1.0, 1.0]

    def test_zero_column_names_class(self, capsys, tmp_path):
        path = write(tmp_path, "m.json", '{"labels": ["a", "b"], "matrix": [[1, 0], [1, 0]]}')
        code, _, err = run(capsys, "calibrate", "--input", path)
        assert code == EXIT_DATA and "'b'" in err


class TestCheck:
    def test_mcc_witness(self, capsys):
        code, out, _ = run(capsys, "check", "--metric", "mcc", "--property", "monotonicity", "--trials", "200")
        assert code == EXIT_OK
        assert "mcc monotonicity:" in out and "[seed:zero_agreement]" in out
        assert "contradictions: 0" in out

    def test_trials_zero(self, capsys):
        assert run(capsys, "check", "--trials", "0")[0] == EXIT_USAGE

    def test_unknown_property(self, capsys):
        assert run(capsys, "check", "--property", "fairness")[0] == EXIT_USAGE

    def test_unknown_metric(self, capsys):
        assert run(capsys, "check", "--metric", "nope")[0] == EXIT_USAGE

    def test_contradiction_exit_code(self, capsys, tmp_path):
        path = write(tmp_path, "e.json", json.dumps({"metrics": {"mcc": {"monotonicity": "yes"}}}))
        code, out, _ = run(capsys, "check", "--metric", "mcc", "--property", "monotonicity", "--trials", "200", "--expectations", path, "--format", "json")
        assert code == EXIT_CONTRADICTION
        assert json.loads(out)["contradictions"] == ["mcc monotonicity: expected to hold, got refuted"]

    def test_byte_identical_runs(self, capsys):
        argv = ("check", "--metric", "weighted_f1,macro_precision", "--trials", "300", "--seed", "11", "--format", "json")
        first = run(capsys, *argv)[1]
        second = run(capsys, *argv)[1]
        assert first == second

    def test_csv(self, capsys):
        code, out, _ = run(capsys, "check", "--metric", "accuracy", "--property", "prevalence_invariance", "--trials", "200", "--format", "csv")
        assert code == EXIT_OK
        assert out.splitlines()[1] == "accuracy,prevalence_invariance,refuted,holds_on_sample"


class TestCompare:
    @pytest.fixture
    def systems(self, tmp_path):
        mats = {"alpha": [[5, 1, 0], [2, 6, 1], [1, 1, 7]], "beta": [[4, 2, 1], [3, 5, 0], [1, 1, 7]], "gamma": [[7, 0, 3], [0, 6, 2], [1, 2, 3]]}
        paths = []
        for name, cells in mats.items():
            path = tmp_path / f"{name}.json"
            write_matrix_json(ConfusionMatrix.from_array(cells), path)
            paths.append(path)
        return paths

    def test_identical_systems(self, capsys, tmp_path, systems):
        out_dir = tmp_path / "out"
        code, out, _ = run(capsys, "compare", "--inputs", systems[0], systems[0], "--ensemble", "--output", out_dir)
        assert code == EXIT_OK
        assert "tied winners: alpha#1, alpha#2" in out
        rows = (out_dir / "ranking.csv").read_text().splitlines()[1:]
        assert rows[0].split(",")[1:] == rows[1].split(",")[1:]
        corr = (out_dir / "correlation.csv").read_text()
        assert set(x for line in corr.splitlines()[1:] for x in line.split(",")[1:]) <= {"1.0", ""}

    def test_recall_and_calibrated_kappa_columns(self, capsys, systems):
        code, out, _ = run(capsys, "compare", "--inputs", *systems, "--metrics", "macro_recall,kappa~", "--format", "json")
        assert code == EXIT_OK
        data = json.loads(out)
        ranks = [(r["ranks"]["macro_recall:p=1"], r["ranks"]["kappa~"]) for r in data["ranking"]["rows"]]
        assert all(a == b for a, b in ranks)
        assert data["correlation"]["rho"][0][1] == 1.0

    def test_stdout_sections(self, capsys, systems):
        code, out, err = run(capsys, "compare", "--inputs", *systems, "--metric", "accuracy", "--ensemble")
        assert code == EXIT_OK
        assert "# ranking.csv" in out and "# correlation.csv" in out and "# ensemble.csv" in out
        assert "ensemble winner: alpha" in err

    def test_calibrated_flag_adds_columns(self, capsys, systems):
        out = run(capsys, "compare", "--inputs", *systems, "--metric", "kappa", "--calibrated", "--format", "json")[1]
        assert json.loads(out)["ranking"]["metrics"] == ["kappa", "kappa~"]

    def test_label_mismatch(self, capsys, tmp_path, systems):
        other = write(tmp_path, "o.json", '{"labels": ["x", "y", "z"], "matrix": [[1,0,0],[0,1,0],[0,0,1]]}')
        assert run(capsys, "compare", "--inputs", systems[0], other)[0] == EXIT_DATA

    def test_names(self, capsys, systems):
        out = run(capsys, "compare", "--inputs", *systems, "--names", "x,y,z", "--metric", "accuracy", "--format", "json")[1]
        assert [r["system"] for r in json.loads(out)["ranking"]["rows"]] == ["x", "y", "z"]
        assert run(capsys, "compare", "--inputs", *systems, "--names", "x")[0] == EXIT_USAGE


class TestProject:
    def test_self_consistent(self, capsys, tmp_path):
        cells = np.array([[15.0, 5.0], [10.0, 10.0]])
        s = cells.sum()
        spec = {
            "labels": ["neg", "pos"],
            "recalls": list(np.diag(cells) / cells.sum(axis=0)),
            "class_dist": list(cells.sum(axis=0) / s),
            "pred_dist": list(cells.sum(axis=1) / s),
        }
        path = write(tmp_path, "p.json", json.dumps(spec))
        code, out, _ = run(capsys, "project", "--input", path, "--format", "json")
        assert code == EXIT_OK
        np.testing.assert_allclose(json.loads(out)["precision"], [0.75, 0.5], atol=1e-12)

    def test_perfect_recall(self, capsys):
        out = run(capsys, "project", "--recalls", "1,1", "--class-dist", "0.3,0.7", "--pred-dist", "0.3,0.7", "--format", "json")[1]
        assert json.loads(out)["precision"] == [1.0, 1.0]

    def test_bad_distribution(self, capsys):
        code, _, err = run(capsys, "project", "--recalls", "1,1", "--class-dist", "0.4,0.4", "--pred-dist", "0.5,0.5")
        assert code == EXIT_DATA and "sums to 0.8" in err

    def test_zero_predicted_class(self, capsys):
        assert run(capsys, "project", "--recalls", "1,1", "--class-dist", "0.5,0.5", "--pred-dist", "1,0")[0] == EXIT_DATA

    def test_missing_arguments(self, capsys):
        assert run(capsys, "project", "--recalls", "1,1")[0] == EXIT_USAGE
