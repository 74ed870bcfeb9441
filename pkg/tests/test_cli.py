import json

import pytest

from tlx.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_threshold_robust_pca(capsys, tmp_path):
    out_file = tmp_path / "t.json"
    code, out, _ = run(capsys, "threshold", "--family", "robust_pca", "--rows", "2", "--cols", "3",
                       "--out", str(out_file))
    assert code == 0
    assert out.strip() == "gamma_bar 2.449489742783178"
    doc = json.loads(out_file.read_text())
    assert doc["rule"] == "lipschitz_truncated"
    assert doc["gamma_bar"] == pytest.approx(6 ** 0.5)


def test_threshold_generated_instance_with_replay(capsys):
    code, out, _ = run(capsys, "threshold", "--family", "sparse_ols", "--seed", "3", "--verify")
    assert code == 0
    assert out.startswith("gamma_bar ")


def test_counterexample(capsys, tmp_path):
    out_file = tmp_path / "cx.json"
    code, _, _ = run(capsys, "counterexample", "--gamma", "1", "--out", str(out_file))
    assert code == 0
    doc = json.loads(out_file.read_text())
    assert doc["probe_pass"] and not doc["sampling_pass"]


def test_missing_experiment_config(capsys, tmp_path):
    code, _, err = run(capsys, "experiment", "--config", str(tmp_path / "missing.json"))
    assert code == 1
    assert "missing.json" in err


@pytest.mark.parametrize("argv", [[], ["frobnicate"]])
def test_unknown_or_missing_command(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert "usage" in err


def test_eval_and_prox(capsys, tmp_path):
    code, out, _ = run(capsys, "eval", "--x", "[3, 1, 2]", "--K", "1")
    assert (code, out.strip()) == (0, "value 3.0")
    out_file = tmp_path / "p.json"
    code, _, _ = run(capsys, "prox", "--x", "[2, -3]", "--K", "1", "--gamma", "10", "--addon", "nonneg",
                     "--verify", "--out", str(out_file))
    doc = json.loads(out_file.read_text())
    assert code == 0
    assert doc["point"] == [2.0, 0.0]
    assert doc["oracle_gap"] <= 1e-12


def test_eval_reads_config(capsys, tmp_path):
    cfg = tmp_path / "e.json"
    cfg.write_text(json.dumps({"x": [[3, 0], [0, 1]], "K": 1}))
    code, out, _ = run(capsys, "eval", "--config", str(cfg))
    assert code == 0
    assert float(out.split()[1]) == pytest.approx(1.0)


def test_solve_and_check_round_trip(capsys, tmp_path):
    inst, rep = tmp_path / "inst.json", tmp_path / "rep.json"
    code, out, _ = run(capsys, "solve", "--family", "sparse_ols", "--seed", "2", "--save-instance", str(inst),
                       "--out", str(rep))
    assert code == 0
    doc = json.loads(rep.read_text())
    assert doc["converged"]
    assert doc["cardinality"][0] <= doc["K"][0]
    code, out, _ = run(capsys, "check", "--instance", str(inst), "--point", json.dumps(doc["final_point"]),
                       "--gamma", *map(str, doc["gamma"]), "--samples", "100")
    assert code == 0
    assert "pass=True" in out


def test_check_flags_origin(capsys, tmp_path):
    code, out, _ = run(capsys, "check", "--family", "sparse_ols", "--point", json.dumps([0.0] * 10))
    assert code == 3
    assert "pass=False" in out


def test_solve_unsupported_combination(capsys):
    code, _, err = run(capsys, "solve", "--family", "portfolio")
    assert code == 2
    assert "simplex" in err


def test_bad_input_exit_code(capsys):
    code, _, _ = run(capsys, "eval", "--x", "[1, 2", "--K", "1")
    assert code == 1
    code, _, _ = run(capsys, "solve", "--family", "sparse_ols", "--dim", "n")
    assert code == 1


def test_experiment_command(capsys, tmp_path):
    cfg = tmp_path / "exp.json"
    csv_path = tmp_path / "rows.csv"
    cfg.write_text(json.dumps({"family": "sparse_ols", "seeds": [0, 1], "gamma_grid": [1.001],
                               "outputs": {"csv": str(csv_path)}}))
    code, out, _ = run(capsys, "experiment", "--config", str(cfg))
    assert code == 0
    assert "0 violations" in out
    assert len(csv_path.read_text().splitlines()) == 3
