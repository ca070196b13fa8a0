import csv
import json

import pytest

from mixres.cli import main
from mixres.harness import ConfigError, StudySpec, bundled_config_path, load_config, load_study, parse_config, run_study


def _doc(**over):
    doc = {
        "schema": 1,
        "problem": "ball-d2-dirichlet-quadratic",
        "network": {"widths": [2, 8, 3], "activation": "tanh", "weight_bound": 1.0},
        "boundary": {"kind": "dirichlet", "g": "manufactured"},
        "train": {"steps": 20, "batch": 128, "lr": 0.01, "seed": 0},
        "eval": {"n_quad": 2000, "seed": 1},
    }
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(doc.get(k), dict):
            doc[k] = {**doc[k], **v}
        else:
            doc[k] = v
    return doc


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def test_bundled_config_parses():
    run = load_config(bundled_config_path())
    assert run.widths == (2, 32, 32, 3) and run.train.steps == 5000 and run.train.batch == 4096
    assert run.train.learning_rate == 1e-3 and run.kind == "dirichlet"


@pytest.mark.parametrize(
    "over, msg",
    [
        (dict(schema=2), "schema"),
        (dict(extra=1), "unknown key"),
        (dict(train={"learning_rate": 0.1}), "unknown key"),
        (dict(train={"steps": 1.5}), "integer"),
        (dict(network={"widths": [2, 8, 2]}), "d\\+1"),
        (dict(network={"widths": [2, 8, 3], "depth": 3}), "disagrees"),
        (dict(boundary={"kind": "neumann"}), "does not match"),
        (dict(boundary={"g": "zero"}), "manufactured"),
        (dict(problem="ball-d2-dirichlet-cubic"), "unknown problem"),
        (dict(train={"optimizer": "lbfgs"}), "optimizer"),
        (dict(network={"activation": "relu"}), "activation"),
    ],
)
def test_config_errors(over, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(_doc(**over))


def test_study_spec_validation(tmp_path):
    with pytest.raises(ConfigError):
        load_study(_write(tmp_path, _doc()))
    with pytest.raises(ConfigError, match="unknown key"):
        load_study(_write(tmp_path, _doc(study={"sample_counts": [64], "repeats": 2})))
    run, _ = parse_config(_doc())
    with pytest.raises(ConfigError):
        StudySpec(run, (256, 64))


def test_study_rows_and_determinism(tmp_path):
    spec = load_study(_write(tmp_path, _doc(study={"sample_counts": [32, 64], "trials": 2})))
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    rows, summaries, _ = run_study(spec, out=out1, include_timing=False)
    run_study(spec, out=out2, parallel=2, include_timing=False)
    assert out1.read_bytes() == out2.read_bytes()
    table = list(csv.DictReader(out1.open(newline="")))
    assert [(r["N"], r["trial"]) for r in table] == [("32", "0"), ("32", "1"), ("32", "mean"),
                                                     ("64", "0"), ("64", "1"), ("64", "mean")]
    assert float(table[2]["h1_error"]) == pytest.approx((rows[0]["h1_error"] + rows[1]["h1_error"]) / 2)
    assert all(r["wall_time"] == "0" or float(r["wall_time"]) == 0.0 for r in table)
    assert len(summaries) == 2 and summaries[0]["h1_error_stderr"] > 0


# ---------------------------------------------------------------- CLI


def test_cli_bounds_worked(capsys):
    assert main(["bounds", "--eps", "0.5", "--dim", "2", "--mu", "0.5", "--json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert (rep["depth"], rep["nnz"], rep["weight_bound"]) == (2, 16, 67108864.0)
    assert rep["N"] == 2**244


def test_cli_bounds_eps_one(capsys):
    assert main(["bounds", "--eps", "1", "--dim", "3", "--mu", "0.5", "--json"]) == 0
    out = capsys.readouterr()
    rep = json.loads(out.out)
    assert rep["nnz"] == 1 and rep["N"] == 1
    assert "warning" in out.err


def test_cli_bounds_arch_and_problem(capsys):
    argv = ["bounds", "--arch", "2,3,3", "--weight-bound", "1", "--N", "10000",
            "--problem", "ball-d2-dirichlet-quadratic-varcoef", "--json"]
    assert main(argv) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["nnz"] == 21 and rep["coercivity"][0] == pytest.approx(1.9)
    assert main(["bounds", "--arch", "2,3,3", "--weight-bound", "1", "--N", "100",
                 "--problem", "ball-d2-dirichlet-quadratic-steep"]) == 3
    assert "insensible" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [["bounds", "--eps", "0.5", "--dim", "2", "--mu", "1.5"],
                                  ["bounds", "--dim", "2"], ["verify", "--suite", "nope"], ["frobnicate"]])
def test_cli_invalid_inputs_exit_2(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_cli_train_writes_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, _doc())
    out = tmp_path / "run"
    assert main(["--quiet", "train", cfg, "--out", str(out), "--json", "--no-timing"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert set(summary) >= {"final_loss", "relative_h1", "h1_error"} and "wall_time" not in summary
    for name in ("checkpoint.json", "train_log.jsonl", "report.json"):
        assert (out / name).is_file()
    first = (out / "report.json").read_bytes()
    assert main(["--quiet", "train", cfg, "--out", str(out), "--no-timing"]) == 0
    assert (out / "report.json").read_bytes() == first


def test_cli_seed_flag_overrides(tmp_path, capsys):
    cfg = _write(tmp_path, _doc())
    main(["--quiet", "--json", "train", cfg, "--out", str(tmp_path / "a"), "--no-timing"])
    a = json.loads(capsys.readouterr().out)
    main(["--quiet", "--json", "--seed", "5", "train", cfg, "--out", str(tmp_path / "b"), "--no-timing"])
    b = json.loads(capsys.readouterr().out)
    assert a["final_loss"] != b["final_loss"]


def test_cli_train_error_codes(tmp_path, capsys):
    assert main(["train", str(tmp_path / "missing.json")]) == 2
    assert main(["train", _write(tmp_path, _doc(extra=0))]) == 2
    steep = _doc(problem="ball-d2-dirichlet-quadratic-steep")
    assert main(["train", _write(tmp_path, steep), "--out", str(tmp_path / "s")]) == 3
    assert "relatively insensible variation" in capsys.readouterr().err
    wild = _doc(network={"weight_bound": 1000.0}, train={"optimizer": "sgd", "lr": 50.0, "steps": 50})
    assert main(["--quiet", "train", _write(tmp_path, wild), "--out", str(tmp_path / "w")]) == 4


def test_cli_verify_boundary(capsys):
    assert main(["--quiet", "verify", "--suite", "boundary"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_cli_study(tmp_path, capsys):
    spec = _write(tmp_path, _doc(study={"sample_counts": [32, 64], "trials": 1, "output": str(tmp_path / "s.csv")}))
    assert main(["--quiet", "study", spec, "--no-timing"]) == 0
    assert (tmp_path / "s.csv").read_text().count("\n") == 5
    assert main(["study", spec, "--parallel", "0"]) == 2


@pytest.mark.parametrize("suite", ["activation", "coercivity", "lipschitz"])
def test_cli_verify_cheap_suites(suite, capsys):
    assert main(["--quiet", "--json", "verify", "--suite", suite]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["passed"] and all(c["suite"] == suite for c in rep["checks"])
