import json

import pytest

from biascorr.cli import main

CFG = {"data": {"scenario": "binary-overlap", "n_train": 300, "n_eval": 300,
                "ptilde": [0.5, 0.5], "seed": 0},
       "train": {"loss": "bayes_ig", "true_marginal": [0.7, 0.3], "steps": 60, "eval_every": 20},
       "eval": {"prevalences": [0.3, 0.001], "histogram_bins": 5},
       "output_dir": "out"}


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("BIASCORR_SEED", raising=False)
    (tmp_path / "cfg.json").write_text(json.dumps(CFG))
    return tmp_path


def _lines(path):
    return path.read_text(encoding="utf-8").splitlines()


def test_synth_quota_and_provenance(workdir):
    argv = ["synth", "--scenario", "binary-overlap", "--n", "2000", "--ptilde", "0.5,0.5",
            "--seed", "1", "--out", "d.csv"]
    assert main(argv) == 0
    lines = _lines(workdir / "d.csv")
    assert lines[0] == "# biascorr " + " ".join(argv)
    labels = [int(r.rsplit(",", 1)[1]) for r in lines[2:]]
    assert len(labels) == 2000 and sum(labels) == 1000
    side = json.loads((workdir / "d.json").read_text())
    assert side["provenance"]["invocation"] == "biascorr " + " ".join(argv)


def test_synth_ordinal(workdir):
    assert main(["synth", "--scenario", "ordinal5", "--n", "1086", "--out", "o.csv"]) == 0
    labels = [int(r.rsplit(",", 1)[1]) for r in _lines(workdir / "o.csv")[2:]]
    counts = [labels.count(k) for k in range(5)]
    assert counts == [82, 217, 489, 217, 81]


def test_synth_rerun_is_byte_identical(workdir):
    argv = ["synth", "--n", "100", "--seed", "4", "--out", "a.csv"]
    main(argv)
    first = (workdir / "a.csv").read_bytes(), (workdir / "a.json").read_bytes()
    main(argv)
    assert first == ((workdir / "a.csv").read_bytes(), (workdir / "a.json").read_bytes())


def test_synth_unwritable_path(workdir, capsys):
    assert main(["synth", "--n", "10", "--out", "missing_dir/x.csv"]) == 1
    assert "missing_dir/x.csv" in capsys.readouterr().err


def test_train_then_eval_reproduces_report(workdir):
    assert main(["train", "--config", "cfg.json"]) == 0
    out = workdir / "out"
    assert {p.name for p in out.iterdir()} == {"params.csv", "trace.jsonl", "report.json"}
    trace = [json.loads(l) for l in _lines(out / "trace.jsonl")]
    assert [r["step"] for r in trace] == [20, 40, 60]
    assert _lines(out / "params.csv")[0] == "# biascorr train --config cfg.json"
    assert main(["eval", "--config", "cfg.json", "--params", "out/params.csv",
                 "--out", "ev.json"]) == 0
    evaluated = json.loads((workdir / "ev.json").read_text())["report"]
    final = trace[-1]["report"]
    for k, v in final.items():
        if isinstance(v, float):
            assert abs(v - evaluated[k]) <= 1e-12
        else:
            assert v == evaluated[k]


def test_nll_and_weighted_match_at_equal_prevalence(workdir):
    cfg = json.loads(json.dumps(CFG))
    cfg["train"]["true_marginal"] = [0.5, 0.5]
    (workdir / "m.json").write_text(json.dumps(cfg))
    main(["train", "--config", "m.json", "--loss", "nll", "--out-dir", "a"])
    main(["train", "--config", "m.json", "--loss", "weighted", "--out-dir", "b"])
    ra = json.loads((workdir / "a/report.json").read_text())
    rb = json.loads((workdir / "b/report.json").read_text())
    assert ra["report"] == rb["report"]
    assert (workdir / "a/params.csv").read_text().splitlines()[1:] == \
        (workdir / "b/params.csv").read_text().splitlines()[1:]


def test_missing_config_exit_2(workdir, capsys):
    assert main(["train", "--config", "nope.json"]) == 2
    assert "nope.json" in capsys.readouterr().err


def test_schema_violation_exit_2(workdir, capsys):
    bad = json.loads(json.dumps(CFG))
    bad["train"]["steps"] = "many"
    (workdir / "bad.json").write_text(json.dumps(bad))
    assert main(["train", "--config", "bad.json"]) == 2
    assert "train/steps" in capsys.readouterr().err


def test_usage_error_exit_2(workdir):
    assert main(["train"]) == 2
    assert main(["frobnicate"]) == 2


def test_env_seed_override(workdir, monkeypatch):
    monkeypatch.setenv("BIASCORR_SEED", "9")
    assert main(["train", "--config", "cfg.json", "--out-dir", "s9"]) == 0
    assert json.loads((workdir / "s9/report.json").read_text())["config"]["seed"] == 9
    monkeypatch.setenv("BIASCORR_SEED", "nine")
    assert main(["train", "--config", "cfg.json"]) == 2


def test_sweep_outputs(workdir):
    argv = ["sweep", "--config", "cfg.json", "--seeds", "5", "--jobs", "1", "--out-dir", "sw"]
    assert main(argv) == 0
    lines = _lines(workdir / "sw/sweep.csv")
    assert lines[0].startswith("# biascorr sweep")
    assert lines[1] == "prevalence,loss,seed,acc,w_acc,ba,ppv,npv,tpr,tnr,auc,exp_log_lik,status"
    assert len(lines) == 2 + 20
    runs = sorted(p.name for p in (workdir / "sw/runs").iterdir())
    assert len(runs) == 60
    rep = json.loads((workdir / "sw/runs/report_bayes_ig_prev0.3_seed0.json").read_text())
    assert rep["provenance"] == "biascorr " + " ".join(argv)
    assert rep["calibration_error"] is not None


def test_sweep_rejects_bad_prevalence(workdir):
    assert main(["sweep", "--config", "cfg.json", "--prevalences", "0.3,1.0"]) == 2
    assert main(["sweep", "--config", "cfg.json", "--losses", "hinge"]) == 2


def test_oracle_check(workdir, capsys):
    assert main(["oracle-check"]) == 0
    assert "100/100 instances pass" in capsys.readouterr().out
    assert main(["oracle-check", "--instances", "1", "--seed", "3"]) == 0
    first = capsys.readouterr().out.split(",")[0]
    main(["oracle-check", "--instances", "1", "--seed", "3"])
    assert capsys.readouterr().out.split(",")[0] == first


def test_oracle_check_zero_tolerance_fails(workdir, capsys):
    assert main(["oracle-check", "--instances", "5", "--tol", "0"]) == 1
    out = capsys.readouterr().out
    assert "FAIL instance seed=" in out
