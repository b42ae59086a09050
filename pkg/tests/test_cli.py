import json

import jsonschema
import numpy as np
import pytest

from bbglm import dataset as ds
from bbglm.cli import main
from bbglm.reports import read_matrix_csv, validate_report

VASO = ["--data", "@vaso", "--derive", "lv=log(volume)", "--derive", "lr=log(rate)",
        "--family", "binomial", "--response", "response"]


def run(*argv):
    return main([str(a) for a in argv])


def load(path):
    report = json.loads(path.read_text())
    validate_report(report)
    return report


def test_mean_ci(tmp_path):
    out = tmp_path / "ci.json"
    assert run("mean-ci", "--data", "@income", "--response", "income",
               "--population-size", 648, "--out", out) == 0
    r = load(out)
    assert round(r["mean"], 1) == 67.1
    assert [round(v, 1) for v in r["z_interval"]] == [60.1, 74.0]
    assert [round(v, 1) for v in r["fpc_interval"]] == [60.6, 73.6]


def test_tabulate(tmp_path):
    out = tmp_path / "support.json"
    assert run("tabulate", "--data", "@vaso", "--out", out) == 0
    r = load(out)
    assert r["n"] == 39 and r["d"] == 38
    assert sum(row["count"] for row in r["rows"]) == 39


def test_fit(tmp_path):
    out = tmp_path / "fit.json"
    assert run("fit", *VASO, "--terms", "lv,lr", "--out", out) == 0
    r = load(out)
    assert [round(c["estimate"], 2) for c in r["coefficients"]] == [-2.88, 5.18, 4.56]
    assert r["status"] == "ok" and r["iterations"] > 0


def test_bb_outputs_and_determinism(tmp_path):
    paths = []
    for k in range(2):
        d, s = tmp_path / f"d{k}.csv", tmp_path / f"s{k}.json"
        assert run("bb", *VASO, "--terms", "lv,lr", "--draws", 1000, "--seed", 4,
                   "--out-draws", d, "--out-summary", s) == 0
        paths.append((d, s))
    lines = paths[0][0].read_text().splitlines()
    assert len(lines) == 1001 and lines[0].split(",") == ["(Intercept)", "lv", "lr"]
    assert paths[0][0].read_bytes() == paths[1][0].read_bytes()
    assert paths[0][1].read_bytes() == paths[1][1].read_bytes()
    meta = load(paths[0][1])["meta"]
    assert meta["master_seed"] == 4 and meta["M_requested"] == 1000
    assert meta["M_effective"] + meta["excluded"] == 1000


def test_bb_threads_flag_is_invisible_in_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run("bb", *VASO, "--terms", "lv,lr", "--draws", 600, "--out-draws", a, "--threads", 1,
        "--out-summary", tmp_path / "x.json")
    run("bb", *VASO, "--terms", "lv,lr", "--draws", 600, "--out-draws", b, "--threads", 3,
        "--out-summary", tmp_path / "y.json")
    assert a.read_bytes() == b.read_bytes()


def test_bb_equal_weights_hook(tmp_path):
    fit, summ = tmp_path / "fit.json", tmp_path / "s.json"
    run("fit", *VASO, "--terms", "lv,lr", "--out", fit)
    assert run("bb", *VASO, "--terms", "lv,lr", "--draws", 25, "--equal-weights",
               "--out-summary", summ) == 0
    ml = [c["estimate"] for c in load(fit)["coefficients"]]
    post = load(summ)["parameters"]
    np.testing.assert_allclose([p["pmean"] for p in post], ml, atol=1e-9)
    np.testing.assert_allclose([p["median"] for p in post], ml, atol=1e-9)


def test_bands(tmp_path):
    out = tmp_path / "bands.csv"
    assert run("bands", "--data", "@vaso", "--derive", "lt=log(volume)+log(rate)",
               "--family", "binomial", "--response", "response", "--terms", "lt",
               "--draws", 300, "--grid", "lt=-1:2:13", "--out", out) == 0
    header, mat = read_matrix_csv(out)
    assert header == ["lt", "ml_fit", "ml_lower", "ml_upper",
                      "bayes_median", "bayes_lower", "bayes_upper"]
    assert mat.shape == (13, 7)


def test_density_from_draws(tmp_path):
    d = tmp_path / "d.csv"
    run("bb", "--data", "@income", "--family", "gaussian", "--response", "income",
        "--draws", 500, "--out-draws", d, "--out-summary", tmp_path / "s.json")
    out = tmp_path / "dens.csv"
    assert run("density", "--draws", d, "--column", "(Intercept)", "--out", out) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "curve,x,y"
    assert sum(r.startswith("kde,") for r in rows) == 512
    assert run("density", "--data", "@income", "--column", "income", "--out", out) == 0


def test_eliminate(tmp_path):
    out = tmp_path / "trace.json"
    assert run("eliminate", "--data", "@absence", "--response", "days",
               "--candidates", "absence", "--draws-per-step", 200, "--seed", 1,
               "--out", out) == 0
    r = load(out)
    assert r["steps"][-1]["dropped"] is None
    assert all(p["ratio"] >= 2 for p in r["steps"][-1]["parameters"]
               if p["name"] != "(Intercept)")


def test_usage_errors(tmp_path, capsys):
    assert run("fit", "--data", "@vaso", "--family", "poisson", "--response", "response",
               "--trials", "rate") == 1
    assert "requires --family binomial" in capsys.readouterr().err
    assert run("fit", "--bogus") == 1
    assert run("nope") == 1
    assert run("fit", "--data", str(tmp_path / "missing.csv"), "--family", "gaussian",
               "--response", "y") == 1


def test_numerical_failure_exit_code(tmp_path):
    data = tmp_path / "sep.csv"
    ds.write_csv(ds.Dataset.from_columns({"x": list(range(10)), "y": [0] * 5 + [1] * 5}), data)
    out = tmp_path / "s.json"
    assert run("bb", "--data", data, "--family", "binomial", "--response", "y",
               "--terms", "x", "--draws", 50, "--out-summary", out) == 2
    r = load(out)
    assert r["meta"]["kind"] == "failure" and r["status"] == "diverged"


@pytest.mark.parametrize("kind", ["support", "fit", "posterior", "trace", "mean-ci", "failure"])
def test_schemas_reject_missing_meta(kind):
    from bbglm.reports import schema
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"meta": {"kind": kind}}, schema(kind))
