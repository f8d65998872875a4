import hashlib
import json

import pytest
from click.testing import CliRunner

from fracsemilinear import __version__, regression
from fracsemilinear.cli import canonical, main


@pytest.fixture
def runner():
    return CliRunner()


def _rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[1:]]


def test_audit_example(runner):
    res = runner.invoke(main, ["audit", "--kind", "green", "--alpha", "1", "--dim", "3", "--samples", "125"])
    assert res.exit_code == 0, res.output
    assert "kind,alpha,dim,delta_floor,ratio_min,ratio_max,samples,passes" in res.output
    row = _rows(res.output)[0]
    assert row["kind"] == "green" and float(row["ratio_min"]) > 0


def test_criteria_reports_infinite(runner):
    res = runner.invoke(main, ["criteria", "--alpha", "1", "--W-beta", "0", "--Lambda-p", "3"])
    assert res.exit_code == 0
    rows = {r["criterion"]: r["result"] for r in _rows(res.stdout)}
    assert rows["integral"] == "infinite"
    assert "# status: infinite" in res.stdout


def test_criteria_sweep_from_config(runner, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": [0.5, 1.0], "W_beta": 0, "Lambda_p": [1, 5], "which": ["integral"]}))
    res = runner.invoke(main, ["criteria", "--config", str(cfg)])
    assert res.exit_code == 0
    out = {(float(r["alpha"]), float(r["Lambda_p"])): r["result"] for r in _rows(res.stdout)}
    assert out == {(0.5, 1.0): "finite", (0.5, 5.0): "infinite", (1.0, 1.0): "finite", (1.0, 5.0): "infinite"}


def test_empty_config_exit_one(runner, tmp_path):
    cfg = tmp_path / "empty.json"
    cfg.write_text("{}")
    res = runner.invoke(main, ["solve", "--config", str(cfg)])
    assert res.exit_code == 1
    assert "required property" in res.output


def test_unknown_key_rejected(runner, tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"alpha": 1, "dim": 3, "kinds": ["green"], "colour": "red"}))
    res = runner.invoke(main, ["audit", "--config", str(cfg)])
    assert res.exit_code == 1
    assert "colour" in res.output


def test_domain_error_exit_one(runner):
    res = runner.invoke(main, ["kernel", "eval", "--alpha", "1", "--dim", "3", "--kind", "green", "--x", "0,0,0"])
    assert res.exit_code == 1


def test_metadata_and_format(runner, tmp_path):
    out = tmp_path / "k.csv"
    args = ["kernel", "eval", "--alpha", "1", "--dim", "3", "--kind", "green", "--x", "0,0,0", "--y", "0.5,0,0",
            "--out", str(out)]
    assert runner.invoke(main, args).exit_code == 0
    text = out.read_text()
    doc = {"alpha": 1.0, "dim": 3, "kind": "green", "points": [{"x": [0.0, 0.0, 0.0], "y": [0.5, 0.0, 0.0]}],
           "radius": 1.0}
    assert f"# fracsemilinear {__version__}" in text
    assert hashlib.sha256(canonical(doc).encode()).hexdigest() in text
    value = _rows(text)[0]["value"]
    assert value == "1.7549343795154568e-01"
    assert len(value.split("e")[0].replace(".", "")) == 17


def test_json_output(runner):
    res = runner.invoke(main, ["kernel", "eval", "--alpha", "1", "--dim", "3", "--kind", "killing", "--x", "0,0,0",
                               "--format", "json"])
    doc = json.loads(res.stdout)
    assert doc["version"] == __version__ and doc["command"] == "kernel-eval"
    assert doc["rows"][0]["value"] == pytest.approx(4 / 3.141592653589793, rel=1e-12)


def test_mc_byte_identical(runner, tmp_path):
    args = ["mc", "--alpha", "1", "--dim", "3", "--kind", "poisson", "--beta2", "0.25", "--point", "0.3,0,0",
            "--samples", "3000", "--seed", "5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert runner.invoke(main, args + ["--out", str(a)]).exit_code == 0
    assert runner.invoke(main, args + ["--out", str(b)]).exit_code == 0
    assert a.read_bytes() == b.read_bytes()


def test_solve_contraction_exit_two(runner):
    res = runner.invoke(main, ["solve", "--alpha", "1", "--dim", "3", "--sign", "general", "--Lambda-p", "1",
                               "--h", "1", "--m", "5", "--grid-points", "24"])
    assert res.exit_code == 2
    assert "contraction" in res.output


def test_solve_infinite_criterion_exit_two(runner):
    res = runner.invoke(main, ["solve", "--alpha", "1", "--dim", "3", "--Lambda-p", "4", "--h", "1", "--m", "0.1"])
    assert res.exit_code == 2
    assert "criterion integral" in res.output


def test_solve_nonconvergence_exit_three_with_trace(runner, tmp_path):
    out = tmp_path / "t.csv"
    res = runner.invoke(main, ["solve", "--alpha", "1", "--dim", "3", "--Lambda-p", "2", "--h", "1",
                               "--m-fraction", "0.5", "--k-max", "2", "--grid-points", "32", "--out", str(out)])
    assert res.exit_code == 3
    rows = _rows(out.read_text())
    assert [r["k"] for r in rows] == ["1", "2"]
    assert "# status: nonconvergence" in out.read_text()


def test_solve_monotone(runner, tmp_path):
    tr = tmp_path / "trace.csv"
    res = runner.invoke(main, ["solve", "--alpha", "1", "--dim", "3", "--Lambda-p", "2", "--h", "1",
                               "--m-fraction", "0.5", "--grid-points", "32", "--trace-out", str(tr)])
    assert res.exit_code == 0
    assert all(r["monotone"] == "true" for r in _rows(tr.read_text()))
    assert all(r["scheme"] == "monotone" for r in _rows(res.stdout))


def test_threshold_scan(runner):
    res = runner.invoke(main, ["threshold-scan", "--alpha", "1"])
    rows = _rows(res.stdout)
    assert [r["exponent"] for r in rows] == ["finite", "infinite", "infinite"]
    assert all(r["agree"] == "true" for r in rows)


def test_trace_command(runner):
    res = runner.invoke(main, ["trace", "--alpha", "1", "--dim", "3", "--field", "martin_sigma", "--k", "8"])
    assert res.exit_code == 0
    row = _rows(res.stdout)[0]
    assert abs(float(row["relative"]) - 1) < 0.02
    assert float(row["moment_0"]) == float(row["mass"])
    assert all(float(row[f"moment_{i}"]) == 0.0 for i in range(1, 5))


def test_trace_poisson_needs_beta2(runner):
    res = runner.invoke(main, ["trace", "--alpha", "1", "--dim", "3", "--field", "poisson_power"])
    assert res.exit_code == 1


def test_profile_regimes(runner):
    res = runner.invoke(main, ["profile", "--alpha", "1", "--dim", "3", "--which", "regimes", "--beta", "0.25"])
    row = _rows(res.stdout)[0]
    assert row["regime"] == "power-beta" and abs(float(row["slope"]) + 0.25) < 0.05


def test_profile_flags_divergence(runner):
    res = runner.invoke(main, ["profile", "--alpha", "1", "--dim", "3", "--which", "poisson", "--beta", "0.5"])
    assert res.exit_code == 0
    assert all(r["status"] == "divergent" for r in _rows(res.stdout))


def test_kato_command(runner):
    res = runner.invoke(main, ["kato", "--alpha", "1", "--dim", "3", "--beta", "0.5"])
    assert res.exit_code == 0
    assert all(r["passes"] == "true" for r in _rows(res.stdout))


def test_regress_mismatch_exit_four(runner, monkeypatch):
    bad = regression.Golden("broken", 2.0, 1e-12, lambda: 1.0, "deliberately wrong")
    monkeypatch.setattr(regression, "GOLDEN", (bad,))
    res = runner.invoke(main, ["regress"])
    assert res.exit_code == 4
    assert "mismatch: broken" in res.output


def test_regress_subset(runner):
    res = runner.invoke(main, ["regress", "--name", "green_center_half", "--name", "killing_center"])
    assert res.exit_code == 0
    assert len(_rows(res.stdout)) == 2
