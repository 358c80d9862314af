import io
import json
import math
import subprocess
import sys

import pytest

from dinv.cli import fmt, run, to_json
from dinv.finance import black_scholes_call


def call(*argv):
    buf = io.StringIO()
    code = run(list(argv), stdout=buf)
    return code, buf.getvalue()


def rows(text):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def meta(text):
    return dict(ln[2:].split("=", 1) for ln in text.splitlines() if ln.startswith("# "))


def test_fmt_and_json_tokens():
    assert fmt(0.1) == "0.10000000000000001"
    assert float(fmt(0.1)) == 0.1
    assert fmt(math.inf) == "inf"
    doc = json.loads(to_json({"a": [1.0, math.inf], "b": None, "c": True}))
    assert doc == {"a": [1, "inf"], "b": None, "c": True}


# -- check-drift ---------------------------------------------------------------------


def test_check_drift_satisfied():
    code, out = call("check-drift", "--power", "c=1", "alpha=1")
    assert code == 0 and meta(out)["verdict"] == "Satisfied"


def test_check_drift_violated():
    code, out = call("check-drift", "--power", "c=1", "alpha=0.25")
    assert code == 1
    m = meta(out)
    assert m["verdict"] == "Violated" and m["witness_t"] == "[1 4]"


def test_check_drift_constant_table(tmp_path):
    p = tmp_path / "rho.csv"
    p.write_text("t,rho\n0,1\n1,1\n5,1\n")
    code, out = call("check-drift", "--csv", str(p))
    assert code == 1 and meta(out)["verdict"] == "Violated"


@pytest.mark.parametrize(
    "argv",
    [
        ["check-drift", "--power", "c=1"],
        ["check-drift", "--power", "c=1", "beta=2"],
        ["check-drift", "--power", "c=one", "alpha=1"],
        ["check-drift"],
        ["check-drift", "--zero", "--constant", "c=1"],
        ["check-drift", "--csv", "/nonexistent/rho.csv"],
    ],
)
def test_check_drift_input_errors(argv):
    code, out = call(*argv)
    assert code == 2 and out == ""


# -- table -------------------------------------------------------------------------------


def test_table_zero_drift():
    code, out = call("table", "--zero", "--x", "0", "--t", "0.1,1,10")
    assert code == 0
    header, data = rows(out)
    assert header == ["t", "cdf"]
    assert [r[1] for r in data] == ["0.5"] * 3
    assert meta(out)["defect_mass"] == "0.5"


def test_table_constant_drift_row():
    code, out = call("table", "--constant", "c=1", "--x", "0", "--t", "1")
    assert code == 0
    _, data = rows(out)
    assert float(data[0][1]) == pytest.approx(0.8413447460685429, abs=1e-16)


def test_table_power_one_equals_constant_row_for_row():
    grid = "1e-3:1e3:25"
    _, a = call("table", "--power", "c=1", "alpha=1", "--x", "0.7", "--t", grid)
    _, b = call("table", "--constant", "c=1", "--x", "0.7", "--t", grid)
    assert rows(a) == rows(b)


def test_table_refuses_condition_violation():
    code, out = call("table", "--power", "c=1", "alpha=0.25")
    assert code == 1 and out == ""


def test_table_json_with_quantiles():
    code, out = call("table", "--zero", "--x", "1", "--t", "1", "--u", "0.25,0.75", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["command"] == "table"
    assert doc["quantiles"]["quantile"][1] == "inf"
    assert doc["meta"]["defect_mass"] == 0.5


def test_table_csv_quantile_block():
    code, out = call("table", "--constant", "c=1", "--x", "1", "--t", "1", "--u", "0.5")
    assert "# table=quantiles" in out
    assert "u,quantile" in out and "0.5,1" in out


# -- classify ------------------------------------------------------------------------------


def test_classify_power_fixture():
    code, out = call("classify", "--fixture", "power")
    doc = json.loads(out)
    assert code == 0 and doc["case"] == "PowerDrift"
    assert doc["c"] == pytest.approx(3, rel=1e-2) and doc["alpha"] == pytest.approx(2, rel=1e-2)
    assert doc["p"] == pytest.approx(1, rel=1e-2)
    assert len(doc["g_profile"]["t"]) == 24


def test_classify_explosion_from_flags():
    code, out = call("classify", "--power-exp", "c=1", "alpha=1", "b=1", "--phi1", "exp", "a=1", "b=0.5", "k=-0.5")
    doc = json.loads(out)
    assert code == 0 and doc["case"] == "Explosion"
    assert doc["t0"] == pytest.approx(2, rel=1e-2) and doc["p"] == pytest.approx(1, rel=1e-2)


def test_classify_degenerate_and_csv_profile():
    code, out = call("classify", "--fixture", "degenerate", "--format", "csv")
    assert code == 0 and meta(out)["case"] == "Degenerate"
    header, data = rows(out)
    assert header == ["t", "g", "state"] and {r[2] for r in data} == {"inf"}


def test_classify_nonconvergence_exit_code(tmp_path):
    lam = [2.0**-k for k in range(4, 41)]
    p = tmp_path / "phi1.csv"
    p.write_text("lam,value\n" + "".join(f"{v!r},{2 + math.sin(1 / v)!r}\n" for v in lam))
    code, out = call("classify", "--constant", "c=1", "--phi1", f"csv={p}")
    assert code == 3
    doc = json.loads(out)
    assert "error" in doc and doc["profile"]["state"]


def test_classify_needs_family():
    code, _ = call("classify", "--constant", "c=1")
    assert code == 2


# -- price ----------------------------------------------------------------------------------


def test_price_black_scholes_row():
    code, out = call("price", "--s0", "1", "--sigma", "1", "--K", "1", "--t", "1,100")
    assert code == 0
    _, data = rows(out)
    assert float(data[0][1]) == pytest.approx(0.3829249225480263, abs=1e-15)
    assert float(data[-1][1]) < 1.0
    m = meta(out)
    assert m["verdict"] == "Increasing" and m["method"] == "closed"


def test_price_monte_carlo_against_stieltjes():
    code, out = call("price", "--mu", "0.5", "--K", "1.1", "--t", "0.5,2", "--paths", "100000", "--seed", "4")
    assert code == 0 and meta(out)["method"] == "monte-carlo"
    from dinv.finance import GBMSpec, KnotFunction, gbm_terminal_survival, increasing_expectation

    spec = GBMSpec(1.0, 1.0, 0.5)
    for t, price, se in rows(out)[1]:
        t = float(t)
        ref = increasing_expectation(lambda x: gbm_terminal_survival(spec, x, t), KnotFunction.call_payoff(1.1))
        assert abs(float(price) - ref) <= 3 * float(se)


def test_price_counterexample_exit_code():
    code, out = call("price", "--mu", "-5", "--K", "0.5", "--t", "0.01:10:8", "--paths", "20000")
    assert code == 1 and meta(out)["verdict"] == "CounterExample"


def test_price_input_errors():
    assert call("price", "--t", "1")[0] == 2
    assert call("price", "--K", "1", "--sigma", "-1")[0] == 2
    assert call("price", "--K", "1", "--t", "2,1")[0] == 2


def test_price_tabulated_config(tmp_path):
    cfg = tmp_path / "gbm.json"
    cfg.write_text(json.dumps({"s0": 1, "sigma": {"t": [0, 10], "value": [1, 1]}, "mu": 0.5, "K": 1,
                               "t": [0.5, 1.0], "paths": 20000}))
    code, out = call("price", "--config", str(cfg))
    assert code == 0 and meta(out)["method"] == "monte-carlo"


# -- sample ---------------------------------------------------------------------------------


def test_sample_zero_drift_defect_fraction():
    code, out = call("sample", "--zero", "--x", "1", "--n", "100000", "--seed", "2")
    assert code == 0
    m = meta(out)
    assert abs(float(m["defect_fraction"]) - 0.5) <= 0.005
    assert "inf" in {r[0] for r in rows(out)[1]}


def test_sample_constant_ks_pass():
    code, out = call("sample", "--constant", "c=1", "--x", "1", "--n", "100000", "--seed", "3")
    assert code == 0 and meta(out)["ks_result"] == "PASS"


def test_sample_byte_identical():
    argv = ["sample", "--power", "c=1", "alpha=2", "--x", "1", "--n", "40000", "--seed", "9"]
    a = call(*argv, "--threads", "1")[1]
    b = call(*argv, "--threads", "1")[1]
    c = call(*argv, "--threads", "8")[1]
    assert a == b == c


def test_sample_refuses_violation():
    assert call("sample", "--power", "c=1", "alpha=0.3")[0] == 1


def test_sample_writes_file(tmp_path):
    path = tmp_path / "s.json"
    code, out = call("sample", "--zero", "--x", "1", "--n", "10", "--format", "json", "--out", str(path))
    assert code == 0 and out == ""
    doc = json.loads(path.read_text())
    assert len(doc["samples"]["y"]) == 10 and doc["meta"]["seed"] == 20100101


# -- config and tolerances ------------------------------------------------------------------------


def test_config_flags_win(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"constant": {"c": 1}, "x": 5, "t": [1, 2]}))
    _, from_cfg = call("table", "--config", str(cfg))
    _, flagged = call("table", "--config", str(cfg), "--x", "0")
    assert meta(from_cfg)["x"] == "5" and meta(flagged)["x"] == "0"


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"zero": True, "colour": "blue"}))
    assert call("table", "--config", str(cfg))[0] == 2


def test_tolerance_override():
    assert call("check-drift", "--power", "c=1", "alpha=1", "--tol", "monotone=1e-9")[0] == 0
    assert call("check-drift", "--zero", "--tol", "nonsense=1")[0] == 2


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "dinv", "price", "--K", "1", "--t", "1"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert float(rows(proc.stdout)[1][0][1]) == black_scholes_call(1.0, 1.0, 1.0, 1.0)
    proc = subprocess.run([sys.executable, "-m", "dinv", "table", "--bogus"], capture_output=True, text=True)
    assert proc.returncode == 2
