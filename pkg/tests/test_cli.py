import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from cacwb.cli import main
from cacwb.config import parse_config
from cacwb.errors import ValidationError

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("CACWB_CACHE", str(tmp_path / "cache.json"))


def _write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def _run(mode, cfg, tmp_path, *extra):
    out = tmp_path / f"out-{mode}-{len(list(tmp_path.iterdir()))}"
    code = main([mode, "--config", cfg, "--out", str(out), *extra])
    return code, (out.read_text() if out.exists() else None)


UFB_POINT = {"policy": {"scheme": "UFB", "C": 100, "M": 90, "N": 94, "alpha": 0.5},
             "traffic": {"mean_holding_time": 90, "lambda_n": 3.0}}


def test_solve_nps_erlang_b(tmp_path):
    cfg = _write(tmp_path, {"policy": {"scheme": "NPS", "C": 2},
                            "traffic": {"mu": 1.0, "lambda_n": 0.5, "ratio": 1.0}})
    code, text = _run("solve", cfg, tmp_path)
    assert code == 0
    doc = json.loads(text)
    assert doc["metrics"]["blocking"] == pytest.approx([0.2, 0.2], abs=1e-15)


def test_solve_zero_traffic(tmp_path):
    cfg = _write(tmp_path, {**UFB_POINT, "traffic": {"mean_holding_time": 90, "lambda_n": 0}})
    code, text = _run("solve", cfg, tmp_path)
    assert code == 0
    assert json.loads(text)["metrics"]["blocking"] == [0.0, 0.0]


def test_ubt_zero_alpha_matches_multifgb(tmp_path):
    tr = {"mean_holding_time": 120, "class_ratio": [1, 2, 4, 6], "load": 110}
    th = [120, 110, 100, 90]
    a = _write(tmp_path, {"policy": {"scheme": "UBT", "C": 120, "thresholds": th, "alpha": [0, 0, 0]},
                          "traffic": tr}, "a.json")
    b = _write(tmp_path, {"policy": {"scheme": "MultiFGB", "C": 120, "thresholds": th},
                          "traffic": tr}, "b.json")
    _, ta = _run("solve", a, tmp_path)
    _, tb = _run("solve", b, tmp_path)
    assert json.loads(ta)["metrics"] == json.loads(tb)["metrics"]
    _, ca = _run("solve", a, tmp_path, "--format", "csv")
    _, cb = _run("solve", b, tmp_path, "--format", "csv")
    assert ca == cb


def _csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_sweep_columns_and_monotone(tmp_path):
    code, text = _run("sweep", str(CONFIGS / "suite_a_fgb_sweep.json"), tmp_path)
    assert code == 0
    rows = _csv(text)
    assert len(rows) == 61
    assert list(rows[0]) == ["lambda_n", "lambda_h", "PB_1", "PB_2", "P_D", "utilization",
                             "overall_blocking"]
    pb = [float(r["PB_2"]) for r in rows]
    assert all(b >= a for a, b in zip(pb, pb[1:]))
    assert text.endswith("\n") and "\r" not in text


def test_ufb_sweep_below_fgb(tmp_path):
    _, fgb = _run("sweep", str(CONFIGS / "suite_a_fgb_sweep.json"), tmp_path)
    _, ufb = _run("sweep", str(CONFIGS / "suite_a_ufb_sweep.json"), tmp_path)
    for f, u in zip(_csv(fgb), _csv(ufb)):
        assert float(u["PB_2"]) <= float(f["PB_2"])
    assert "PB_2_fractional_band" in _csv(ufb)[0]


def test_flow_balance_sweep_plateau(tmp_path):
    _, text = _run("sweep", str(CONFIGS / "suite_a_fgb_flow_balance_sweep.json"), tmp_path)
    lam = {float(r["lambda_n"]): float(r["lambda_h"]) for r in _csv(text)}
    assert max(v for k, v in lam.items() if k >= 1.5) - lam[1.5] < 0.1 * lam[1.5]


def test_solve_equals_sweep_row(tmp_path):
    _, sweep = _run("sweep", str(CONFIGS / "suite_a_ufb_sweep.json"), tmp_path)
    row = next(r for r in _csv(sweep) if r["lambda_n"] == "3.7")
    doc = json.loads((CONFIGS / "suite_a_ufb_sweep.json").read_text())
    doc["traffic"].pop("sweep")
    doc["traffic"]["lambda_n"] = 3.7
    doc["run"] = {"format": "csv"}
    code, solve = _run("solve", _write(tmp_path, doc), tmp_path)
    assert code == 0
    assert _csv(solve)[0] == row


@pytest.mark.parametrize("mode,name", [
    ("sweep", "suite_b_ubt_a_sweep.json"), ("solve", "suite_a_ufb_solve.json"),
    ("estimate-handover", "suite_a_estimate_handover.json"), ("optimize", "suite_b_optimize.json"),
])
def test_analytic_modes_byte_identical(tmp_path, mode, name):
    _, a = _run(mode, str(CONFIGS / name), tmp_path)
    _, b = _run(mode, str(CONFIGS / name), tmp_path)
    assert a == b


def test_optimize_second_run_hits_cache(tmp_path, capsys):
    _, a = _run("optimize", str(CONFIGS / "suite_b_optimize.json"), tmp_path)
    assert "from cache" not in capsys.readouterr().err
    assert json.loads((tmp_path / "cache.json").read_text())
    _, b = _run("optimize", str(CONFIGS / "suite_b_optimize.json"), tmp_path)
    assert "from cache" in capsys.readouterr().err
    assert "from_cache" not in json.loads(a)["result"]


def test_simulate_reproducible_and_seed_override(tmp_path):
    doc = {**UFB_POINT, "traffic": {"mean_holding_time": 90, "lambda_n": 1.0},
           "run": {"seed": 1}, "simulation": {"total_arrivals": 20000, "trace": str(tmp_path / "t.csv")}}
    cfg = _write(tmp_path, doc)
    _, a = _run("simulate", cfg, tmp_path)
    trace_a = (tmp_path / "t.csv").read_text()
    _, b = _run("simulate", cfg, tmp_path)
    assert a == b and trace_a == (tmp_path / "t.csv").read_text()
    _, c = _run("simulate", cfg, tmp_path, "--seed", "2")
    assert json.loads(c)["simulation"]["seed"] == 2 and c != a
    assert trace_a.startswith("time,kind,class,occupancy\n")


def test_simulate_requires_seed(tmp_path):
    code, text = _run("simulate", _write(tmp_path, UFB_POINT), tmp_path)
    assert code == 2 and text is None


def test_estimate_handover_nonconvergence_still_emits(tmp_path):
    doc = {"policy": {"scheme": "FGB", "C": 100, "M": 90},
           "traffic": {"mean_holding_time": 90, "P_h": 0.2, "lambda_n": 3},
           "fixed_point": {"max_iterations": 2}}
    code, text = _run("estimate-handover", _write(tmp_path, doc), tmp_path)
    assert code == 4
    assert json.loads(text)["points"][0]["converged"] is False


def test_nonconvergence_in_sweep_exits_4(tmp_path):
    doc = {"policy": {"scheme": "FGB", "C": 100, "M": 90},
           "traffic": {"mean_holding_time": 90, "P_h": 0.2, "handover_mode": "flow_balance",
                       "sweep": {"min": 1, "max": 2, "step": 1}},
           "fixed_point": {"max_iterations": 2}}
    code, text = _run("sweep", _write(tmp_path, doc), tmp_path)
    assert code == 4 and text is None


@pytest.mark.parametrize("doc", [
    {**UFB_POINT, "extra": 1},
    {**UFB_POINT, "traffic": {"mean_holding_time": 90, "lamda_n": 3.0}},
    {**UFB_POINT, "policy": {"scheme": "UFB", "C": 100, "M": 95, "N": 94, "alpha": 0.5}},
    {**UFB_POINT, "traffic": {"mu": 0.01, "mean_holding_time": 90, "lambda_n": 3.0}},
    {**UFB_POINT, "run": {"mode": "sweep"}},
    {**UFB_POINT, "run": {"format": "xml"}},
    {"traffic": UFB_POINT["traffic"]},
])
def test_invalid_configs_exit_2_without_output(tmp_path, doc):
    code, text = _run("solve", _write(tmp_path, doc), tmp_path)
    assert code == 2 and text is None


def test_invalid_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["solve", "--config", str(bad)]) == 2
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == 2


def test_invalid_sweep_range(tmp_path):
    doc = {"policy": UFB_POINT["policy"],
           "traffic": {"mean_holding_time": 90, "sweep": {"min": 3, "max": 1, "step": 0.1}}}
    assert _run("sweep", _write(tmp_path, doc), tmp_path)[0] == 2
    doc["traffic"]["sweep"] = {"min": 0, "max": 1, "step": 0}
    assert _run("sweep", _write(tmp_path, doc), tmp_path)[0] == 2


def test_optimize_validates_search_before_work(tmp_path):
    doc = json.loads((CONFIGS / "suite_b_optimize.json").read_text())
    doc["search"]["protected"] = [7]
    assert _run("optimize", _write(tmp_path, doc), tmp_path)[0] == 2


def test_config_parsing_paths():
    fb = parse_config({"policy": {"scheme": "FGB", "C": 100, "M": 90},
                       "traffic": {"mean_holding_time": 90, "mu_a": 1 / 90, "eta": 1 / 360,
                                   "handover_mode": "flow_balance", "lambda_n": 2}}, "solve")
    assert fb.P_h == pytest.approx(0.2) and fb.mu == pytest.approx(1 / 90)
    eff = parse_config({"policy": {"scheme": "FGB", "C": 100, "M": 90},
                        "traffic": {"departure": "effective", "mu_a": 1 / 90, "eta": 1 / 360,
                                    "lambda_n": 2}}, "solve")
    assert eff.mu == pytest.approx(5 / 360)
    with pytest.raises(ValidationError):
        parse_config({"policy": {"scheme": "FGB", "C": 100, "M": 90},
                      "traffic": {"mu": 1, "P_h": 0.2, "eta": 0.1, "mu_a": 0.1,
                                  "handover_mode": "flow_balance", "lambda_n": 1}}, "solve")
    multi = parse_config({"policy": {"scheme": "MultiFGB", "C": 10, "thresholds": [10, 5]},
                          "traffic": {"mu": 0.5, "class_ratio": [1, 3], "load": 8}}, "solve")
    assert multi.multiclass_rates(8.0) == pytest.approx((1.0, 3.0))


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, UFB_POINT)
    proc = subprocess.run([sys.executable, "-m", "cacwb", "solve", "--config", cfg, "--format", "csv"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("lambda_n,lambda_h,PB_1,PB_2")


def test_solver_failure_exits_3(tmp_path, monkeypatch):
    import cacwb.cli as cli

    def boom(*args, **kwargs):
        raise FloatingPointError("overflow in chain solve")

    monkeypatch.setattr(cli, "evaluate_policy", boom)
    code, text = _run("solve", _write(tmp_path, UFB_POINT), tmp_path)
    assert code == 3 and text is None
