from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import jsonschema
import pytest

from scalewave.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, load_schema, main, read_curve_json

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL_SWEEP = """\
[system]
n = 1
p = 2
q = 2
[grid]
r_max = 61
nr = 600
t_max = 60
refine_levels = 2
[sweep]
eps = 0.2, 0.4, 0.8, 1.6
"""


def _write(tmp_path: Path, text: str, name: str = "c.ini") -> Path:
    path = tmp_path / name
    path.write_text(text)
    return path


def test_classify_strauss_point(tmp_path, capsys):
    assert main(["classify", "--config", str(CONFIGS / "strauss_n3.ini"), "--out", str(tmp_path)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "regime: Critical" in text and "gamma = p(p-1)" in text
    doc = json.loads((tmp_path / "classify.json").read_text())
    jsonschema.validate(doc, load_schema("classify"))
    assert doc["report"]["regime"] == "Critical"
    assert doc["thresholds"] is None


def test_classify_supercritical_says_open_problem(tmp_path, capsys):
    cfg = _write(tmp_path, "[system]\nn = 3\np = 4\nq = 4\n")
    assert main(["classify", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    assert "open problem" in capsys.readouterr().out


def test_classify_subcritical_has_thresholds(tmp_path):
    assert main(["classify", "--config", str(CONFIGS / "sweep_1d.ini"), "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "classify.json").read_text())
    assert doc["report"]["regime"] == "Subcritical"
    assert doc["thresholds"]["T_pred"] == pytest.approx(481.266549473, rel=1e-9)


def test_curve_fast_and_round_trips(tmp_path):
    t0 = time.perf_counter()
    assert main(["curve", "--config", str(CONFIGS / "strauss_n3.ini"), "--out", str(tmp_path)]) == EXIT_OK
    assert time.perf_counter() - t0 < 1.0
    doc = read_curve_json(tmp_path / "curve.json")
    assert len(doc["cells"]) == 2500
    with open(tmp_path / "curve.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2500
    assert list(rows[0]) == ["p", "q", "F1", "F2", "regime", "critical_subcase", "law_kind", "exponent"]
    assert [r["regime"] for r in rows] == [c["regime"] for c in doc["cells"]]


def test_curve_swap_transposes(tmp_path):
    base = "[system]\nn = 2\nmu1 = {a}\nmu2 = {b}\nnu1sq = {c}\nnu2sq = {d}\n[curve]\nsteps = 30\np_min = 1.1\np_max = 4\nq_min = 1.1\nq_max = 4\n"
    one = _write(tmp_path, base.format(a=1.5, b=0.3, c=0.05, d=0.0), "one.ini")
    two = _write(tmp_path, base.format(a=0.3, b=1.5, c=0.0, d=0.05), "two.ini")
    assert main(["curve", "--config", str(one), "--out", str(tmp_path / "one")]) == EXIT_OK
    assert main(["curve", "--config", str(two), "--out", str(tmp_path / "two")]) == EXIT_OK
    g1 = read_curve_json(tmp_path / "one" / "curve.json")["regimes"]
    g2 = read_curve_json(tmp_path / "two" / "curve.json")["regimes"]
    assert g1 == [list(col) for col in zip(*g2)]
    assert len({x for row in g1 for x in row}) >= 2


def test_verify_exit_codes(tmp_path):
    assert main(["verify", "--suite", "iterkit", "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "verify.json").read_text())
    jsonschema.validate(doc, load_schema("verify"))
    assert doc["passed"] and [c["name"] for c in doc["suites"]["iterkit"]["checks"]][0] == "closed_forms_exact"
    # the leading-order Bessel asymptotic check is expected to fail, see README
    assert main(["verify", "--suite", "specfun"]) == EXIT_FAIL


def test_config_error_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, "[system]\nn = 1\n[grids]\nnr = 3\n", "bad.ini")
    assert main(["classify", "--config", str(cfg)]) == EXIT_CONFIG
    assert "bad.ini:3: unknown section [grids]" in capsys.readouterr().err


def test_sweep_refuses_non_subcritical(tmp_path):
    cfg = _write(tmp_path, "[system]\nn = 3\np = 4\nq = 4\n[sweep]\neps = 0.1, 0.2, 0.3, 0.4\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_sweep_needs_four_eps(tmp_path):
    cfg = _write(tmp_path, SMALL_SWEEP.replace("0.2, 0.4, 0.8, 1.6", "0.2, 0.4, 0.8"))
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_sweep_outputs_and_parallel_determinism(tmp_path):
    cfg = _write(tmp_path, SMALL_SWEEP)
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "b"), "--jobs", "2"]) == EXIT_OK
    a = (tmp_path / "a" / "sweep.json").read_bytes()
    assert a == (tmp_path / "b" / "sweep.json").read_bytes()
    doc = json.loads(a)
    jsonschema.validate(doc, load_schema("sweep"))
    assert doc["fit_points"] == 4 and doc["monotone_nonincreasing"]
    assert doc["predicted_slope"] == pytest.approx(-2 / 3)
    header = (tmp_path / "a" / "sweep.csv").read_text().splitlines()[0]
    assert header == "eps,T_num,blow_up,converged,T_cross_check"


def test_simulate_writes_run_and_series(tmp_path):
    cfg = _write(tmp_path, "[system]\nn = 1\neps = 0.8\n[grid]\nr_max = 31\nnr = 600\nt_max = 30\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    doc = json.loads((tmp_path / "run.json").read_text())
    jsonschema.validate(doc, load_schema("run"))
    assert doc["record"]["blow_up"]
    lines = (tmp_path / "timeseries.csv").read_text().splitlines()
    assert lines[0] == "t,U,V,F,G,max_u,max_v" and len(lines) > 10


def test_output_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SCALEWAVE_OUT", str(tmp_path / "env"))
    assert main(["classify", "--config", str(CONFIGS / "strauss_n3.ini")]) == EXIT_OK
    assert (tmp_path / "env" / "classify.json").exists()
