"""Command line interface: ``scalewave {classify,curve,verify,simulate,sweep}``.

Exit codes: 0 success, 1 a verification failed or a sweep could not be fitted,
2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import checks
from .config import ConfigError, RunConfig, load_config
from .iterkit import blowup_thresholds
from .model import CriticalSubcase, Regime, RegimeReport, classify, grid_axis, pq_grid
from .solver import init, run_lifespan, simulate

log = logging.getLogger("scalewave")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
DEFAULT_OUT = Path("scalewave-out")
SUITE_NAMES = ("specfun", "model", "testfunc", "iterkit", "solver")

_GAMMA = {
    CriticalSubcase.FIRST_BRANCH: "q(pq-1)",
    CriticalSubcase.SECOND_BRANCH: "p(pq-1)",
    CriticalSubcase.BOTH_BRANCHES: "pq-1",
    CriticalSubcase.SYMMETRIC_SAME_PDO: "p(p-1)",
}


# --- JSON helpers -------------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "Infinity" if x > 0 else "-Infinity"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def load_schema(name: str) -> dict:
    text = resources.files("scalewave").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def dumps(doc: dict, schema: str) -> str:
    """Validate against the shipped schema and serialise deterministically."""
    doc = _jsonable(doc)
    jsonschema.validate(doc, load_schema(schema))
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    log.info("wrote %s", path)


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# --- commands ------------------------------------------------------------------------


def describe_report(rep: RegimeReport) -> tuple[str, str | None]:
    """Human readable lifespan law plus the formula for gamma in the critical case."""
    law = rep.lifespan_law
    if rep.regime is Regime.SUBCRITICAL:
        return f"T <~ eps^(-1/max(F1,F2)) = eps^(-{law.exponent:.6g})", None
    if rep.regime is Regime.CRITICAL:
        formula = _GAMMA[rep.critical_subcase]
        return f"T <~ exp(C eps^(-gamma)), gamma = {formula} = {law.exponent:.6g}", formula
    return law.describe(), None


def classify_document(cfg: RunConfig) -> dict:
    P = cfg.system
    rep = classify(P, cfg.tol)
    text, formula = describe_report(rep)
    thresholds = None
    if P.F1 > 0 or P.F2 > 0:
        thresholds = blowup_thresholds(P, cfg.C1, cfg.K1, cfg.T0).to_dict()
    return {
        "command": "classify",
        "config": cfg.to_dict(),
        "report": rep.to_dict(),
        "lifespan_law_text": text,
        "gamma_formula": formula,
        "thresholds": thresholds,
    }


def cmd_classify(cfg: RunConfig, out: Path) -> int:
    doc = classify_document(cfg)
    rep = doc["report"]
    P = cfg.system
    head = rep["regime"]
    if rep["critical_subcase"]:
        head += f" ({rep['critical_subcase']}), gamma = {doc['gamma_formula']}"
    lines = [
        f"n={P.n} p={P.p:.10g} q={P.q:.10g} mu=({P.mu1:g}, {P.mu2:g}) nu^2=({P.nu1sq:g}, {P.nu2sq:g})",
        f"delta1 = {rep['delta1']:.6g}   delta2 = {rep['delta2']:.6g}",
        f"F1 = F(n+mu1,p,q) = {rep['F1']:.10g}   F2 = F(n+mu2,q,p) = {rep['F2']:.10g}",
        f"regime: {head}",
        f"lifespan law: {doc['lifespan_law_text']}",
        f"technical condition on 1/p, 1/q: {'satisfied' if rep['technical_ok'] else 'not satisfied'}",
    ]
    if doc["thresholds"]:
        th = doc["thresholds"]
        lines.append(f"iteration threshold T_pred = {th['T_pred']:.6g} (branch {th['active']})")
    print("\n".join(lines))
    _write(out / "classify.json", dumps(doc, "classify"))
    return EXIT_OK


def curve_document(cfg: RunConfig) -> dict:
    grid = pq_grid(cfg.system, cfg.p_range, cfg.q_range, cfg.curve_steps, cfg.tol)
    ps = grid_axis(cfg.p_range, cfg.curve_steps)
    qs = grid_axis(cfg.q_range, cfg.curve_steps)
    cells = []
    for i, p in enumerate(ps):
        for j, q in enumerate(qs):
            d = grid[i][j].to_dict()
            cells.append(
                {
                    "p": float(p),
                    "q": float(q),
                    "F1": d["F1"],
                    "F2": d["F2"],
                    "regime": d["regime"],
                    "critical_subcase": d["critical_subcase"],
                    "law_kind": d["lifespan_law"]["kind"],
                    "exponent": d["lifespan_law"]["exponent"],
                }
            )
    return {"command": "curve", "config": cfg.to_dict(), "p_values": list(ps), "q_values": list(qs), "cells": cells}


CURVE_COLUMNS = ["p", "q", "F1", "F2", "regime", "critical_subcase", "law_kind", "exponent"]


def read_curve_json(path: str | Path) -> dict:
    """Load a curve file, validate it and attach ``regimes[i][j]`` at ``(p_values[i], q_values[j])``."""
    doc = json.loads(Path(path).read_text())
    jsonschema.validate(doc, load_schema("curve"))
    nq = len(doc["q_values"])
    cells = doc["cells"]
    doc["regimes"] = [[c["regime"] for c in cells[i * nq : (i + 1) * nq]] for i in range(len(doc["p_values"]))]
    return doc


def cmd_curve(cfg: RunConfig, out: Path) -> int:
    doc = curve_document(cfg)
    rows = [[c[k] if c[k] is not None else "" for k in CURVE_COLUMNS] for c in doc["cells"]]
    _write(out / "curve.csv", _csv(CURVE_COLUMNS, rows))
    _write(out / "curve.json", dumps(doc, "curve"))
    counts: dict[str, int] = {}
    for c in doc["cells"]:
        counts[c["regime"]] = counts.get(c["regime"], 0) + 1
    print(f"{len(doc['cells'])} cells: " + ", ".join(f"{k} {v}" for k, v in sorted(counts.items())))
    return EXIT_OK


def cmd_verify(suite: str, out: Path | None) -> int:
    names = list(SUITE_NAMES) if suite == "all" else [suite]
    doc = {"command": "verify"}
    doc.update(checks.run_suites(names))
    for name, res in doc["suites"].items():
        for c in res["checks"]:
            tag = "PASS" if c["passed"] else "FAIL"
            print(f"{tag} {name}.{c['name']} ({c['seconds']:.2f}s) {c['detail']}".rstrip())
        print(f"suite {name}: {'PASS' if res['passed'] else 'FAIL'} in {res['seconds']:.2f}s")
    if out is not None:
        _write(out / "verify.json", dumps(doc, "verify"))
    return EXIT_OK if doc["passed"] else EXIT_FAIL


SERIES_COLUMNS = ["t", "U", "V", "F", "G", "max_u", "max_v"]


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    P = cfg.system
    rep = classify(P, cfg.tol)
    rec = run_lifespan(cfg.data, cfg.grid, P, P.eps, cfg.threshold, cfg.cross_threshold)
    res = simulate(init(cfg.data, cfg.grid, P), thresholds=(cfg.cross_threshold, cfg.threshold), history=True)
    a = res.history.arrays()
    series = {k: [float(x) for x in a[k]] for k in SERIES_COLUMNS}
    doc = {
        "command": "simulate",
        "config": cfg.to_dict(),
        "report": rep.to_dict(),
        "record": rec.to_dict(),
        "diagnostics": {"nr": cfg.grid.nr, **series},
    }
    _write(out / "run.json", dumps(doc, "run"))
    _write(out / "timeseries.csv", _csv(SERIES_COLUMNS, zip(*(series[k] for k in SERIES_COLUMNS))))
    T = "no blow-up before t_max" if not rec.blow_up else f"T_num = {rec.T_num:.6g}"
    print(f"eps={rec.eps:g}: {T}; levels {rec.T_levels}; converged={rec.converged}")
    return EXIT_OK


def _lifespan_job(args):
    cfg, eps = args
    return run_lifespan(cfg.data, cfg.grid, cfg.system, eps, cfg.threshold, cfg.cross_threshold)


def fit_slope(records) -> tuple[float | None, float | None, int]:
    """Least-squares slope of ``log T`` against ``log eps`` over converged blow-up points."""
    pts = [(r.eps, r.T_num) for r in records if r.blow_up and r.converged]
    if len(pts) < 3:
        return None, None, len(pts)
    x = np.log([e for e, _ in pts])
    y = np.log([t for _, t in pts])
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept), len(pts)


def sweep_document(cfg: RunConfig, jobs: int) -> dict:
    P = cfg.system
    rep = classify(P, cfg.tol)
    if rep.regime is not Regime.SUBCRITICAL:
        raise ConfigError(f"sweep needs a subcritical configuration, got {rep.regime.value}", None, cfg.source)
    eps = sorted(cfg.sweep_eps)
    if len(eps) < 4:
        raise ConfigError("sweep needs at least 4 eps values", None, cfg.source)
    tasks = [(cfg, e) for e in eps]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_lifespan_job, tasks))
    else:
        records = [_lifespan_job(t) for t in tasks]
    predicted = -1.0 / max(P.F1, P.F2)
    slope, intercept, used = fit_slope(records)
    gap = None if slope is None else abs(slope - predicted) / abs(predicted)
    Ts = [r.T_num for r in records]
    return {
        "command": "sweep",
        "config": cfg.to_dict(),
        "report": rep.to_dict(),
        "predicted_slope": predicted,
        "fitted_slope": slope,
        "fitted_intercept": intercept,
        "relative_gap": gap,
        "fit_points": used,
        "all_converged": all(r.converged for r in records),
        "monotone_nonincreasing": all(b <= a for a, b in zip(Ts, Ts[1:])),
        "points": [r.to_dict() for r in records],
    }


def cmd_sweep(cfg: RunConfig, out: Path, jobs: int) -> int:
    doc = sweep_document(cfg, jobs)
    _write(out / "sweep.json", dumps(doc, "sweep"))
    rows = [[p["eps"], p["T_num"], p["blow_up"], p["converged"], p["T_cross_check"]] for p in doc["points"]]
    _write(out / "sweep.csv", _csv(["eps", "T_num", "blow_up", "converged", "T_cross_check"], rows))
    for p in doc["points"]:
        print(f"eps={p['eps']:<8g} T_num={p['T_num']!s:<22} converged={p['converged']}")
    if doc["fitted_slope"] is None:
        print(f"only {doc['fit_points']} converged blow-up points; need 3 for a fit", file=sys.stderr)
        return EXIT_FAIL
    print(
        f"fitted slope {doc['fitted_slope']:.4f}, predicted {doc['predicted_slope']:.4f}, "
        f"relative gap {100 * doc['relative_gap']:.1f}%"
    )
    return EXIT_OK


# --- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scalewave", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress and timings to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("classify", "regime, F values and lifespan law"),
        ("curve", "regime grid over (p, q) as CSV and JSON"),
        ("simulate", "one lifespan measurement with diagnostics"),
        ("sweep", "lifespan sweep over eps with a log-log fit"),
    ):
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", type=Path, required=True, help="INI configuration file")
        sp.add_argument("--out", type=Path, help="output directory")
        if name == "sweep":
            sp.add_argument("--jobs", type=int, help="worker processes (overrides [sweep] jobs)")
    vp = sub.add_parser("verify", help="run the named invariant suites")
    vp.add_argument("--suite", choices=SUITE_NAMES + ("all",), default="all")
    vp.add_argument("--out", type=Path, help="also write verify.json here")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "verify":
            return cmd_verify(args.suite, args.out)
        cfg = load_config(args.config)
        out = args.out or cfg.out_dir or DEFAULT_OUT
        if args.command == "classify":
            return cmd_classify(cfg, out)
        if args.command == "curve":
            return cmd_curve(cfg, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out)
        jobs = args.jobs if args.jobs is not None else cfg.jobs
        if jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        return cmd_sweep(cfg, out, jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
