"""INI-style run configuration.

Grammar (``configparser`` syntax, ``#`` or ``;`` comments)::

    [system]     n, mu1, mu2, nu1sq, nu2sq, p, q, r0, eps
    [grid]       r_max, nr, t_max, cfl, refine_levels
    [data]       cu0, cu1, cv0, cv1, k
    [sweep]      eps (comma separated), threshold, cross_threshold, jobs
    [curve]      p_min, p_max, q_min, q_max, steps, tol
    [iteration]  C1, K1, T0, j_max
    [output]     dir

Only ``[system] n`` is required; every other key has a default. Unknown
sections or keys are errors. ``SCALEWAVE_OUT`` overrides ``[output] dir``.
"""
from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from .model import ParameterError, SystemParams
from .solver import GridSpec, InitialData

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config"]

OUT_ENV = "SCALEWAVE_OUT"


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = f"{path or '<config>'}" + (f":{line}" if line is not None else "")
        super().__init__(f"{where}: {message}")


_SCHEMA: dict[str, dict[str, type]] = {
    "system": {
        "n": int,
        "mu1": float,
        "mu2": float,
        "nu1sq": float,
        "nu2sq": float,
        "p": float,
        "q": float,
        "r0": float,
        "eps": float,
    },
    "grid": {"r_max": float, "nr": int, "t_max": float, "cfl": float, "refine_levels": int},
    "data": {"cu0": float, "cu1": float, "cv0": float, "cv1": float, "k": int},
    "sweep": {"eps": list, "threshold": float, "cross_threshold": float, "jobs": int},
    "curve": {"p_min": float, "p_max": float, "q_min": float, "q_max": float, "steps": int, "tol": float},
    "iteration": {"C1": float, "K1": float, "T0": float, "j_max": int},
    "output": {"dir": str},
}

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


@dataclass
class RunConfig:
    system: SystemParams
    grid: GridSpec
    data: InitialData
    sweep_eps: list[float] = field(default_factory=list)
    threshold: float = 1e8
    cross_threshold: float = 1e6
    jobs: int = 1
    p_range: tuple[float, float] = (1.05, 5.0)
    q_range: tuple[float, float] = (1.05, 5.0)
    curve_steps: int = 50
    tol: float = 1e-12
    C1: float = 1.0
    K1: float = 1.0
    T0: float = 1.0
    j_max: int = 25
    out_dir: Path | None = None
    source: str | None = None

    def to_dict(self) -> dict:
        s, g, d = self.system, self.grid, self.data
        return {
            "system": {
                "n": s.n,
                "mu1": s.mu1,
                "mu2": s.mu2,
                "nu1sq": s.nu1sq,
                "nu2sq": s.nu2sq,
                "p": s.p,
                "q": s.q,
                "r0": s.r0,
                "eps": s.eps,
            },
            "grid": {"r_max": g.r_max, "nr": g.nr, "t_max": g.t_max, "cfl": g.cfl, "refine_levels": g.refine_levels},
            "data": {"cu0": d.cu0, "cu1": d.cu1, "cv0": d.cv0, "cv1": d.cv1, "k": d.k, "shape": d.shape},
        }


def _line_index(text: str) -> dict[tuple[str, str], int]:
    index: dict[tuple[str, str], int] = {}
    section = None
    for i, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            index[(section, "")] = i
            continue
        m = _KEY_RE.match(line)
        if m and section is not None and not line[:1].isspace():
            index[(section, m.group(1).strip().lower())] = i
    return index


def _convert(raw: str, kind: type, where: tuple[str, str], lines, path):
    line = lines.get(where)
    try:
        if kind is int:
            val = float(raw)
            if not val.is_integer():
                raise ValueError
            return int(val)
        if kind is float:
            val = float(raw)
            if math.isnan(val):
                raise ValueError
            return val
        if kind is list:
            items = [x.strip() for x in raw.replace("\n", ",").split(",") if x.strip()]
            return [float(x) for x in items]
        return raw.strip()
    except ValueError:
        raise ConfigError(f"[{where[0]}] {where[1]} = {raw!r} is not a valid {kind.__name__}", line, path) from None


def parse_config(text: str, path: str | None = None) -> RunConfig:
    lines = _line_index(text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str.lower
    try:
        cp.read_string(text, source=path or "<config>")
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"syntax error: {exc.errors[0][1].strip() if exc.errors else exc}", line, path) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None), path) from None

    values: dict[str, dict] = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", lines.get((section, "")), path)
        keys = {k.lower(): k for k in _SCHEMA[section]}
        values[section] = {}
        for key, raw in cp.items(section):
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{section}]", lines.get((section, key)), path)
            name = keys[key]
            values[section][name] = _convert(raw, _SCHEMA[section][name], (section, key), lines, path)

    def sect_line(section: str) -> int | None:
        return lines.get((section, ""))

    sysv = values.get("system", {})
    if "n" not in sysv:
        raise ConfigError("[system] n is required", sect_line("system"), path)
    try:
        system = SystemParams(**sysv)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(str(exc), sect_line("system"), path) from None

    gv = dict(values.get("grid", {}))
    gv.setdefault("t_max", 40.0)
    gv.setdefault("nr", 2000)
    gv.setdefault("r_max", system.r0 + gv["t_max"] + 1.0)
    try:
        grid = GridSpec(**gv)
        grid.check_light_cone(system.r0)
    except ParameterError as exc:
        raise ConfigError(str(exc), sect_line("grid"), path) from None

    try:
        data = InitialData(r0=system.r0, **values.get("data", {}))
    except ParameterError as exc:
        raise ConfigError(str(exc), sect_line("data"), path) from None

    sw = values.get("sweep", {})
    cv = values.get("curve", {})
    it = values.get("iteration", {})
    cfg = RunConfig(
        system=system,
        grid=grid,
        data=data,
        sweep_eps=sw.get("eps", []),
        threshold=sw.get("threshold", 1e8),
        cross_threshold=sw.get("cross_threshold", 1e6),
        jobs=sw.get("jobs", 1),
        p_range=(cv.get("p_min", 1.05), cv.get("p_max", 5.0)),
        q_range=(cv.get("q_min", 1.05), cv.get("q_max", 5.0)),
        curve_steps=cv.get("steps", 50),
        tol=cv.get("tol", 1e-12),
        C1=it.get("C1", 1.0),
        K1=it.get("K1", 1.0),
        T0=it.get("T0", 1.0),
        j_max=it.get("j_max", 25),
        source=path,
    )
    checks = [
        (any(e <= 0 for e in cfg.sweep_eps), "sweep eps values must be positive", "sweep"),
        (cfg.threshold < 1e6, "threshold must be >= 1e6", "sweep"),
        (cfg.cross_threshold >= cfg.threshold, "cross_threshold must be below threshold", "sweep"),
        (cfg.jobs < 1, "jobs must be >= 1", "sweep"),
        (min(cfg.p_range + cfg.q_range) <= 1, "curve ranges must lie in (1, inf)", "curve"),
        (cfg.curve_steps < 1, "curve steps must be >= 1", "curve"),
        (min(cfg.C1, cfg.K1) <= 0, "C1 and K1 must be positive", "iteration"),
        (cfg.j_max < 1 or cfg.j_max % 2 == 0, "j_max must be odd and >= 1", "iteration"),
    ]
    for bad, msg, section in checks:
        if bad:
            raise ConfigError(msg, sect_line(section), path)
    out = os.environ.get(OUT_ENV) or values.get("output", {}).get("dir")
    cfg.out_dir = Path(out) if out else None
    return cfg


def load_config(path: str | os.PathLike) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(p)) from None
    return parse_config(text, str(p))
