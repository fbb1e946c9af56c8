"""Run configuration: TOML loading, overrides and aggregated validation.

Schema (all sections optional unless a command needs them)::

    [material]      E, nu | lambda, mu; K, n_prime, sigma_f_prime,
                    eps_f_prime, b, c; optional N_max, units
    [statistics]    model = "weibull" (m_bar) | "gompertz" (C, alpha);
                    optional eta or J for a direct distribution; times = [...];
                    faces = [tags] restricts the life integral
    [mesh]          path, refine (int >= 0), quadratic (bool), face_order
    [loads]         dirichlet = {tag = [components]}, traction = {tag = [gx, gy, gz]},
                    body_force = [fx, fy, fz], density + rpm (+ axis, origin)
    [solver]        method = "direct" | "cg", tol
    [microstructure] stress = 3x3, eps_a, n_samples, mu_g, vartheta, bins
    [gradcheck]     h, fields = [{type = "normal" | "tangential", center, width, direction}]
    [service]       eta, m | distribution from [statistics]; income, service_cost,
                    failure_cost, i_eff, outage, bracket, tol, incomes
    [run]           seed, threads

Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError

COMMANDS = ("solve", "life", "pof", "schmid", "gradcheck", "service", "sweep")
NEEDS = {
    "solve": ("material", "mesh", "loads"),
    "life": ("material", "mesh", "loads", "statistics"),
    "pof": ("statistics",),
    "schmid": ("material", "microstructure"),
    "gradcheck": ("material", "mesh", "loads", "statistics"),
    "service": ("service",),
    "sweep": ("service",),
}


@dataclass
class RunConfig:
    """Validated, override-applied configuration for one command."""

    command: str
    data: dict
    source: Path | None = None
    base: Path = Path(".")
    output: Path | None = None
    fmt: str = "json"
    seed: int | None = None
    threads: int = 1
    overrides: dict = field(default_factory=dict)

    def section(self, name):
        return self.data.get(name, {})

    @property
    def mesh_path(self):
        return (self.base / self.data["mesh"]["path"]).resolve()

    def digest(self):
        """SHA-256 of the canonical JSON form of the resolved configuration."""
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def load_toml(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: invalid TOML ({exc})"]) from None


def set_path(data, dotted, value):
    """Set ``a.b.c = value`` in nested dicts, creating tables as needed."""
    keys = dotted.split(".")
    cur = data
    for k in keys[:-1]:
        cur = cur.setdefault(k, {})
        if not isinstance(cur, dict):
            raise ConfigError([f"override {dotted}: {k} is not a table"])
    cur[keys[-1]] = value


def parse_override(text):
    """``key.path=value`` with the value parsed as a TOML literal (bare strings allowed)."""
    if "=" not in text:
        raise ConfigError([f"override {text!r} must look like section.key=value"])
    key, raw = text.split("=", 1)
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key.strip(), value


# -- validation ---------------------------------------------------------------------
class _Checker:
    def __init__(self, data):
        self.data = data
        self.errors = []

    def get(self, sec, key):
        return self.data.get(sec, {}).get(key)

    def need(self, sec, key, kind=float, cond=None, expect=""):
        v = self.get(sec, key)
        if v is None:
            self.errors.append(f"{sec}.{key}: required key missing ({expect or kind.__name__})")
            return None
        return self.check(sec, key, kind, cond, expect)

    def check(self, sec, key, kind=float, cond=None, expect=""):
        v = self.get(sec, key)
        if v is None:
            return None
        if kind is float:
            ok = isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
        elif kind is int:
            ok = isinstance(v, int) and not isinstance(v, bool)
        else:
            ok = isinstance(v, kind)
        if not ok:
            self.errors.append(f"{sec}.{key}: expected {kind.__name__}, got {v!r}")
            return None
        if cond is not None and not cond(v):
            self.errors.append(f"{sec}.{key} must be {expect}, got {v!r}")
            return None
        return v

    def vector(self, sec, key, n=3, required=False):
        v = self.get(sec, key)
        if v is None:
            if required:
                self.errors.append(f"{sec}.{key}: required key missing (list of {n} numbers)")
            return None
        if not (isinstance(v, list) and len(v) == n and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)):
            self.errors.append(f"{sec}.{key}: expected a list of {n} numbers, got {v!r}")
            return None
        return v


def _check_material(c: _Checker):
    s = "material"
    if c.get(s, "lambda") is not None or c.get(s, "mu") is not None:
        c.need(s, "lambda", cond=lambda v: v > 0, expect="> 0")
        c.need(s, "mu", cond=lambda v: v > 0, expect="> 0")
        c.check(s, "E", cond=lambda v: v > 0, expect="> 0")
    else:
        c.need(s, "E", cond=lambda v: v > 0, expect="> 0")
        c.need(s, "nu", cond=lambda v: 0 < v < 0.5, expect="in (0, 0.5)")
    c.need(s, "K", cond=lambda v: v > 0, expect="> 0")
    c.need(s, "n_prime", cond=lambda v: 0 < v < 1, expect="in (0, 1)")
    c.need(s, "sigma_f_prime", cond=lambda v: v > 0, expect="> 0")
    c.need(s, "eps_f_prime", cond=lambda v: v > 0, expect="> 0")
    c.need(s, "b", cond=lambda v: v < 0, expect="< 0")
    c.need(s, "c", cond=lambda v: v < 0, expect="< 0")
    c.check(s, "N_max", cond=lambda v: v > 0.5, expect="> 0.5")
    c.check(s, "units", kind=str)


def _check_statistics(c: _Checker, command):
    s = "statistics"
    model = c.need(s, "model", kind=str, cond=lambda v: v in ("weibull", "gompertz"),
                   expect="'weibull' or 'gompertz'")
    if model == "weibull" or command == "gradcheck":
        c.need(s, "m_bar", cond=lambda v: v >= 1, expect="≥ 1")
        if command == "pof":
            c.need(s, "eta", cond=lambda v: v > 0, expect="> 0")
    if model == "gompertz":
        if command != "pof":
            c.need(s, "C", cond=lambda v: v > 0, expect="> 0")
        c.need(s, "alpha", cond=lambda v: v > 0, expect="> 0")
        if command == "pof":
            c.need(s, "J", cond=lambda v: v > 0, expect="> 0")
    fc = c.get(s, "faces")
    if fc is not None and not (isinstance(fc, list) and fc and all(isinstance(x, str) for x in fc)):
        c.errors.append(f"{s}.faces: expected a non-empty list of boundary tags, got {fc!r}")
    t = c.get(s, "times")
    if t is not None and not (isinstance(t, list) and all(isinstance(x, (int, float)) and x >= 0 for x in t)):
        c.errors.append(f"{s}.times: expected a list of numbers ≥ 0, got {t!r}")


def _check_mesh(c: _Checker, base):
    s = "mesh"
    p = c.need(s, "path", kind=str, expect="path to a mesh file")
    if p is not None and not (base / p).exists():
        c.errors.append(f"{s}.path: file not found: {base / p}")
    c.check(s, "refine", kind=int, cond=lambda v: 0 <= v <= 4, expect="an integer in [0, 4]")
    c.check(s, "quadratic", kind=bool)
    c.check(s, "face_order", kind=int, cond=lambda v: 1 <= v <= 12, expect="an integer in [1, 12]")


def _check_loads(c: _Checker):
    s = "loads"
    d = c.get(s, "dirichlet")
    if not isinstance(d, dict) or not d:
        c.errors.append(f"{s}.dirichlet: required non-empty table tag = [components]")
    else:
        for tag, comps in d.items():
            if not (isinstance(comps, list) and comps and all(x in (0, 1, 2) for x in comps)):
                c.errors.append(f"{s}.dirichlet.{tag}: expected a non-empty list of components from 0, 1, 2")
    t = c.get(s, "traction") or {}
    if not isinstance(t, dict):
        c.errors.append(f"{s}.traction: expected a table tag = [gx, gy, gz]")
    else:
        for tag, g in t.items():
            if not (isinstance(g, list) and len(g) == 3 and all(isinstance(x, (int, float)) for x in g)):
                c.errors.append(f"{s}.traction.{tag}: expected a list of 3 numbers")
    c.vector(s, "body_force")
    if c.get(s, "rpm") is not None:
        c.need(s, "density", cond=lambda v: v > 0, expect="> 0")
        c.check(s, "rpm", cond=lambda v: v >= 0, expect="≥ 0")
        c.vector(s, "axis")
        c.vector(s, "origin")
    c.check("solver", "method", kind=str, cond=lambda v: v in ("direct", "cg"), expect="'direct' or 'cg'")
    c.check("solver", "tol", cond=lambda v: 0 < v < 1, expect="in (0, 1)")


def _check_micro(c: _Checker):
    s = "microstructure"
    st = c.get(s, "stress")
    if st is None:
        c.errors.append(f"{s}.stress: required key missing (3x3 list or 3 principal values)")
    elif not (
        (isinstance(st, list) and len(st) == 3 and all(isinstance(x, (int, float)) for x in st))
        or (isinstance(st, list) and len(st) == 3 and all(isinstance(r, list) and len(r) == 3 for r in st))
    ):
        c.errors.append(f"{s}.stress: expected a 3x3 list or 3 principal values, got {st!r}")
    elif all(isinstance(r, list) for r in st) and any(st[i][j] != st[j][i] for i in range(3) for j in range(3)):
        c.errors.append(f"{s}.stress: tensor must be symmetric")
    c.check(s, "eps_a", cond=lambda v: v > 0, expect="> 0")
    c.check(s, "n_samples", kind=int, cond=lambda v: v >= 1, expect="an integer ≥ 1")
    c.check(s, "mu_g", cond=lambda v: v > 0, expect="> 0")
    c.check(s, "vartheta", cond=lambda v: 0 < v <= 0.5, expect="in (0, 0.5]")
    c.check(s, "bins", kind=int, cond=lambda v: v >= 1, expect="an integer ≥ 1")


def _check_gradcheck(c: _Checker):
    s = "gradcheck"
    c.check(s, "h", cond=lambda v: v > 0, expect="> 0")
    fields = c.get(s, "fields")
    if fields is None:
        return
    if not isinstance(fields, list) or not fields:
        c.errors.append(f"{s}.fields: expected a non-empty array of tables")
        return
    for k, f in enumerate(fields):
        if not isinstance(f, dict):
            c.errors.append(f"{s}.fields[{k}]: expected a table")
            continue
        if f.get("type") not in ("normal", "tangential"):
            c.errors.append(f"{s}.fields[{k}].type must be 'normal' or 'tangential'")
        ctr = f.get("center")
        if not (isinstance(ctr, list) and len(ctr) == 3):
            c.errors.append(f"{s}.fields[{k}].center: expected a list of 3 numbers")
        w = f.get("width")
        if not (isinstance(w, (int, float)) and w > 0):
            c.errors.append(f"{s}.fields[{k}].width must be > 0")
        if f.get("type") == "tangential":
            d = f.get("direction")
            if not (isinstance(d, list) and len(d) == 3):
                c.errors.append(f"{s}.fields[{k}].direction: expected a list of 3 numbers")


def _check_service(c: _Checker, command):
    s = "service"
    if c.get(s, "eta") is not None or c.get("statistics", "model") is None:
        c.need(s, "eta", cond=lambda v: v > 0, expect="> 0")
        c.need(s, "m", cond=lambda v: v >= 1, expect="≥ 1")
    c.need(s, "income", cond=lambda v: v >= 0, expect="≥ 0")
    c.need(s, "service_cost", cond=lambda v: v >= 0, expect="≥ 0")
    c.need(s, "failure_cost", cond=lambda v: v >= 0, expect="≥ 0")
    c.need(s, "i_eff", cond=lambda v: 0 < v <= 1, expect="in (0, 1]")
    c.check(s, "outage", cond=lambda v: v >= 0, expect="≥ 0")
    c.check(s, "tol", cond=lambda v: 0 < v < 1, expect="in (0, 1)")
    b = c.vector(s, "bracket", n=2)
    if b is not None and not 0 < b[0] < b[1]:
        c.errors.append(f"{s}.bracket must satisfy 0 < lo < hi, got {b!r}")
    if command == "sweep":
        inc = c.get(s, "incomes")
        if not (isinstance(inc, list) and inc and all(isinstance(x, (int, float)) and x >= 0 for x in inc)):
            c.errors.append(f"{s}.incomes: required non-empty list of incomes ≥ 0")


def _check_run(c: _Checker):
    c.check("run", "seed", kind=int, cond=lambda v: v >= 0, expect="an integer ≥ 0")
    c.check("run", "threads", kind=int, cond=lambda v: v >= 1, expect="an integer ≥ 1")


def collect_errors(data, command, base=Path(".")):
    """Every validation error for ``command``; empty when the config is usable."""
    c = _Checker(data)
    if command not in COMMANDS:
        return [f"command must be one of {', '.join(COMMANDS)}, got {command!r}"]
    for sec in NEEDS[command]:
        if sec not in data:
            c.errors.append(f"{sec}: required table missing")
    if "material" in data:
        _check_material(c)
    if "statistics" in data:
        _check_statistics(c, command)
    if "mesh" in data and "mesh" in NEEDS[command]:
        _check_mesh(c, base)
    if "loads" in data and "loads" in NEEDS[command]:
        _check_loads(c)
    if "microstructure" in data and command == "schmid":
        _check_micro(c)
    if command == "gradcheck":
        _check_gradcheck(c)
    if "service" in data and command in ("service", "sweep"):
        _check_service(c, command)
    _check_run(c)
    # keep first occurrence, stable order
    seen = []
    for e in c.errors:
        if e not in seen:
            seen.append(e)
    return seen


def validate_config(path=None, command="life", data=None, overrides=None):
    """Load, apply overrides and validate.

    Returns ``(RunConfig, [])`` when valid or ``(None, errors)`` with every
    problem found (validation never stops at the first error).
    """
    base = Path(".")
    if path is not None:
        try:
            data = load_toml(path)
        except ConfigError as exc:
            return None, list(exc.errors)
        base = Path(path).resolve().parent
    data = copy.deepcopy(data or {})
    for k, v in (overrides or {}).items():
        try:
            set_path(data, k, v)
        except ConfigError as exc:
            return None, list(exc.errors)
    errs = collect_errors(data, command, base)
    if errs:
        return None, errs
    run = data.get("run", {})
    return RunConfig(command, data, Path(path) if path else None, base, seed=run.get("seed"),
                     threads=run.get("threads", 1), overrides=dict(overrides or {})), []
