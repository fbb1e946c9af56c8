"""Command-line entry point.

Exit status: 0 on success, 2 for configuration or domain errors, 3 for
numerical failures, 4 for mesh and file errors. Failures print a JSON
object ``{"error": kind, "message": ..., "errors": [...]}`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__, pipeline
from .config import COMMANDS, load_toml, parse_override, validate_config
from .errors import (
    ConfigError,
    DomainError,
    LcfRiskError,
    MeshError,
    MeshIOError,
    NumericalError,
    StepSizeError,
)

EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 2, 3, 4
RANDOM_COMMANDS = ("schmid",)


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def dumps(record):
    """Canonical JSON text; floats use shortest round-trip repr."""
    return json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default) + "\n"


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _vec3(text):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected gx,gy,gz, got {text!r}")
    return parts


def _table_file(path, name):
    data = load_toml(path)
    return data.get(name, data)


def build_parser():
    p = argparse.ArgumentParser(prog="lcfrisk", description="Probabilistic LCF reliability toolkit.")
    p.add_argument("--version", action="version", version=f"lcfrisk {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--out", type=Path, help="directory for result.json and CSV tables")
    common.add_argument("--format", choices=("json", "csv"), default="json",
                        help="what to print on stdout (default json)")
    common.add_argument("--seed", type=int, help="random seed (derived and printed when omitted)")
    common.add_argument("--threads", type=int, help="worker threads for sampling")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config value, e.g. statistics.m_bar=4")

    fe = argparse.ArgumentParser(add_help=False)
    fe.add_argument("--mesh", type=Path, help="mesh file")
    fe.add_argument("--material", type=Path, help="TOML file with a [material] table")
    fe.add_argument("--bc", type=Path, help="TOML file with a [loads] table")
    fe.add_argument("--rpm", type=float, help="rotation speed for the centrifugal load")
    fe.add_argument("--traction", action="append", default=[], metavar="TAG=GX,GY,GZ",
                    help="constant traction on a boundary tag (repeatable)")
    fe.add_argument("--refine", type=int, help="uniform refinement levels")

    svc = argparse.ArgumentParser(add_help=False)
    svc.add_argument("--eta", type=float, help="Weibull scale")
    svc.add_argument("--m", type=float, help="Weibull shape")
    svc.add_argument("--income", type=float, help="income rate per cycle")
    svc.add_argument("--cm", type=float, help="cost of one scheduled service")
    svc.add_argument("--cr", type=float, help="cost of one failure")
    svc.add_argument("--ieff", type=float, help="effective discount rate per cycle")
    svc.add_argument("--w", type=float, help="service outage in cycles")

    sub.add_parser("solve", parents=[common, fe], help="solve the elastic problem")
    sub.add_parser("life", parents=[common, fe], help="failure distribution from the FE stress field")
    sub.add_parser("pof", parents=[common], help="PoF and hazard of a given distribution")
    sm = sub.add_parser("schmid", parents=[common], help="Monte-Carlo grain lives")
    sm.add_argument("--samples", type=int, help="number of grain orientations")
    sm.add_argument("--kappa-report", action="store_true", help="include the multiaxiality kappa")
    sub.add_parser("gradcheck", parents=[common, fe], help="adjoint vs finite-difference shape derivative")
    sub.add_parser("service", parents=[common, svc], help="optimal service interval")
    sw = sub.add_parser("sweep", parents=[common, svc], help="EPV curves for several incomes")
    sw.add_argument("--incomes", type=lambda s: [float(x) for x in s.split(",")], help="comma list")

    v = sub.add_parser("validate", help="check a configuration and list every error")
    v.add_argument("--config", type=Path, required=True)
    v.add_argument("--command", dest="target", choices=COMMANDS, default="life",
                   help="command whose requirements apply (default life)")
    v.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    return p


def collect_overrides(args):
    """Dotted-key overrides from ``--set`` and the dedicated flags."""
    ov = {}
    for text in args.overrides:
        k, val = parse_override(text)
        ov[k] = val
    g = vars(args)
    if g.get("mesh") is not None:
        ov["mesh.path"] = str(args.mesh.resolve())
    if g.get("refine") is not None:
        ov["mesh.refine"] = args.refine
    if g.get("material") is not None:
        ov["material"] = _table_file(args.material, "material")
    if g.get("bc") is not None:
        ov["loads"] = _table_file(args.bc, "loads")
    if g.get("rpm") is not None:
        ov["loads.rpm"] = args.rpm
    for t in g.get("traction") or []:
        tag, _, vec = t.partition("=")
        ov[f"loads.traction.{tag}"] = _vec3(vec)
    for flag, key in (("eta", "eta"), ("m", "m"), ("income", "income"), ("cm", "service_cost"),
                      ("cr", "failure_cost"), ("ieff", "i_eff"), ("w", "outage"), ("incomes", "incomes")):
        if g.get(flag) is not None:
            ov[f"service.{key}"] = g[flag]
    if g.get("samples") is not None:
        ov["microstructure.n_samples"] = args.samples
    if g.get("seed") is not None:
        ov["run.seed"] = args.seed
    if g.get("threads") is not None:
        ov["run.threads"] = args.threads
    return ov


def run(args, stdout=None, stderr=None):
    """Execute a parsed command; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    overrides = collect_overrides(args)
    if args.command == "validate":
        _, errs = validate_config(args.config, args.target, overrides=overrides)
        stdout.write(dumps({"valid": not errs, "errors": errs}))
        return EXIT_CONFIG if errs else 0

    cfg, errs = validate_config(args.config, args.command, data={}, overrides=overrides)
    if errs:
        raise ConfigError(errs)
    seed = cfg.seed
    if args.command in RANDOM_COMMANDS and seed is None:
        seed = secrets.randbits(32)
        stderr.write(f"lcfrisk: derived seed {seed}\n")

    if args.command == "schmid":
        record, tables = pipeline.run_schmid(cfg, seed, args.kappa_report)
    else:
        record, tables = getattr(pipeline, f"run_{args.command}")(cfg)
    record["provenance"] = pipeline.provenance(cfg, seed if args.command in RANDOM_COMMANDS else None)

    text = dumps(record)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "result.json").write_text(text)
        for name, (header, rows) in tables.items():
            (args.out / name).write_text(csv_text(header, rows))
    if args.format == "csv" and tables:
        header, rows = next(iter(tables.values()))
        stdout.write(csv_text(header, rows))
    else:
        stdout.write(text)
    return 0


def error_record(exc):
    """``(exit status, JSON-ready dict)`` for an exception."""
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG, {"error": "config", "message": str(exc), "errors": list(exc.errors)}
    if isinstance(exc, StepSizeError):
        return EXIT_NUMERICAL, {"error": "step_size", "message": str(exc)}
    if isinstance(exc, (MeshIOError, MeshError)):
        return EXIT_IO, {"error": "mesh", "message": str(exc)}
    if isinstance(exc, DomainError):
        return EXIT_CONFIG, {"error": "domain", "message": str(exc)}
    if isinstance(exc, (NumericalError, LcfRiskError)):
        return EXIT_NUMERICAL, {"error": "numerical", "message": str(exc)}
    if isinstance(exc, OSError):
        return EXIT_IO, {"error": "io", "message": str(exc)}
    raise exc


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except (LcfRiskError, OSError) as exc:
        code, rec = error_record(exc)
        sys.stderr.write(dumps(rec))
        return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
