"""Command line front end.

    skl run <config> [--seed N] [--n-paths N] [--workers N] [--out-dir PATH]
    skl validate <config>
    skl envelope <config> --grid "t=0.25,1;r=0,0.5,1"

Exit codes: 0 pass, 1 verdict fail, 2 configuration error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys

import numpy as np

from ..envelopes import EnvelopeParams, envelope_table, whole_space_envelope
from ..errors import ConfigError, ContractError, DomainError, GeometryError, NumericError
from ..estimator import write_reports_csv
from .config import load_config
from .experiments import dirichlet_envelope, run

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, tuple):
        return " ".join(_cell(u) for u in v)
    return v


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def result_dir(out_dir, experiment, stamp=None):
    stamp = stamp or _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    base = os.path.join(out_dir, experiment, stamp)
    path, i = base, 1
    while os.path.exists(path):
        path = f"{base}-{i}"
        i += 1
    os.makedirs(path)
    return path


def write_result(res, path):
    """reports.csv, verdict.txt, plot_*.csv and config_echo.json; no timings, so reruns are byte-identical."""
    write_reports_csv(os.path.join(path, "reports.csv"), res.reports)
    with open(os.path.join(path, "verdict.txt"), "w") as fh:
        fh.write(res.summary())
    for name, (header, rows) in res.plots.items():
        write_table(os.path.join(path, f"plot_{name}.csv"), header, rows)
    with open(os.path.join(path, "config_echo.json"), "w") as fh:
        fh.write(res.config.to_json() + "\n")


def _parse_grid(text):
    out = {}
    for part in text.split(";"):
        if not part.strip():
            continue
        key, _, vals = part.partition("=")
        out[key.strip()] = [float(v) for v in vals.split(",") if v.strip()]
    return out


def cmd_run(args):
    cfg = load_config(args.config).with_overrides(seed=args.seed, n_paths=args.n_paths)
    res = run(cfg, workers=args.workers)
    path = result_dir(args.out_dir, cfg.experiment)
    write_result(res, path)
    sys.stdout.write(res.summary())
    sys.stdout.write(f"results: {path}\n")
    return EXIT_PASS if res.passed else EXIT_FAIL


def cmd_validate(args):
    cfg = load_config(args.config)
    sys.stdout.write(f"ok: {cfg.name} ({cfg.experiment})\n")
    return EXIT_PASS


def cmd_envelope(args):
    cfg = load_config(args.config)
    grid = _parse_grid(args.grid)
    k = cfg.kernel
    buf = io.StringIO()
    w = csv.writer(buf)
    if cfg.domain.shape == "full_space":
        ts, rs = grid.get("t"), grid.get("r")
        if not ts or not rs:
            raise ConfigError(["--grid needs t=... and r=... for a whole-space envelope"])
        env = whole_space_envelope(k, EnvelopeParams(T=max(ts)))
        w.writerow(["t", "r", "lower", "upper"])
        for row in envelope_table(env, ts, rs):
            w.writerow([repr(v) for v in row])
    else:
        ts, xs, ys = grid.get("t"), grid.get("x"), grid.get("y")
        if not ts or not xs or not ys or k.d != 1:
            raise ConfigError(["--grid needs t=..., x=... and y=... (d = 1) for a Dirichlet envelope"])
        env = dirichlet_envelope(k, cfg.domain, max(ts))
        w.writerow(["t", "x", "y", "lower", "upper"])
        for t in ts:
            for x in xs:
                for y in ys:
                    w.writerow([repr(t), repr(x), repr(y), repr(float(env.lower_shape(t, x, y))),
                                repr(float(env.upper_shape(t, x, y)))])
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_PASS


def build_parser():
    p = argparse.ArgumentParser(prog="skl", description="Monte Carlo laboratory for stable-like jump processes.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment and write its result files")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--n-paths", type=int)
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--out-dir", default="out")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="validate a configuration and list every problem")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    e = sub.add_parser("envelope", help="tabulate envelope shapes (no simulation)")
    e.add_argument("config")
    e.add_argument("--grid", required=True, help='e.g. "t=0.25,1;r=0,0.5,1"')
    e.add_argument("--out")
    e.set_defaults(func=cmd_envelope)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write("configuration error:\n" + "".join(f"  - {p}\n" for p in exc.problems))
        return EXIT_CONFIG
    except (NumericError, ArithmeticError) as exc:
        sys.stderr.write(f"numeric error: {exc}\n")
        return EXIT_NUMERIC
    except (ContractError, DomainError, GeometryError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
