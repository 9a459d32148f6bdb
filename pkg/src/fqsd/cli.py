"""Command-line entry point: ``run``, ``verify`` and ``figdata``.

Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 numerical failure.  ``FQSD_OUTPUT_DIR`` overrides every output directory.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig, load_config, parse_config, set_path
from .errors import ConfigError, NumericalError
from .master import integrate
from .observables import observable_series
from .output import coefficient_columns, trajectory_columns, write_csv, write_manifest
from .qops import solve_for_model

log = logging.getLogger("fqsd")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
ENV_OUTPUT = "FQSD_OUTPUT_DIR"
TRACE_TOL = 1e-10
POSITIVITY_TOL = -1e-8


def _tag(value) -> str:
    if isinstance(value, float):
        return f"{value:g}"
    return str(value).replace(" ", "")


def _run_one(cfg: RunConfig, stem: str) -> dict:
    """Run a single configuration and write its CSV files."""
    out = cfg.out_dir
    if cfg.model.name == "n_boson":
        series = solve_for_model(cfg.model, cfg.kernel, cfg.T, cfg.h)
        path = write_csv(out / f"{stem}_coefficients.csv", *coefficient_columns(series))
        return {"files": [path], "truncated_at": None, "series": {}, "times": series.times, "invariants": {}}
    traj = integrate(cfg.model, cfg.kernel, cfg.rho0, cfg.T, cfg.h, cfg.coeff_source)
    obs = {}
    for name in cfg.observables:
        obs.update(observable_series(cfg.model, traj.rhos, name))
    files = [write_csv(out / f"{stem}_trajectory.csv", *trajectory_columns(traj, obs))]
    if traj.qbar is not None:
        files.append(write_csv(out / f"{stem}_coefficients.csv", *coefficient_columns(traj.qbar)))
    invariants = {
        "max_trace_err": float(traj.trace_errors.max()),
        "max_herm_err": float(traj.hermiticity_errors.max()),
        "min_eig": float(traj.min_eigenvalues.min()),
        "trace_violations": int(np.sum(traj.trace_errors > TRACE_TOL)),
        "herm_violations": int(np.sum(traj.hermiticity_errors > TRACE_TOL)),
        "positivity_violations": int(np.sum(traj.min_eigenvalues < POSITIVITY_TOL)),
    }
    return {"files": files, "truncated_at": traj.truncated_at, "series": obs, "times": traj.times, "invariants": invariants}


def run(config_path, h: Optional[float] = None, T: Optional[float] = None, out_dir: Optional[str] = None) -> int:
    env_out = out_dir or os.environ.get(ENV_OUTPUT)
    try:
        raw = load_config(config_path, {"integrator.h": h, "integrator.T": T})
        base = parse_config(raw, env_out)
        if base.sweep is None:
            jobs = [(base, base.prefix, None)]
        else:
            jobs = []
            param = str(base.sweep["parameter"])
            for value in base.sweep["values"]:
                variant = copy.deepcopy(raw)
                variant.pop("sweep")
                set_path(variant, param, value)
                cfg = parse_config(variant, env_out)
                jobs.append((cfg, f"{base.prefix}_{param.split('.')[-1]}={_tag(value)}", value))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    base.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        with ThreadPoolExecutor(max_workers=min(len(jobs), os.cpu_count() or 1)) as pool:
            results = list(pool.map(lambda job: _run_one(job[0], job[1]), jobs))
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    files = [f for r in results for f in r["files"]]
    if base.sweep is not None:
        param = str(base.sweep["parameter"]).split(".")[-1]
        names = list(results[0]["series"])
        for name in names:
            n = max(len(r["times"]) for r in results)
            times = np.linspace(0.0, base.T, n)
            header, cols = ["t"], [times]
            for (_, _, value), r in zip(jobs, results):
                col = np.full(n, np.nan, dtype=complex if np.iscomplexobj(r["series"][name]) else float)
                col[: len(r["series"][name])] = r["series"][name]
                label = f"{name}[{param}={_tag(value)}]"
                if np.iscomplexobj(col):
                    header += [f"Re({label})", f"Im({label})"]
                    cols += [col.real, col.imag]
                else:
                    header.append(label)
                    cols.append(col)
            files.append(write_csv(base.out_dir / f"{base.prefix}_sweep_{name}.csv", header, cols))
    truncated = [r["truncated_at"] for r in results if r["truncated_at"] is not None]
    payload = {
        "config": raw,
        "runs": [
            {"stem": stem, "sweep_value": value, "invariants": r["invariants"], "truncated_at": r["truncated_at"]}
            for (_, stem, value), r in zip(jobs, results)
        ],
    }
    manifest = write_manifest(base.out_dir / f"{base.prefix}_manifest.json", payload, files)
    print(f"wrote {len(files)} files and {manifest}")
    if truncated:
        print(f"numerical failure: singular coefficient at t={min(truncated):.6g}; trajectory truncated", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def verify(suite: str, out: Optional[str] = None) -> int:
    from .verify import SUITES, run_suite

    if suite != "all" and suite not in SUITES:
        print(f"config error: unknown suite {suite!r}", file=sys.stderr)
        return EXIT_CONFIG
    report = run_suite(suite)
    text = json.dumps(report, indent=2, sort_keys=True)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    print(text)
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def figdata_cmd(fig: str, config: Optional[str], out_dir: Optional[str]) -> int:
    import yaml

    from .figures import figdata

    target = Path(out_dir or os.environ.get(ENV_OUTPUT) or "output")
    try:
        overrides = None
        if config:
            overrides = yaml.safe_load(Path(config).read_text()) or {}
            if not isinstance(overrides, dict):
                raise ConfigError("figure config must be a mapping")
        files = figdata(fig, overrides, target)
    except (OSError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_manifest(target / f"{fig}_manifest.json", {"figure": fig, "overrides": overrides}, files)
    for f in files:
        print(f)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fqsd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="integrate a configured model")
    p_run.add_argument("config")
    p_run.add_argument("--h", type=float, default=None, help="override integrator.h")
    p_run.add_argument("--T", type=float, default=None, help="override integrator.T")
    p_run.add_argument("--out", default=None, help="output directory")
    p_ver = sub.add_parser("verify", help="run a verification suite")
    p_ver.add_argument("suite", help="novikov, recovery, oracle, chain, symmetry, markov or all")
    p_ver.add_argument("--out", default=None, help="also write the JSON report here")
    p_fig = sub.add_parser("figdata", help="export figure-analog series")
    p_fig.add_argument("figure", help="fig1, fig2, fig3 or fig4")
    p_fig.add_argument("config", nargs="?", default=None, help="optional parameter overrides")
    p_fig.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return run(args.config, args.h, args.T, args.out)
    if args.command == "verify":
        return verify(args.suite, args.out)
    return figdata_cmd(args.figure, args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
