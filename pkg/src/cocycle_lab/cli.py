"""Command line entry point: ``cocycle-lab <command> [--config PATH] [--out DIR]``.

Commands
--------
sweep        sweep.csv and plotdata.csv over the configured angle grid
derivatives  derivatives.json (first and second derivative at 0, truncation bounds)
dominate     certificate.json for the unrotated cocycle and dset.csv over the grid
heisenberg   heisenberg.csv and heisenberg_summary.txt (config optional)
run          sweep.csv, plotdata.csv, derivatives.json and certificate.json
selftest     closed-form oracle checks; nonzero exit if any fails

Set ``COCYCLE_LAB_LOG`` to a logging level name (``DEBUG``, ``INFO``, ...)
for progress messages on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .config import ExperimentConfig, load_config, parse_config
from .domination import certify, dset_sweep
from .exceptions import CocycleError, ConfigError
from .heisenberg import HeisenbergModel, corollary_main_report
from .outputs import csv_bytes, json_bytes, write_all
from .selftest import run_selftest
from .theta import CSV_COLUMNS, derivative_data, sweep
from .triangular import build_triangular

log = logging.getLogger("cocycle_lab")

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_ANOMALY = 0, 1, 2, 3

HEISENBERG_DEFAULT = {
    "cocycle": {"kind": "heisenberg"},
    "theta_grid": {"min": -0.3, "max": 0.3, "step": 0.05},
    "n": 10_000,
    "samples": 32,
}


class Anomaly(CocycleError):
    """A result that contradicts a proven property; aborts the command."""


def _setup_logging() -> None:
    level = os.environ.get("COCYCLE_LAB_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _prepare(cfg: ExperimentConfig):
    cocycle, tri, base = cfg.build()
    if tri is None:
        log.info("reducing cocycle to triangular form")
        tri = build_triangular(cocycle, base, seed=cfg.seed, section_tol=cfg.tolerances["section"])
    if cocycle is None:
        cocycle = tri.as_cocycle(base)
    return cocycle, tri, base


def _sweep_files(cfg, cocycle, tri, base, threads) -> dict:
    log.info("sweeping %d angles", len(cfg.thetas()))
    res = sweep(tri, base, cfg.thetas(), n=cfg.n, samples=cfg.samples, seed=cfg.seed, cocycle=cocycle,
                warmup=cfg.warmup, tol=cfg.tolerances["formula_direct"], residual_tol=cfg.tolerances["residual"],
                certify_kwargs=dict(cfg.certify, tol=cfg.tolerances["section"]), threads=threads)
    rows = [r.as_tuple() + (r.diagnostic,) for r in res.rows]
    return {
        "sweep.csv": csv_bytes(CSV_COLUMNS + ("diagnostic",), rows),
        "plotdata.csv": csv_bytes(("theta", "lambda_plus"), res.plot_rows()),
    }


def _derivative_files(cfg, tri, base) -> dict:
    log.info("evaluating derivative series")
    data = derivative_data(tri, base, n=cfg.n, samples=cfg.samples, K=cfg.K, seed=cfg.seed)
    if data.anomaly:
        raise Anomaly(f"second derivative at 0 is not negative: {data.ddlambda0!r}")
    return {"derivatives.json": json_bytes(data.to_dict())}


def _certificate_files(cfg, cocycle, base) -> dict:
    cert = certify(cocycle, base, seed=cfg.seed, tol=cfg.tolerances["section"], **cfg.certify)
    return {"certificate.json": json_bytes(cert.to_dict())}


def _dset_files(cfg, cocycle, base, threads) -> dict:
    rows = dset_sweep(cocycle, base, cfg.thetas(), threads=threads, seed=cfg.seed,
                      tol=cfg.tolerances["section"], **cfg.certify)
    return {"dset.csv": csv_bytes(("theta", "verdict", "l", "margin", "gap_rate"),
                                  [(r.theta, r.verdict, r.l, r.margin, r.gap_rate) for r in rows])}


def _heisenberg_files(cfg) -> dict:
    report = corollary_main_report(HeisenbergModel(), cfg.thetas(), n=cfg.n, samples=cfg.samples,
                                   seed=cfg.seed, warmup=cfg.warmup,
                                   certify_kwargs=dict(cfg.certify, tol=cfg.tolerances["section"]))
    rows = [(r.theta, r.verdict, r.lambda_plus, r.lambda_minus, r.lambda_stable, r.note) for r in report.rows]
    return {
        "heisenberg.csv": csv_bytes(("theta", "verdict", "lambda_plus", "lambda_minus", "lambda_stable", "note"),
                                    rows),
        "heisenberg_summary.txt": report.summary().encode("utf-8"),
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cocycle-lab", description="Exponents of rotated 2x2 cocycles.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (("sweep", True), ("derivatives", True), ("dominate", True), ("run", True),
                               ("heisenberg", False), ("selftest", False)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_config, help="JSON experiment config")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="sampling seed (overrides the config)")
        p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = auto")
        if name == "selftest":
            p.add_argument("--tolerance", type=float, help="replace every check tolerance")
    return parser


def _load(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.command == "heisenberg":
        cfg = parse_config(HEISENBERG_DEFAULT)
    else:
        raise ConfigError("a config file is required", "--config")
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be >= 0", "--seed")
        cfg.seed = args.seed
    if args.out:
        cfg.output_dir = args.out
    if args.command == "heisenberg" and cfg.cocycle["kind"] != "heisenberg":
        raise ConfigError("the heisenberg command needs cocycle kind 'heisenberg'", "cocycle.kind")
    return cfg


def _report_error(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        payload["field"], payload["line"] = exc.field, exc.line
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    if args.threads < 0:
        return _report_error(ConfigError("threads must be >= 0", "--threads"), EXIT_CONFIG)
    try:
        if args.command == "selftest":
            text, ok = run_selftest(args.tolerance)
            sys.stdout.write(text)
            if args.out:
                write_all(args.out, {"selftest.txt": text.encode("utf-8")})
            return EXIT_OK if ok else EXIT_ERROR
        cfg = _load(args)
        files: dict[str, bytes] = {}
        if args.command == "heisenberg":
            files.update(_heisenberg_files(cfg))
        else:
            cocycle, tri, base = _prepare(cfg)
            if args.command in ("sweep", "run"):
                files.update(_sweep_files(cfg, cocycle, tri, base, args.threads))
            if args.command in ("derivatives", "run"):
                files.update(_derivative_files(cfg, tri, base))
            if args.command in ("dominate", "run"):
                files.update(_certificate_files(cfg, cocycle, base))
            if args.command == "dominate":
                files.update(_dset_files(cfg, cocycle, base, args.threads))
        for path in write_all(cfg.output_dir, files):
            log.info("wrote %s", path)
        if args.command == "heisenberg":
            sys.stdout.write(files["heisenberg_summary.txt"].decode("utf-8"))
        return EXIT_OK
    except ConfigError as exc:
        return _report_error(exc, EXIT_CONFIG)
    except Anomaly as exc:
        return _report_error(exc, EXIT_ANOMALY)
    except (CocycleError, ValueError, OSError) as exc:
        return _report_error(exc, EXIT_ERROR)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
