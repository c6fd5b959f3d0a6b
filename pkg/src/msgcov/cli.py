"""Command-line entry point: ``msgcov <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import adaptive_threshold_estimate
from .bench import (
    METHODS,
    BenchConfig,
    EigenDiagRecord,
    MethodSpec,
    eigen_diagnostic,
    estimate,
    run_benchmark,
    split_eval,
    write_records,
)
from .errors import ConfigError, DataError, NumericalError
from .gmodel import msg_estimate
from .io import export_network, load_json, read_matrix_csv, write_matrix_csv
from .posdef import correct_pd
from .sim import ModelSpec, make_sigma, sample_mvn

log = logging.getLogger("msgcov")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _parse_params(items: list[str] | None) -> dict:
    out = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects key=value, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def cmd_simulate(args) -> int:
    spec = ModelSpec(args.model, args.p, seed=args.model_seed)
    Sigma = make_sigma(spec)
    X = sample_mvn(Sigma, args.n, seed=args.seed)
    write_matrix_csv(X, args.output)
    if args.sigma_output:
        write_matrix_csv(Sigma, args.sigma_output)
    log.info("wrote %d x %d sample from model %d (%s)", args.n, args.p, spec.model_id, spec.name)
    return EXIT_OK


def cmd_estimate(args) -> int:
    X, names = read_matrix_csv(args.input)
    spec = MethodSpec.parse({"name": args.method, "params": _parse_params(args.param)})
    Sigma = read_matrix_csv(args.sigma)[0] if args.sigma else None
    if args.fit_report and spec.name in ("msg", "msgcor"):
        K = spec.params.get("K", max(1, round(args.k_factor * X.shape[1])))
        values, report = msg_estimate(X, K=int(K), seed=args.seed)
        if spec.name == "msgcor":
            values = correct_pd(values)
        Path(args.fit_report).write_text(json.dumps(report.to_dict(), indent=2))
    else:
        values = estimate(X, spec, seed=args.seed, K_factor=args.k_factor, Sigma=Sigma).values
    write_matrix_csv(values, args.output, names)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    raw = load_json(args.config)
    for key in ("seed", "replicates", "n", "workers"):
        val = getattr(args, key)
        if val is not None:
            raw[key] = val
    if args.output:
        raw["output_path"] = args.output
    if args.no_timing:
        raw["timing"] = False
    cfg = BenchConfig.from_dict(raw)
    records = run_benchmark(cfg)
    if not cfg.output_path:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["model", "p", "n", "method", "median", "q25", "q75", "replicates", "mean_seconds"])
        for r in records:
            w.writerow(r.row())
    return EXIT_OK


def cmd_split_eval(args) -> int:
    X, _ = read_matrix_csv(args.input)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    records = split_eval(
        X, methods, train_n=args.train_n, repeats=args.repeats, seed=args.seed, K_factor=args.k_factor
    )
    if args.output:
        write_records(records, args.output)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["model", "p", "n", "method", "median", "q25", "q75", "replicates", "mean_seconds"])
        for r in records:
            w.writerow(r.row())
    return EXIT_OK


def cmd_eigen_diag(args) -> int:
    rows = []
    for model in args.model:
        spec = ModelSpec(model, args.p, seed=args.model_seed)
        rows.append(eigen_diagnostic(spec, args.n, args.replicates, seed=args.seed))
    fh = open(args.output, "w", newline="", encoding="utf-8") if args.output else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EigenDiagRecord.HEADER)
        for r in rows:
            w.writerow(r.row())
    finally:
        if args.output:
            fh.close()
    return EXIT_OK


def cmd_export_network(args) -> int:
    Sigma_hat, names = read_matrix_csv(args.input)
    if Sigma_hat.shape[0] != Sigma_hat.shape[1]:
        raise DataError(f"{args.input} is not a square matrix")
    if args.edges is not None:
        target = args.edges
    elif args.match_adap:
        X, _ = read_matrix_csv(args.match_adap)
        A = adaptive_threshold_estimate(X, args.delta)
        target = int(np.count_nonzero(A[np.triu_indices(A.shape[0], 1)]))
        log.info("matching adaptive-threshold sparsity: %d edges", target)
    else:
        raise ConfigError("give --edges or --match-adap")
    count = export_network(Sigma_hat, target, args.output, names)
    log.info("wrote %d edges to %s", count, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msgcov", description="Covariance shrinkage via g-modeling.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a Gaussian sample from one of models 1-6")
    p.add_argument("--model", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-seed", type=int, default=0, help="fixes the random parts of models 5 and 6")
    p.add_argument("--output", required=True)
    p.add_argument("--sigma-output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate a covariance matrix from a data CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--method", default="msgcor", choices=sorted(METHODS))
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-factor", type=float, default=1.0)
    p.add_argument("--sigma", help="population covariance CSV (oracle methods only)")
    p.add_argument("--output", required=True)
    p.add_argument("--fit-report", help="write the EM fit report as JSON (msg/msgcor)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("benchmark", help="Monte-Carlo benchmark from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--no-timing", action="store_true", help="write mean_seconds as 0 for byte-stable output")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("split-eval", help="train/test split evaluation on a data CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--methods", default="msgcor,linear,adap,nercome,sample")
    p.add_argument("--train-n", type=int, default=10)
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-factor", type=float, default=1.0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_split_eval)

    p = sub.add_parser("eigen-diag", help="sample vs population eigenvector distance")
    p.add_argument("--model", type=int, action="append", required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--replicates", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_eigen_diag)

    p = sub.add_parser("export-network", help="threshold an estimate into an edge list")
    p.add_argument("--input", required=True, help="estimated covariance CSV")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--edges", type=int)
    g.add_argument("--match-adap", metavar="DATA_CSV", help="keep as many edges as adaptive thresholding of this data")
    p.add_argument("--delta", type=float, default=2.0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_export_network)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
