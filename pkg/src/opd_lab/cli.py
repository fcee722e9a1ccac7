"""Command-line interface: ``opd-lab <command> [options]``.

Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._runtime import check_seed, resolve_threads
from .errors import NumericalError, OpdLabError, ValidationError
from .estimators import estimate_opd
from .hermite import hermite_coeff_matrix
from .io import atomic_write_csv, atomic_write_json, atomic_write_text, to_json
from .mc import (
    ExperimentConfig,
    compare,
    default_progress,
    limit_reference,
    qq_data,
    run_limit_experiment,
)
from .processgen import BivariateLrdModel, model_config, path_to_csv, simulate_bivariate
from .rosenblatt import STANDARDIZATIONS, sample_rosenblatt_batch

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class UsageError(ValidationError):
    """Bad command-line usage detected after parsing."""


def _load_json(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must contain a JSON object")
    return data


def _override(base: dict, **flags) -> dict:
    out = dict(base)
    for key, value in flags.items():
        if value is not None:
            out[key] = value
    return out


def _model_from(values: dict) -> BivariateLrdModel:
    for key in ("hurst", "psi", "phi"):
        if key not in values:
            raise UsageError(f"missing model parameter '{key}' (flag --{key} or config file)")
    return BivariateLrdModel(
        hurst=values["hurst"],
        psi=values["psi"],
        phi=values["phi"],
        innovation_hurst=values.get("innovation_hurst"),
    )


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# Commands


def cmd_simulate(args) -> int:
    values = _override(
        _load_json(args.config),
        hurst=args.hurst,
        psi=args.psi,
        phi=args.phi,
        innovation_hurst=args.innovation_hurst,
        n=args.n,
        seed=args.seed,
    )
    model = _model_from(values)
    if "n" not in values:
        raise UsageError("missing path length (flag --n or config key 'n')")
    seed = check_seed(values.get("seed", 0))
    path = simulate_bivariate(model, int(values["n"]), seed)
    out = _out_dir(args.out_dir)
    atomic_write_text(out / "path.csv", path_to_csv(path))
    if args.cumsum:
        atomic_write_text(out / "cumsum.csv", path_to_csv(path, cumulative=True))
    effective = {"command": "simulate", **model_config(model, path.n, seed), "cumsum": bool(args.cumsum)}
    atomic_write_json(out / "config.json", effective)
    print(to_json({"rows": path.n, "out_dir": str(out)}), end="")
    return EXIT_OK


def _read_columns(path: str) -> tuple[list[str], np.ndarray]:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {path}")
    with p.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if len(rows) < 2:
        raise UsageError(f"{path} needs a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise UsageError(f"{path} contains non-numeric data: {exc}") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise UsageError(f"{path} has ragged rows")
    return header, data


def _column(header: list[str], data: np.ndarray, name: str | None, path: str) -> np.ndarray:
    if name is None:
        return data[:, -1]
    if name not in header:
        raise UsageError(f"column '{name}' not in {path} (columns: {', '.join(header)})")
    return data[:, header.index(name)]


def cmd_opd(args) -> int:
    cols = args.columns.split(",") if args.columns else None
    if cols is not None and len(cols) != 2:
        raise UsageError("--columns takes two comma-separated names, e.g. y1,y2")
    if len(args.inputs) == 1:
        header, data = _read_columns(args.inputs[0])
        names = cols or ["y1", "y2"]
        x1 = _column(header, data, names[0], args.inputs[0])
        x2 = _column(header, data, names[1], args.inputs[0])
    elif len(args.inputs) == 2:
        h1, d1 = _read_columns(args.inputs[0])
        h2, d2 = _read_columns(args.inputs[1])
        x1 = _column(h1, d1, cols[0] if cols else None, args.inputs[0])
        x2 = _column(h2, d2, cols[1] if cols else None, args.inputs[1])
    else:
        raise UsageError("opd takes one file with two columns or two files")
    if x1.size != x2.size:
        raise UsageError(f"series lengths differ: {x1.size} vs {x2.size}")
    if args.negate:
        x2 = -x2
    result = estimate_opd(x1, x2, args.h, increments=args.increments)
    record = result.to_dict()
    if args.out_dir:
        out = _out_dir(args.out_dir)
        atomic_write_json(out / "opd.json", record)
        atomic_write_json(
            out / "config.json",
            {
                "command": "opd",
                "inputs": list(args.inputs),
                "columns": cols,
                "h": args.h,
                "increments": bool(args.increments),
                "negate": bool(args.negate),
            },
        )
    print(to_json(record), end="")
    return EXIT_OK


def _experiment_from(args) -> ExperimentConfig:
    data = _load_json(args.config)
    model_data = dict(data.get("model", {}))
    model_data = _override(
        model_data, hurst=args.hurst, psi=args.psi, phi=args.phi, innovation_hurst=args.innovation_hurst
    )
    true_p = args.true_p
    if true_p is not None and true_p not in ("auto", "estimate"):
        try:
            true_p = float(true_p)
        except ValueError as exc:
            raise UsageError(f"--true-p must be a number, 'auto' or 'estimate', got {true_p!r}") from exc
    merged = _override(
        data,
        h=args.h,
        path_n=args.path_n,
        replications=args.replications,
        regime=args.regime,
        true_p=true_p,
        master_seed=args.seed,
        pilot_draws=args.pilot_draws,
    )
    merged["model"] = model_data
    merged.setdefault("master_seed", 0)
    return ExperimentConfig.from_dict(merged)


def cmd_limit_experiment(args) -> int:
    if args.config is None and args.hurst is None:
        raise UsageError("limit-experiment needs --config FILE or model flags")
    config = _experiment_from(args)
    progress = None if args.quiet else default_progress
    sample = run_limit_experiment(config, threads=args.threads, progress=progress)
    out = _out_dir(args.out_dir)
    diag = dict(sample.diagnostics)
    atomic_write_csv(out / "values.csv", ["rep", "value"], sample.value_rows())
    atomic_write_csv(out / "qq_normal.csv", ["q_sample", "q_reference"], qq_data(sample.values, sample.normal_reference))
    reference_info = None
    if config.regime == "lrd" and not args.no_reference:
        ref, weights = limit_reference(
            config,
            draws=args.reference_draws,
            weight_reps=args.weight_reps,
            inner_n=args.reference_inner_n,
            threads=args.threads,
        )
        cmp = compare(sample.values, ref)
        diag["ks_vs_rosenblatt_mixture"] = cmp["ks"]
        diag["ks_vs_rosenblatt_mixture_critical"] = cmp["critical"]
        diag["ks_vs_rosenblatt_mixture_below_critical"] = cmp["below_critical"]
        atomic_write_csv(out / "qq_rosenblatt.csv", ["q_sample", "q_reference"], qq_data(sample.values, ref))
        atomic_write_json(out / "weights.json", weights.to_dict())
        reference_info = {
            "draws": int(ref.size),
            "weight_reps": args.weight_reps,
            "inner_n": args.reference_inner_n or max(config.path_n, 100_000),
        }
    atomic_write_json(out / "diagnostics.json", diag)
    atomic_write_json(
        out / "config.json",
        {"command": "limit-experiment", "experiment": config.to_dict(), "reference": reference_info},
    )
    print(to_json(diag), end="")
    return EXIT_OK


def cmd_rosenblatt(args) -> int:
    seed = check_seed(args.seed)
    batch = sample_rosenblatt_batch(
        args.d_star, args.inner_n, args.draws, seed, threads=args.threads, standardization=args.standardization
    )
    out = _out_dir(args.out_dir)
    atomic_write_csv(out / "rosenblatt.csv", ["z"], [(float(v),) for v in batch.values])
    atomic_write_json(out / "rosenblatt.json", batch.sidecar())
    atomic_write_json(out / "config.json", {"command": "rosenblatt", **batch.sidecar()})
    v = batch.values
    summary = {"draws": batch.draws, "mean": float(np.mean(v))}
    if v.size > 1:
        summary["variance"] = float(np.var(v, ddof=1))
    print(to_json(summary), end="")
    return EXIT_OK


def cmd_weights(args) -> int:
    values = _override(
        _load_json(args.config), hurst=args.hurst, psi=args.psi, phi=args.phi,
        innovation_hurst=args.innovation_hurst,
    )
    model = _model_from(values)
    seed = check_seed(args.seed)
    weights = hermite_coeff_matrix(model, args.h, args.reps, seed, threads=args.threads)
    record = {"model": model.to_dict(), "seed": seed, **weights.to_dict()}
    out = _out_dir(args.out_dir)
    atomic_write_json(out / "weights.json", record)
    atomic_write_json(
        out / "config.json",
        {"command": "weights", "model": model.to_dict(), "h": args.h, "reps": args.reps, "seed": seed},
    )
    print(to_json(record), end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--hurst", type=float, help="Hurst parameter in (0, 1)")
    p.add_argument("--psi", type=float, help="loading of the first innovation on the second series")
    p.add_argument("--phi", type=float, help="loading of the second innovation (non-zero)")
    p.add_argument(
        "--innovation-hurst", type=float, dest="innovation_hurst",
        help="Hurst parameter of the second innovation (default: same as --hurst)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opd-lab",
        description="Ordinal pattern dependence estimation and limit-theorem experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--threads", type=int, default=None,
        help="worker threads (default: $OPD_LAB_THREADS or 1); output does not depend on it",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a bivariate long-memory path")
    _add_model_flags(p)
    p.add_argument("--n", type=int, help="path length")
    p.add_argument("--seed", type=int, help="seed (default 0)")
    p.add_argument("--config", help="JSON file with {hurst, psi, phi, n, seed}; flags override")
    p.add_argument("--cumsum", action="store_true", help="also write the integrated series")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("opd", help="estimate ordinal pattern dependence of two series")
    p.add_argument("inputs", nargs="+", help="one CSV with two columns, or two CSV files")
    p.add_argument("--h", type=int, required=True, help="pattern order")
    p.add_argument("--columns", help="column names, e.g. y1,y2 (default y1,y2 / last column of each file)")
    p.add_argument("--increments", action="store_true", help="treat inputs as increments")
    p.add_argument("--negate", action="store_true", help="negate the second series (negative dependence)")
    p.add_argument("--out-dir", help="also write opd.json and config.json here")
    p.set_defaults(func=cmd_opd)

    p = sub.add_parser("limit-experiment", help="replicate the normalised estimator")
    p.add_argument("--config", help="JSON experiment config; flags override")
    _add_model_flags(p)
    p.add_argument("--h", type=int)
    p.add_argument("--path-n", type=int, dest="path_n")
    p.add_argument("--replications", type=int)
    p.add_argument("--regime", choices=("lrd", "srd"))
    p.add_argument("--true-p", dest="true_p", help="number, 'auto' (exact) or 'estimate' (pilot)")
    p.add_argument("--pilot-draws", type=int, dest="pilot_draws")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--reference-draws", type=int, default=None, help="limit reference size (default: replications)")
    p.add_argument("--reference-inner-n", type=int, default=None, help="partial-sum length of the reference")
    p.add_argument("--weight-reps", type=int, default=10**6, help="draws for the Hermite weights")
    p.add_argument("--no-reference", action="store_true", help="skip the Rosenblatt-mixture reference")
    p.add_argument("--quiet", action="store_true", help="no replication counter")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.set_defaults(func=cmd_limit_experiment)

    p = sub.add_parser("rosenblatt", help="sample standard Rosenblatt variables")
    p.add_argument("--d-star", type=float, required=True, dest="d_star", help="memory parameter in (1/4, 1/2)")
    p.add_argument("--draws", type=int, required=True)
    p.add_argument("--inner-n", type=int, default=100_000, dest="inner_n")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--standardization", choices=STANDARDIZATIONS, default="exact")
    p.add_argument("--out-dir", default=".", help="output directory")
    p.set_defaults(func=cmd_rosenblatt)

    p = sub.add_parser("weights", help="estimate Hermite coefficients and limit weights")
    _add_model_flags(p)
    p.add_argument("--config", help="JSON file with {hurst, psi, phi}; flags override")
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--reps", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".", help="output directory")
    p.set_defaults(func=cmd_weights)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        args.threads = resolve_threads(args.threads)
        return args.func(args)
    except ValidationError as exc:
        print(f"opd-lab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"opd-lab {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OpdLabError as exc:
        print(f"opd-lab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"opd-lab {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
