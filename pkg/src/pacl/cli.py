"""Command-line front end: ``pacl run``, ``pacl gen-data`` and ``pacl verify``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from pacl.config import (
    BUILTIN_GAUSE,
    ConfigError,
    Experiment,
    load_experiment,
)
from pacl.data import (
    generate_logistic,
    save_csv,
)
from pacl.errors import (
    DegenerateWeights,
    DomainError,
    InvalidArgument,
    NumericFailure,
    ParseError,
)
from pacl.model import REFERENCE_OPTIMUM, LogisticGrowthParams
from pacl.orchestrator import BOUND_SLACK, TrajectoryRecord, run, verify_bound

log = logging.getLogger("pacl")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_BOUND = 4

OUT_DIR_ENV = "PACL_OUT_DIR"
DEFAULT_OUT_DIR = "pacl-out"
FIT_CURVE_POINTS = 241


def _g(v) -> str:
    return f"{v:.9g}"


def _exact(v) -> str:
    return repr(float(v))


def trajectory_header(K: int, p: int):
    cols = ["n", "tau"] + [f"theta_bar_{j}" for j in range(p)]
    cols += [f"theta_{k}_{j}" for k in range(1, K + 1) for j in range(p)]
    cols += [f"rho_{k}" for k in range(1, K + 1)]
    cols += [f"pi_{k}" for k in range(1, K + 1)]
    cols += [f"log_alpha_{k}" for k in range(1, K + 1)]
    cols += ["step_loss", "block_loss"]
    return cols


def write_trajectory(record: TrajectoryRecord, path) -> None:
    """One row per recorded iteration.

    Loss columns keep full precision so that summing ``block_loss`` reproduces
    the cumulative loss; everything else is written with 9 significant digits.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(record.K, record.param_dim))
        for row in record.rows:
            w.writerow(
                [str(row.n), _g(row.tau)]
                + [_g(v) for v in row.theta_bar]
                + [_g(v) for v in row.thetas.reshape(-1)]
                + [_g(v) for v in row.rho]
                + [_g(v) for v in row.pi]
                + [_g(v) for v in row.log_alpha]
                + [_exact(row.step_loss), _exact(row.block_loss)]
            )


def write_estimates(record: TrajectoryRecord, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "tau"] + [f"theta_bar_{j}" for j in range(record.param_dim)])
        w.writerow(["0", _g(0.0)] + [_g(v) for v in record.theta_bar0])
        for row in record.rows:
            w.writerow([str(row.n + 1), _g(row.tau)] + [_g(v) for v in row.theta_bar])


def write_fit_curve(record: TrajectoryRecord, exp: Experiment, path) -> None:
    """Model prediction at the consensus estimate on a grid, then the data points."""
    datasets = list(exp.train_sets) + [exp.test_set]
    xs = np.concatenate([d.x for d in datasets])
    grid = np.linspace(xs.min(), xs.max(), FIT_CURVE_POINTS)
    with np.errstate(over="ignore", invalid="ignore"):
        pred = exp.model.predict(record.theta_star, grid)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "t", "y"])
        for t, y in zip(grid, pred):
            w.writerow(["model", _g(t), _g(y)])
        for d in datasets:
            for t, y in d.points:
                w.writerow([d.label, _g(t), _g(y)])


def echo_config(exp: Experiment, base_dir: Path) -> dict:
    raw = {s: dict(keys) for s, keys in exp.raw.items()}
    raw.setdefault("experiment", {})["seed"] = str(exp.run_config.seed)
    raw["experiment"].pop("threads", None)
    data = raw.get("data", {})
    for key in ("source", "train", "test"):
        if key in data and data[key] not in (BUILTIN_GAUSE, "generate"):
            parts = [p.strip() for p in data[key].split(";") if p.strip()]
            data[key] = "; ".join(str((base_dir / p).resolve()) for p in parts)
    return raw


def write_summary(record: TrajectoryRecord, exp: Experiment, base_dir: Path, path) -> dict:
    report = verify_bound(record)
    cfg = exp.run_config
    summary = {
        "model": exp.model.name,
        "theta_star": [float(v) for v in record.theta_star],
        "theta0": np.asarray(cfg.theta0, dtype=float).tolist(),
        "theta0_mode": "auto" if exp.theta0_mode == "auto" else "explicit",
        "steps": record.steps,
        "N": cfg.N,
        "terminated_by": record.terminated_by,
        "cumulative_loss": record.cumulative_loss,
        "bound": record.bound,
        "bound_holds": report.holds,
        "beta": cfg.principal.beta,
        "log_alpha_final": [float(v) for v in record.log_alpha_final],
        "pi_final": [float(v) for v in record.rows[-1].pi],
        "seed": cfg.seed,
        "dataset_sizes": {d.label: len(d) for d in list(exp.train_sets) + [exp.test_set]},
        "config": echo_config(exp, base_dir),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def _resolve_out_dir(arg, exp: Experiment) -> Path:
    if arg:
        return Path(arg)
    configured = exp.raw.get("output", {}).get("out_dir")
    if configured:
        return Path(configured)
    return Path(os.environ.get(OUT_DIR_ENV, DEFAULT_OUT_DIR))


def cmd_run(args) -> int:
    cfg_path = Path(args.config)
    exp = load_experiment(cfg_path, seed=args.seed, threads=args.threads)
    out_dir = _resolve_out_dir(args.out_dir, exp)
    out_dir.mkdir(parents=True, exist_ok=True)
    rc = exp.run_config
    log.info("running K=%d N=%d delta=%g seed=%d", rc.K, rc.N, rc.dynamics.delta, rc.seed)
    start = time.perf_counter()
    record = run(rc, exp.model, exp.train_sets, exp.test_set)
    elapsed = time.perf_counter() - start

    write_trajectory(record, out_dir / "trajectory.csv")
    write_estimates(record, out_dir / "estimates.csv")
    write_fit_curve(record, exp, out_dir / "fit_curve.csv")
    summary = write_summary(record, exp, cfg_path.parent, out_dir / "summary.json")
    log.info(
        "%s after %d steps (%.1fs): theta*=%s L=%.6g bound=%.6g",
        record.terminated_by,
        record.steps,
        elapsed,
        np.array2string(record.theta_star, precision=6),
        record.cumulative_loss,
        record.bound,
    )
    log.info("outputs written to %s", out_dir)
    if not summary["bound_holds"]:
        log.error("cumulative loss exceeds its upper bound")
        return EXIT_BOUND
    return EXIT_OK


def _parse_times(s: str) -> np.ndarray:
    if ":" in s:
        return np.arange(*[float(v) for v in s.split(":")])
    return np.array([float(v) for v in s.split(",")])


def cmd_gen_data(args) -> int:
    try:
        params = LogisticGrowthParams.from_array(float(v) for v in args.params.split(","))
        times = _parse_times(args.times)
    except ValueError as exc:
        raise InvalidArgument(f"bad --params/--times: {exc}") from None
    ds = generate_logistic(params, times, args.noise_sd, args.seed)
    out = Path(args.out)
    try:
        save_csv(ds, out)
    except OSError as exc:
        raise InvalidArgument(f"cannot write {out}: {exc.strerror or exc}") from None
    log.info("wrote %d points to %s", len(ds), out)
    return EXIT_OK


def read_summary_bound(path) -> float:
    try:
        with open(path, encoding="utf-8") as fh:
            summary = json.load(fh)
        bound = float(summary["bound"])
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"malformed summary {path}: {exc!r}") from None
    if not math.isfinite(bound):
        raise ParseError(f"non-finite bound in {path}")
    return bound


def read_trajectory_loss(path) -> float:
    """Total mixture loss recovered from the ``block_loss`` column."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from None
    if not rows or "block_loss" not in rows[0]:
        raise ParseError(f"{path} has no block_loss column")
    header = rows[0]
    col = header.index("block_loss")
    losses = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} columns, found {len(row)}", row=lineno)
        try:
            v = float(row[col])
        except ValueError:
            raise ParseError(f"non-numeric block_loss {row[col]!r}", row=lineno) from None
        if not math.isfinite(v) or v < 0:
            raise ParseError(f"invalid block_loss {row[col]!r}", row=lineno)
        losses.append(v)
    return math.fsum(losses)


def cmd_verify(args) -> int:
    bound = read_summary_bound(args.summary)
    total = read_trajectory_loss(args.trajectory)
    ok = total <= bound + BOUND_SLACK
    log.info("cumulative loss L=%.17g  bound=%.17g  %s", total, bound, "OK" if ok else "VIOLATED")
    return EXIT_OK if ok else EXIT_BOUND


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pacl", description="Principal-agent collaborative learning.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="override experiment.seed")
    p.add_argument("--out-dir", default=None, help=f"output directory (env {OUT_DIR_ENV})")
    p.add_argument("--threads", type=int, default=None, help="worker threads for agent steps")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("gen-data", help="write synthetic logistic-growth data as CSV")
    p.add_argument(
        "--params",
        default=",".join(repr(float(v)) for v in REFERENCE_OPTIMUM.as_array()),
        help="N0,Ne,r",
    )
    p.add_argument(
        "--times",
        default="0:24",
        help="start:stop[:step] (stop exclusive) or comma list, in days",
    )
    p.add_argument("--noise-sd", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("verify", help="check the cumulative loss against its bound")
    p.add_argument("summary")
    p.add_argument("trajectory")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


def _configure_logging(quiet: bool) -> None:
    if not any(getattr(h, "_pacl", False) for h in log.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        handler._pacl = True
        log.addHandler(handler)
    log.setLevel(logging.WARNING if quiet else logging.INFO)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.quiet)
    try:
        return args.func(args)
    except (ConfigError, ParseError, InvalidArgument) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION
    except (NumericFailure, DomainError, DegenerateWeights) as exc:
        log.error("numeric failure: %s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
