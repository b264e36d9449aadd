"""Command-line front end: ``ifstbc {simulate,check-design,wishart-ccdf,lattice}``.

Simulation config files are flat ``key = value`` text::

    # alamouti over a 2x1 channel
    design = alamouti          # builtin name or path to a design file
    n_r = 1
    M = 4
    receiver = if              # if | zf | mmse | ml
    snr_db = 10, 15, 20, 25
    max_trials = 1000000       # cap per SNR point
    target_bit_errors = 200    # stop a point early once reached; "none" to disable
    seed = 1
    block_size = 2000
    workers = 1
    noiseless = false

Exit status: 0 on success (for ``check-design``: the property holds on the
tested set), 1 when a property is refuted, 2 on invalid input.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import properties as props
from .designs import DesignError, load_design
from .lattice import LatticeError, lll_reduce, successive_minima_check, svp_enumerate
from .simkit import (ConfigError, ExperimentConfig, InsufficientErrors, diversity_slope,
                     run_ber, select_window, write_outputs)

EXIT_OK, EXIT_REFUTED, EXIT_INVALID = 0, 1, 2

_INT_KEYS = {"n_r", "M", "max_trials", "seed", "block_size", "workers"}
_ALIASES = {"snr_db": "snr_points_db", "trials": "max_trials"}


def parse_config(text: str) -> dict:
    """Parse config text into ExperimentConfig keyword arguments."""
    known = {f.name for f in fields(ExperimentConfig)}
    out: dict = {}
    errors: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors[f"line {lineno}"] = f"expected 'key = value', got {line!r}"
            continue
        key, value = (p.strip() for p in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in known:
            errors[key] = f"line {lineno}: unknown key"
            continue
        try:
            if key in _INT_KEYS:
                out[key] = int(value)
            elif key == "target_bit_errors":
                out[key] = None if value.lower() in ("none", "") else int(value)
            elif key == "snr_points_db":
                out[key] = tuple(float(v) for v in value.replace(",", " ").split())
            elif key == "noiseless":
                if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(f"expected a boolean, got {value!r}")
                out[key] = value.lower() in ("true", "1", "yes")
            elif key == "delta":
                out[key] = float(value)
            else:
                out[key] = value
        except ValueError as exc:
            errors[key] = f"line {lineno}: {exc}"
    for key in ("design", "n_r", "M", "receiver", "snr_points_db"):
        if key not in out and key not in errors:
            errors[key] = "required key is missing"
    if all(k in out for k in ("design", "n_r", "M", "receiver", "snr_points_db")):
        # report value errors alongside syntax errors in one pass
        try:
            ExperimentConfig(**out).validate()
        except ConfigError as exc:
            for key, msg in exc.errors.items():
                errors.setdefault(key, msg)
    if errors:
        raise ConfigError(errors)
    return out


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_INVALID


def cmd_simulate(args) -> int:
    path = Path(args.config)
    try:
        kwargs = parse_config(path.read_text())
        if args.seed is not None:
            kwargs["seed"] = args.seed
        if args.workers is not None:
            kwargs["workers"] = args.workers
        cfg = ExperimentConfig(**kwargs)
        cfg.validate()
    except OSError as exc:
        return _fail(str(exc))
    except ConfigError as exc:
        print("error: invalid config", file=sys.stderr)
        for key, msg in exc.errors.items():
            print(f"  {key}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    curve = run_ber(cfg)
    csv_path, json_path = write_outputs(curve, args.out_dir, path.stem)
    print(f"{'snr_db':>8} {'bit_errors':>11} {'bits':>12} {'ber':>12}")
    for p in curve.points:
        flag = "  (low confidence)" if p.low_confidence else ""
        print(f"{p.snr_db:8.2f} {p.bit_errors:11d} {p.bits:12d} {p.ber:12.4e}{flag}")
    try:
        window = select_window(curve, n=3, min_errors=100)
        print(f"diversity slope over {window} dB: {diversity_slope(curve, window):.3f}")
    except InsufficientErrors:
        pass
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_check_design(args) -> int:
    try:
        design = load_design(args.design)
    except DesignError as exc:
        return _fail(str(exc))
    C = args.C
    budget = None
    if args.criterion != "rank":
        if (C is None) == (args.tail is None):
            return _fail("give exactly one of --C or --tail")
        if args.tail is not None:
            try:
                budget = props.choose_radius(design, args.tail)
            except ValueError as exc:
                return _fail(str(exc))
            C = budget.C
            print(f"radius from tail {args.tail:g}: c1 = {budget.c1:.6g}, c3 = {budget.c3:.6g}, "
                  f"C = {C:.6g}", flush=True)
    try:
        if args.criterion == "rnvs":
            report = props.check_rnvs(design, C, max_points=args.max_points)
        elif args.criterion == "nvd":
            report = props.check_nvd(design, C, max_points=args.max_points)
        else:
            report = props.check_rank(design, args.M, max_points=args.max_points)
    except props.BudgetError as exc:
        return _fail(str(exc))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{design.name}_{args.criterion}"
    (out / f"{stem}.json").write_text(report.to_json())
    (out / f"{stem}.txt").write_text(report.to_text())
    sys.stdout.write(report.to_text())
    if report.statistic == "sigma_min":
        print(f"min sigma^2  : {report.min_value ** 2:.12g}")
    if report.witness is not None and len(report.witnesses) > 1:
        shown = ", ".join(str(w) for w in report.witnesses[:64])
        more = " ..." if len(report.witnesses) > 64 else ""
        print(f"all witnesses: {shown}{more}")
    return EXIT_OK if report.holds else EXIT_REFUTED


def _grid(text: str) -> list[float]:
    if ":" in text:
        start, stop, num = text.split(":")
        return [float(v) for v in np.linspace(float(start), float(stop), int(num))]
    return [float(v) for v in text.replace(",", " ").split()]


def cmd_wishart(args) -> int:
    try:
        c1s = _grid(args.c1)
    except ValueError as exc:
        return _fail(f"bad --c1 grid: {exc}")
    if args.n_t < 1:
        return _fail("--n-t must be >= 1")
    if any(c < 0 for c in c1s):
        return _fail("c1 values must be non-negative")
    try:
        design = load_design(args.design)
    except DesignError as exc:
        return _fail(str(exc))
    from .designs import code_matrix
    c3 = code_matrix(design).sigma_min
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ccdf_rows = [(c, props.wishart_min_eig_ccdf(args.n_t, c)) for c in c1s]
    with open(out / f"wishart_ccdf_nt{args.n_t}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["c1", "ccdf"])
        w.writerows([repr(c), repr(p)] for c, p in ccdf_rows)
    curve = props.radius_curve(args.n_t, c3, [c for c in c1s if c > 0])
    with open(out / f"radius_curve_{design.name}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["log10_C", "log10_tail"])
        w.writerows([repr(a), repr(b)] for a, b in curve)
    print("c1,ccdf")
    for c, p in ccdf_rows:
        print(f"{c!r},{p!r}")
    return EXIT_OK


def _read_basis(path: Path) -> np.ndarray:
    rows = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(v) for v in line.split()])
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric entry") from None
        if len(rows[-1]) != len(rows[0]):
            raise ValueError(f"line {lineno}: expected {len(rows[0])} entries")
    if not rows:
        raise ValueError("basis file is empty")
    return np.array(rows)


def cmd_lattice(args) -> int:
    try:
        B = _read_basis(Path(args.basis))
        res = lll_reduce(B, args.delta)
        svp = svp_enumerate(B)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    np.set_printoptions(precision=6, suppress=True)
    print("reduced basis (rows):")
    print(res.reduced.rows)
    print("unimodular U (reduced = U @ basis):")
    print(res.unimodular)
    print(f"lambda_1 = {np.sqrt(svp.norm2):.10g}  (squared {svp.norm2:.10g}), "
          f"coefficients {svp.coefficients.tolist()}")
    n = B.shape[0]
    if n % 2 == 0 and n <= 8:
        try:
            rep = successive_minima_check(B, n // 2)
        except LatticeError as exc:
            print(f"successive-minima check skipped: {exc}")
        else:
            print(f"eps_1^2 = {rep.eps1_sq:.10g}, dual eps_{n}^2 = {rep.dual_eps_last_sq:.10g}, "
                  f"product = {rep.product:.10g} <= 2K^3+3K^2 = {rep.bound}: "
                  f"{'holds' if rep.holds else 'VIOLATED'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the config seed")
    common.add_argument("--workers", type=int, default=argparse.SUPPRESS,
                        help="worker processes; never changes results")
    common.add_argument("--out-dir", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="ifstbc", parents=[common],
                                description="Integer-forcing STBC toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run a BER experiment")
    s.add_argument("config", help="key = value config file")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("check-design", parents=[common], help="RNVS / NVD / rank check")
    c.add_argument("design", help="builtin name or design file")
    c.add_argument("criterion", choices=("rnvs", "nvd", "rank"))
    c.add_argument("--C", type=float, help="squared radius of the integer ball")
    c.add_argument("--tail", type=float, help="choose C so Prob(||d||^2 > C) <= tail")
    c.add_argument("--M", type=int, default=4, help="constellation size for 'rank'")
    c.add_argument("--max-points", type=int, default=props.DEFAULT_MAX_POINTS)
    c.set_defaults(func=cmd_check_design)

    w = sub.add_parser("wishart-ccdf", parents=[common],
                       help="smallest-eigenvalue CCDF and radius curve")
    w.add_argument("--n-t", type=int, default=2)
    w.add_argument("--c1", default="0:2:21", help="'start:stop:num' or comma list")
    w.add_argument("--design", default="alamouti", help="design whose c3 sets the radius curve")
    w.set_defaults(func=cmd_wishart)

    l = sub.add_parser("lattice", parents=[common], help="reduce a basis file")
    l.add_argument("basis", help="rows of whitespace-separated reals")
    l.add_argument("--delta", type=float, default=0.99)
    l.set_defaults(func=cmd_lattice)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("seed", None), ("workers", None), ("out_dir", "."), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
