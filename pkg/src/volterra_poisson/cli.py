"""Command line entry point: ``volterra-poisson {run,table1,drift,verify}``.

Exit codes: 0 success, 1 numerical failure or failed check, 2 configuration
error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .exceptions import IntegrationError
from .harness import (
    ConfigError,
    ExperimentConfig,
    drift,
    format_report,
    format_table,
    run_experiment,
    run_verification,
    table1,
)
from .integrators import StepMethod
from .verify import DEFAULT_SEED

EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

METHODS = [m.value for m in StepMethod]


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(x) for x in str(text).split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value file; flags given explicitly override it")
    common.add_argument("--t-end", dest="t_end", type=float, help="final time (default 2000)")
    common.add_argument("--stride", type=int, help="record every n-th step (default 1)")
    common.add_argument("--out", type=Path, help="output path")
    common.add_argument("--seed", type=int, help=f"seed for random states (default {DEFAULT_SEED})")

    p = argparse.ArgumentParser(prog="volterra-poisson", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    single = argparse.ArgumentParser(add_help=False)
    single.add_argument("--m", type=int, help="lattice dimension, even >= 4 (default 20)")
    single.add_argument("--dt", type=float, help="step size (default 0.1)")

    run = sub.add_parser("run", parents=[common, single], help="integrate one configuration, write t,H1,H0,Iq,Ic CSV")
    run.add_argument("--method", choices=METHODS, help="default se")

    t1 = sub.add_parser("table1", parents=[common], help="error table over methods x m x dt")
    t1.add_argument("--method", type=_csv_list(StepMethod), default=None,
                    help="comma list (default se,lobatto2)")
    t1.add_argument("--m", type=_csv_list(int), default=None, help="comma list (default 20,40,80)")
    t1.add_argument("--dt", type=_csv_list(float), default=None, help="comma list (default 0.2,0.1,0.05)")
    t1.add_argument("--workers", type=int, default=1, help="parallel cells (default 1)")

    dr = sub.add_parser("drift", parents=[common, single], help="|I(t)-I(0)| series against a baseline")
    dr.add_argument("--method", choices=METHODS, help="default se")
    dr.add_argument("--baseline", choices=METHODS, default="rk4", help="default rk4")

    ve = sub.add_parser("verify", parents=[common], help="run the structure check suite")
    ve.add_argument("--m", type=_csv_list(int), default=None, help="comma list (default 4,6,20)")
    ve.add_argument("--states", type=int, default=20, help="random states per m (default 20)")
    return p


def _file_overrides(args) -> dict:
    if args.config is None:
        return {}
    return ExperimentConfig.parse_file(args.config)


def _single_config(args, default_out) -> ExperimentConfig:
    values = {"output_path": default_out}
    values.update(_file_overrides(args))
    for name, field_name in (("m", "m"), ("dt", "dt"), ("t_end", "t_end"), ("method", "method"),
                             ("stride", "record_stride"), ("out", "output_path"), ("seed", "seed")):
        v = getattr(args, name, None)
        if v is not None:
            values[field_name] = v
    return ExperimentConfig(**values)


def _from_file_or(args, name, file_values, key, default, parse):
    v = getattr(args, name)
    if v is not None:
        return v
    if key in file_values:
        return parse(file_values[key])
    return default


def cmd_run(args) -> int:
    cfg = _single_config(args, Path("run.csv"))
    row = run_experiment(cfg)
    print(format_table([row]), end="")
    return EXIT_OK


def cmd_table1(args) -> int:
    fv = _file_overrides(args)
    methods = _from_file_or(args, "method", fv, "method", [StepMethod.SYMPLECTIC_EULER, StepMethod.LOBATTO3AB2],
                            _csv_list(StepMethod))
    ms = _from_file_or(args, "m", fv, "m", [20, 40, 80], _csv_list(int))
    dts = _from_file_or(args, "dt", fv, "dt", [0.2, 0.1, 0.05], _csv_list(float))
    t_end = _from_file_or(args, "t_end", fv, "t_end", 2000.0, float)
    out = _from_file_or(args, "out", fv, "output_path", Path("table1"), Path)
    for m in ms:
        if m < 4 or m % 2:
            raise ConfigError(f"m must be even and >= 4, got {m}")
    if t_end <= 0 or any(dt <= 0 or dt > t_end for dt in dts):
        raise ConfigError("need 0 < dt <= t_end")
    rows = table1(methods, ms, dts, t_end, out=out, workers=args.workers)
    print(format_table(rows), end="")
    return EXIT_NUMERIC if any(r.failure for r in rows) else EXIT_OK


def cmd_drift(args) -> int:
    cfg = _single_config(args, Path("drift.csv"))
    drift(cfg, baseline_method=StepMethod(args.baseline))
    stem = cfg.output_path.with_suffix("")
    print(Path(f"{stem}_summary.txt").read_text(encoding="utf-8"), end="")
    return EXIT_OK


def cmd_verify(args) -> int:
    fv = _file_overrides(args)
    seed = _from_file_or(args, "seed", fv, "seed", DEFAULT_SEED, int)
    ms = _from_file_or(args, "m", fv, "m", [4, 6, 20], _csv_list(int))
    out = _from_file_or(args, "out", fv, "output_path", Path("verify_report.txt"), Path)
    for m in ms:
        if m < 4 or m % 2:
            raise ConfigError(f"m must be even and >= 4, got {m}")
    results = run_verification(seed=seed, m_list=ms, n_states=args.states)
    text = format_report(results, seed, ms)
    Path(out).write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


COMMANDS = {"run": cmd_run, "table1": cmd_table1, "drift": cmd_drift, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
