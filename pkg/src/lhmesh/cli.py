"""Command-line entry point: ``lhmesh run|sweep|validate|compare-fdtd``.

Exit codes: 0 success, 1 validation failure, 2 config error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, ScenarioConfig
from .engine import NumericalInstability
from .fdtd_ref import FdtdInstability
from .rbf import IllConditionedStencil

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("lhmesh")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lhmesh", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_flags(sp):
        sp.add_argument("--config", metavar="PATH", help="YAML scenario file (defaults if omitted)")
        sp.add_argument("--out", metavar="DIR", help="output directory")
        sp.add_argument("--steps", type=int, metavar="N")
        sp.add_argument("--snapshot-times", type=_floats, metavar="t1,t2,...")

    sp = sub.add_parser("run", help="run one scenario")
    scenario_flags(sp)
    sp = sub.add_parser("sweep", help="run one scenario per parameter value")
    scenario_flags(sp)
    sp.add_argument("--param", required=True, metavar="NAME",
                    help="nodes, alpha_c, dt_divisor or stencil_size")
    sp.add_argument("--values", required=True, metavar="v1,v2,...")
    sp.add_argument("--workers", type=int, default=1)
    sp = sub.add_parser("validate", help="run invariant suites")
    sp.add_argument("--suite", default="default", metavar="NAME")
    sp = sub.add_parser("compare-fdtd", help="run with the FDTD reference and report the image-plane error")
    scenario_flags(sp)
    return p


def _load(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config) if args.config else ScenarioConfig()
    if args.steps is not None:
        cfg.time.steps = args.steps
    if args.snapshot_times is not None:
        cfg.time.snapshot_times = args.snapshot_times
    if args.out is not None:
        cfg.output = args.out
    return cfg.validate()


def _sweep_values(param, text):
    from .scenario import SWEEP_PARAMS
    if param not in SWEEP_PARAMS:
        raise ConfigError([f"--param must be one of {sorted(SWEEP_PARAMS)}, got {param!r}"])
    kind = SWEEP_PARAMS[param][1]
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError([f"--values for {param} must be {kind.__name__}s, got {text!r}"]) from None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    from . import scenario

    try:
        if args.command == "validate":
            results = scenario.validate(args.suite)
            print(scenario.report_json(results))
            return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION
        cfg = _load(args)
        if args.command == "run":
            res = scenario.run_scenario(cfg)
            print(f"wrote {len(res.files) + 1} files to {res.directory}")
            for t, rep in res.focal_reports.items():
                state = "formed" if rep.formed else "not formed"
                print(f"t={t:.4e} s foci {state} {['%.4e' % x for x in rep.detected]}")
        elif args.command == "compare-fdtd":
            cfg.reference.enabled = True
            res = scenario.run_scenario(cfg)
            print(f"time-averaged L2 {res.mean_l2:.6e} over {res.errors.n_points} points")
        elif args.command == "sweep":
            values = _sweep_values(args.param, args.values)
            out = scenario.sweep(cfg, args.param, values, workers=args.workers)
            for v, l2 in zip(out.values, out.mean_l2):
                print(f"{args.param}={v} mean_l2={l2:.6e}")
            print(f"summary: {out.summary}")
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except IllConditionedStencil as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalInstability, FdtdInstability) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
