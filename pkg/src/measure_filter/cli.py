"""Command-line entry point: simulate, filter, validate.

Exit codes: 0 success, 1 failed validation check, 2 invalid configuration
or input, 3 resource cap hit, 4 observation times not strictly increasing.
"""
from __future__ import annotations

import argparse
import os
import sys

from ._mix import NonMonotoneTimes
from .dual import InstabilityError
from .dw import dw_filter
from .fv import fv_filter
from .io import (
    ConfigError,
    dumps,
    load_run_config,
    load_sim_config,
    read_dataset,
    write_dataset,
    write_json,
    write_results,
)
from .lattice import ResourceCapError
from .measures import BaseMeasure, new_prior, p0_from_dict
from .parametric import DirichletMixture, GammaMixture, cir_filter, wf_filter
from .simulation import SeedCountTooLarge, simulate
from .validation import SUITES, run_suite

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_RESOURCE, EXIT_TIMES = 0, 1, 2, 3, 4


def _threads(value) -> int:
    raw = value if value is not None else os.environ.get("MEASURE_FILTER_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"threads: expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"threads: expected a positive integer, got {n}")
    return n


def cmd_simulate(args) -> int:
    cfg = load_sim_config(args.config)
    write_dataset(simulate(cfg), args.out)
    return EXIT_OK


def _prior_and_runner(cfg):
    if cfg.model in ("fv", "dw"):
        base = BaseMeasure(cfg.theta, p0_from_dict(cfg.p0))
        prior = new_prior(base, beta=cfg.beta if cfg.model == "dw" else None,
                          sigma_speed=cfg.sigma_speed)
        if cfg.model == "fv":
            return prior, lambda b: fv_filter(prior, b, cfg.prune_eps)
        return prior, lambda b: dw_filter(prior, b, cfg.prune_eps, mode=cfg.dw_weight_mode,
                                          convention=cfg.dw_binomial_convention)
    if cfg.model == "wf":
        prior = DirichletMixture.prior(cfg.alpha)
        return prior, lambda b: wf_filter(prior, b, cfg.prune_eps, cfg.sigma_speed)
    prior = GammaMixture.prior(cfg.alpha, cfg.beta)
    return prior, lambda b: cir_filter(prior, b, cfg.prune_eps, cfg.sigma_speed)


def cmd_filter(args) -> int:
    cfg = load_run_config(args.config)
    batches = read_dataset(args.data)
    prior, run = _prior_and_runner(cfg)
    try:
        records = run(batches)
    except (ValueError, TypeError) as err:
        if isinstance(err, NonMonotoneTimes):
            raise
        raise ConfigError(f"data: {err}") from None
    write_results(records, prior, args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    report = run_suite(args.suite, seed=args.seed)
    for c in report["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"[{status}] criterion {c['criterion']}: {c['name']} "
              f"value={c['value']:.3g} tol={c['tolerance']:.3g} {c['detail']}".rstrip())
    if args.report:
        write_json(report, args.report)
    else:
        print(dumps({"suite": report["suite"], "passed": report["passed"]}))
    return EXIT_OK if report["passed"] else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="measure-filter",
        description="Exact filtering of Fleming-Viot and Dawson-Watanabe signals.",
    )
    parser.add_argument("--threads", default=None,
                        help="worker threads (default: $MEASURE_FILTER_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset from a SimConfig")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("filter", help="run the filter on a JSONL dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("validate", help="run an acceptance suite")
    p.add_argument("--suite", required=True, choices=SUITES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _threads(args.threads)
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NonMonotoneTimes as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_TIMES
    except (ResourceCapError, SeedCountTooLarge) as err:
        print(f"resource cap: {err}; raise prune_eps or lengthen time gaps", file=sys.stderr)
        return EXIT_RESOURCE
    except InstabilityError as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return EXIT_RESOURCE
    except FileNotFoundError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
