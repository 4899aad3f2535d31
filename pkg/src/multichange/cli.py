"""Command line entry point.

    multichange run      --config exp.toml [--procedure ismap --q 0.5]
    multichange sweep    --config exp.toml --out sweep.csv [--bounds]
    multichange bounds   --config exp.toml --out bounds.csv
    multichange validate
    multichange --print-config

Exit codes: 0 success, 1 failed invariant check, 2 configuration error,
3 censoring gate failure (more than 1% of streams undeclared at the horizon).
"""

import argparse
import csv
import json
import sys

from . import bounds as bnd
from .errors import ConfigError
from .harness import (ExperimentConfig, dumps_config, load_config, run_experiment,
                      sweep_weighted_risk)

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_CENSORED = 0, 1, 2, 3


def build_parser():
    parser = argparse.ArgumentParser(prog="multichange", description=__doc__.split("\n")[0])
    parser.add_argument("--print-config", action="store_true",
                        help="print the default (or loaded) configuration and exit")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment file")
    common.add_argument("--seed", type=int)
    common.add_argument("--runs", type=int)
    common.add_argument("--out", help="CSV output path (default stdout)")
    common.add_argument("--json", dest="json_out", help="JSON summary path")
    common.add_argument("--workers", type=int)
    common.add_argument("--print-config", action="store_true")

    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", parents=[common], help="one procedure at one proportion")
    run.add_argument("--procedure", choices=["smap", "ismap", "simple", "dfdr"])
    run.add_argument("--q", type=float)
    run.add_argument("--K", type=int)
    run.add_argument("--records", help="write per-run records as JSON lines")

    sweep = sub.add_parser("sweep", parents=[common], help="grid over q, c and K")
    sweep.add_argument("--bounds", action="store_true", help="append asymptotic bound columns")
    sweep.add_argument("--g-star", type=float, help="mean sampling interval for g* bounds")
    sweep.add_argument("--best-q", help="write best-q-per-c table to this CSV")

    bounds = sub.add_parser("bounds", parents=[common], help="asymptotic ADD bound curves")
    bounds.add_argument("--g-star", type=float, default=1.0)
    bounds.add_argument("--kl", type=float, help="override D(f1||f0)")

    sub.add_parser("validate", parents=[common], help="run the invariant checks")
    return parser


def _config_from_args(args):
    overrides = {}
    for key in ("seed", "runs", "workers"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v
    if getattr(args, "config", None):
        return load_config(args.config, overrides)
    return ExperimentConfig.from_mapping(overrides)


def _write(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args, config):
    from .harness import run_cell
    from .metrics import summarize
    from .procedures import write_records

    procedure = args.procedure or config.procedures[0]
    q = config.q_grid[0] if args.q is None else args.q
    K = args.K or config.K
    result = run_experiment(config, procedures=[procedure], q_values=[q], K_values=[K])
    if args.records:
        recs = run_cell(config, config.procedure_config(procedure, q, K))
        with open(args.records, "w") as fh:
            write_records(recs, fh)
    return result


def cmd_sweep(args, config):
    result = run_experiment(config)
    if args.best_q:
        table = sweep_weighted_risk(result, config.c_grid)
        with open(args.best_q, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["c", "procedure", "K", "best_q", "monotone"],
                               lineterminator="\n")
            w.writeheader()
            w.writerows(table)
    return result


def cmd_bounds(args, config):
    model = config.model
    if args.kl is not None:
        kl_lo = kl_hi = args.kl
    elif config.scenario == "pvalue_glr":
        kl_lo, kl_hi = model.kl(model.b_max), model.kl(model.b_min)
    else:
        kl_lo = kl_hi = model.kl()
    rho = config.rho_assumed
    cols = ["K", "alpha", "rho", "kl", "g_star", "add_lb", "smap_ub", "ismap_ub",
            "smap_ub_gstar", "ismap_ub_gstar", "smap_ub_limit", "ratio", "ratio_limit"]
    lines = [",".join(cols)]
    for K in config.K_grid:
        s_g, i_g = bnd.gstar_upper_bounds(config.alpha, rho, kl_hi, args.g_star, K)
        s_ub = bnd.smap_upper_bound(config.alpha, rho, K)
        i_ub = bnd.ismap_upper_bound(config.alpha, rho)
        row = [K, config.alpha, rho, kl_lo, args.g_star,
               bnd.add_lower_bound(config.alpha, kl_lo, rho), s_ub, i_ub, s_g, i_g,
               bnd.smap_upper_bound_limit(config.alpha, rho), i_ub / s_ub,
               bnd.ratio_limit(config.alpha)]
        lines.append(",".join(format(v, ".10g") if isinstance(v, float) else str(v) for v in row))
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_validate(args, config):
    from .validation import run_checks

    failures = 0
    for name, ok, detail in run_checks(seed=config.seed):
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failures += not ok
    return EXIT_CHECK if failures else EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.print_config:
        sys.stdout.write(dumps_config(config))
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG

    try:
        if args.command == "bounds":
            return cmd_bounds(args, config)
        if args.command == "validate":
            return cmd_validate(args, config)
        result = cmd_run(args, config) if args.command == "run" else cmd_sweep(args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    with_bounds = getattr(args, "bounds", False)
    _write(result.to_csv(bounds=with_bounds, g_star=getattr(args, "g_star", None)), args.out)
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(result.to_json())
    if result.gate_failed:
        for cell in result.failed_cells:
            print(f"censoring gate: {json.dumps(cell)}", file=sys.stderr)
        return EXIT_CENSORED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
