"""Command-line front end.

    sliceorch solve    --config CFG [--out POLICY.csv]
    sliceorch evaluate --config CFG [--policy optimal|greedy] [--out REPORT.csv]
    sliceorch simulate --config CFG [--policy ...] [--horizon N] [--warmup N] [--seed S] [--out M.csv] [--trace]
    sliceorch sweep    --config CFG --sweep SPEC.json --out DIR

Exit codes: 0 success, 1 usage or configuration error, 2 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .actions import ActionIndexMap
from .analysis import REPORT_FIELDS
from .errors import ConfigError, ContractViolation, ConvergenceError, UnsupportedModelError
from .experiments import (POLICIES, SWEEP_FIELDS, SweepSpec, figure_series,
                          run_evaluation, run_sweep, slug, solve_policy)
from .io import POLICY_FIELDS, policy_rows, write_csv
from .model import ScenarioConfig, enumerate_states
from .simulator import TRACE_FIELDS, SimulationSettings, simulate

log = logging.getLogger("sliceorch")

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGENCE = 0, 1, 2

METRICS_FIELDS = ("scenario_id", "policy", "seed", "horizon", "warmup", "slots", "avg_reward",
                  "reward_stderr", "arrivals_g", "arrivals_b", "admissions_g", "admissions_b",
                  "drops_g", "drops_b", "drop_fraction_g", "drop_fraction_b", "drop_rate_g",
                  "drop_rate_b", "mean_sg", "mean_sb", "mean_mg", "mean_mb")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load(path) -> tuple[ScenarioConfig, str]:
    try:
        return ScenarioConfig.load(path), Path(path).stem
    except OSError as exc:
        raise ConfigError(None, f"cannot read {path}: {exc.strerror}") from None


def cmd_solve(args) -> int:
    config, _ = _load(args.config)
    space = enumerate_states(config)
    policy = solve_policy(config, "optimal", space)
    write_csv(args.out, POLICY_FIELDS, policy_rows(policy, space, ActionIndexMap.for_scenario(config, space)))
    out = sys.stderr if args.out in (None, "-") else sys.stdout
    print(f"states: {len(space)}", file=out)
    print(f"iterations: {policy.iterations}", file=out)
    print(f"residual: {policy.residual:.9g}", file=out)
    print(f"value_at_empty: {policy.values[space.empty_index]:.9g}", file=out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    config, scenario_id = _load(args.config)
    report = run_evaluation(config, args.policy, scenario_id)
    row = report.row()
    write_csv(args.out, REPORT_FIELDS, [[row[k] for k in REPORT_FIELDS]])
    return EXIT_OK


def cmd_simulate(args) -> int:
    config, scenario_id = _load(args.config)
    if args.horizon <= 0:
        raise UsageError("--horizon must be positive")
    if args.warmup is not None and not 0 <= args.warmup < args.horizon:
        raise UsageError("--warmup must satisfy 0 <= warmup < horizon")
    if not 0 <= args.seed < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    if args.trace and args.out in (None, "-"):
        raise UsageError("--trace needs --out (trace goes to <out>.trace.csv)")
    settings = SimulationSettings(args.horizon, args.warmup, args.seed)
    space = enumerate_states(config)
    policy = solve_policy(config, args.policy, space)

    trace_rows = [] if args.trace else None
    metrics = simulate(config, policy, settings, space,
                       trace=trace_rows.append if trace_rows is not None else None)
    row = dict(scenario_id=scenario_id, policy=args.policy, seed=settings.seed,
               horizon=settings.horizon, warmup=settings.warmup, **metrics.row())
    write_csv(args.out, METRICS_FIELDS, [[row[k] for k in METRICS_FIELDS]])
    if trace_rows is not None:
        write_csv(Path(args.out).with_suffix(".trace.csv"), TRACE_FIELDS, trace_rows)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config, scenario_id = _load(args.config)
    if args.sweep is None:
        raise UsageError("sweep needs --sweep SPEC.json")
    if args.out in (None, "-"):
        raise UsageError("sweep needs --out DIR")
    try:
        spec = SweepSpec.load(args.sweep)
    except OSError as exc:
        raise ConfigError(None, f"cannot read {args.sweep}: {exc.strerror}") from None
    points = run_sweep(config, spec, scenario_id)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", SWEEP_FIELDS, [p.row() for p in points])
    for (metric, policy), series in figure_series(points).items():
        write_csv(out / f"{slug(spec.parameter)}__{metric}__{policy}.csv", ("value", metric), series)
    log.info("wrote %d sweep rows to %s", len(points), out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sliceorch", description="Cross-slice admission control MDP toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, policy=True):
        p.add_argument("--config", required=True, help="scenario JSON")
        p.add_argument("--out", default=None, help="output path ('-' or omitted: stdout)")
        if policy:
            p.add_argument("--policy", choices=POLICIES, default="optimal")

    p = sub.add_parser("solve", help="value iteration; writes the policy table")
    common(p, policy=False)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("evaluate", help="stationary analysis of a policy")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="Monte-Carlo run of a policy")
    common(p)
    p.add_argument("--horizon", type=int, default=100_000)
    p.add_argument("--warmup", type=int, default=None, help="default: 1%% of horizon")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", action="store_true", help="also write a per-slot trace CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="evaluate policies over a parameter grid")
    common(p, policy=False)
    p.add_argument("--sweep", default=None, help="sweep spec JSON")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError, ContractViolation, UnsupportedModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
