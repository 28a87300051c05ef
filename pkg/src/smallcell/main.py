"""
Main entry point for the smallcell command-line interface.

Subcommands:
    simulate   run a Monte Carlo sweep and write results.csv, aggregate.csv, manifest.json
    drop       run a single seed and print a per-stage summary as JSON
    analyze    write the closed-form curves as CSV
    validate   run the invariant suite (``--full`` adds the sweep-level checks)
"""
import argparse
import asyncio
import json
import signal
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import structlog
from pydantic import ValidationError

from smallcell import __version__
from smallcell.adapters.export import write_curve_csv, write_text
from smallcell.allocation.coloring import export_dimacs
from smallcell.analytics.stochastic import (
    AnalyticsConfig,
    CountModel,
    ap_load_curve,
    most_probable_distance,
    outage_curve,
    system_load_curve,
    typical_user_load,
    user_load_curve,
)
from smallcell.core.errors import SmallCellError
from smallcell.core.models import Scheme
from smallcell.harness.pipeline import prepare_drop, run_fixed, run_hierarchical, schemes_for
from smallcell.harness.sweep import SweepRunner, run_sweep
from smallcell.harness.validation import full_checks, quick_checks
from smallcell.utils.config import ExperimentConfig, Scenario, load_config
from smallcell.utils.logging import configure_logging

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_BAD_CONFIG = 2


def handle_signal(runner: SweepRunner):
    """Signal handler for graceful shutdown."""

    def _handler(signum, frame):
        logger.info("Received shutdown signal", signal=signum)
        runner.stop()

    return _handler


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    """Argument parser; experiment flags mirror ExperimentConfig fields."""
    parser = argparse.ArgumentParser(prog="smallcell", description=__doc__.splitlines()[1])
    parser.add_argument("--version", action="version", version=f"smallcell {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--scenario", choices=[s.value for s in Scenario])
    common.add_argument("--n-prbs", dest="n_prbs", type=int)
    common.add_argument("--tx-power-dbm", dest="tx_power_dbm", type=float)
    common.add_argument("--d-tilde", dest="d_tilde_m", type=float)
    common.add_argument("--region-radius", dest="region_radius_m", type=float)
    common.add_argument("--lambda-f", dest="lambda_f", type=float)
    common.add_argument("--lambda-u-ratios", dest="lambda_u_ratios", type=_floats)
    common.add_argument("--deployment-mode", dest="deployment_mode")
    common.add_argument("--demands", dest="demands_bps", type=_floats, help="Comma-separated bit/s")
    common.add_argument("--n-ap", dest="n_ap_values", type=_ints, help="Comma-separated N_AP values")
    common.add_argument("--drops", type=int)
    common.add_argument("--base-seed", dest="base_seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--output-dir", dest="output_dir", type=Path)
    common.add_argument("--log-level", dest="log_level")
    common.add_argument("--log-format", dest="log_format", choices=["json", "text"])

    sub = parser.add_subparsers(dest="command", required=True)
    simulate = sub.add_parser("simulate", parents=[common], help="Run a Monte Carlo sweep")
    simulate.add_argument("--fresh", action="store_true", help="Discard stored rows first")

    drop = sub.add_parser("drop", parents=[common], help="Run a single drop")
    drop.add_argument("--seed", type=int, default=None, help="Drop seed (default: base seed)")
    drop.add_argument("--dimacs", type=Path, help="Also write the expanded graph (DIMACS)")

    analyze = sub.add_parser("analyze", parents=[common], help="Write closed-form curves")
    analyze.add_argument("--l-tilde", dest="l_tilde", type=int, default=5)
    analyze.add_argument(
        "--count-model", choices=[m.value for m in CountModel], default=CountModel.POISSON.value
    )

    validate = sub.add_parser("validate", parents=[common], help="Run the check suite")
    validate.add_argument("--full", action="store_true", help="Include Monte Carlo sweeps")
    return parser


CONFIG_FLAGS = (
    "scenario",
    "n_prbs",
    "tx_power_dbm",
    "d_tilde_m",
    "region_radius_m",
    "lambda_f",
    "lambda_u_ratios",
    "deployment_mode",
    "demands_bps",
    "n_ap_values",
    "drops",
    "base_seed",
    "workers",
    "output_dir",
    "log_level",
    "log_format",
)


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Configuration from file and environment with CLI flags on top."""
    overrides = {name: getattr(args, name, None) for name in CONFIG_FLAGS}
    return load_config(args.config, **overrides)


async def cmd_simulate(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    """Run the sweep; partial results are exported when interrupted."""

    previous = {sig: signal.getsignal(sig) for sig in (signal.SIGINT, signal.SIGTERM)}

    def install(runner: SweepRunner) -> None:
        for sig in previous:
            signal.signal(sig, handle_signal(runner))

    try:
        result = await run_sweep(cfg, runner_hook=install, fresh=args.fresh)
    finally:
        for sig, handler in previous.items():
            signal.signal(sig, handler)
    print(result.model_dump_json(indent=2))
    if result.failed_seeds or result.interrupted:
        return EXIT_FAILED
    return EXIT_OK


def _outcome_summary(outcome) -> Dict[str, Any]:
    metrics = outcome.metrics
    return {
        "scheme": outcome.scheme.value,
        "demand_bps": outcome.demand_bps,
        "n_ap": outcome.n_ap,
        "total_load": float(np.sum(outcome.loads)),
        "granted_prbs": outcome.allocation.granted,
        "colors_used": outcome.colors_used,
        "ap_shortfall": outcome.ap_shortfall,
        "outage_fraction": metrics.outage_fraction,
        "min_rate_bps": metrics.min_rate,
        "throughput_bps": metrics.throughput,
    }


async def cmd_drop(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    """Run one seed through every stage and print what each produced."""
    seed = args.seed if args.seed is not None else cfg.base_seed
    drop = prepare_drop(cfg, seed)
    logger.info(
        "Drop prepared",
        seed=drop.seed,
        n_aps=drop.realization.n_aps,
        n_users=drop.realization.n_users,
        clamped_links=int(drop.channel.clamped.sum()) if drop.channel.clamped is not None else 0,
    )
    outcomes = []
    for demand in cfg.demands_bps:
        if Scheme.HIERARCHICAL in schemes_for(cfg.scenario):
            outcome = run_hierarchical(cfg, drop, demand)
            logger.info("Hierarchical scheme evaluated", **_outcome_summary(outcome))
            outcomes.append(_outcome_summary(outcome))
            if args.dimacs:
                path = args.dimacs.with_name(f"{args.dimacs.stem}_{int(demand)}{args.dimacs.suffix}")
                await write_text(path, export_dimacs(outcome.graph))
        if Scheme.FIXED in schemes_for(cfg.scenario):
            for n_ap in cfg.n_ap_values:
                outcome = run_fixed(cfg, drop, demand, n_ap)
                logger.info("Fixed allocation evaluated", **_outcome_summary(outcome))
                outcomes.append(_outcome_summary(outcome))

    summary = {
        "seed": drop.seed,
        "n_aps": drop.realization.n_aps,
        "n_users": drop.realization.n_users,
        "users_per_ap": [len(m) for m in drop.association.members],
        "outcomes": outcomes,
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


async def cmd_analyze(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    """Write user-, AP- and system-load CDFs and the outage curve per user density."""
    out_dir = Path(cfg.output_dir)
    model = CountModel(args.count_model)
    for ratio in cfg.lambda_u_ratios:
        acfg = AnalyticsConfig.from_experiment(cfg, ratio)
        suffix = "" if len(cfg.lambda_u_ratios) == 1 else f"_u{ratio:g}"
        user_cols: Dict[str, Any] = {}
        ap_cols: Dict[str, Any] = {}
        system_cols: Dict[str, Any] = {}
        for demand in cfg.demands_bps:
            grid, cdf = user_load_curve(demand, acfg)
            user_cols[f"n_R{int(demand)}"], user_cols[f"cdf_R{int(demand)}"] = grid, cdf
            grid, cdf = ap_load_curve(demand, acfg)
            ap_cols[f"n_R{int(demand)}"], ap_cols[f"cdf_R{int(demand)}"] = grid, cdf
            grid, cdf = system_load_curve(demand, args.l_tilde, acfg)
            system_cols[f"n_R{int(demand)}"], system_cols[f"cdf_R{int(demand)}"] = grid, cdf
        rates, outage = outage_curve(cfg.demands_bps, acfg, model)
        n_star = [typical_user_load(r, acfg) for r in rates]

        await write_curve_csv(out_dir / f"user_load_cdf{suffix}.csv", user_cols)
        await write_curve_csv(out_dir / f"ap_load_cdf{suffix}.csv", ap_cols)
        await write_curve_csv(out_dir / f"system_load_cdf{suffix}.csv", system_cols)
        await write_curve_csv(
            out_dir / f"outage_vs_demand{suffix}.csv",
            {"demand_bps": rates, "n_star": n_star, "outage_probability": outage},
        )
        logger.info(
            "Analytic curves written",
            lambda_u_ratio=ratio,
            gamma0=acfg.gamma0,
            d_star=most_probable_distance(acfg.lambda_f),
            output_dir=str(out_dir),
        )
    return EXIT_OK


async def cmd_validate(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    """Run the checks and print the report; exit 1 when any fails."""
    results = await full_checks(cfg) if args.full else quick_checks()
    report = {
        "passed": all(r.passed for r in results),
        "checks": [r.model_dump() for r in results],
    }
    print(json.dumps(report, indent=2))
    return EXIT_OK if report["passed"] else EXIT_FAILED


COMMANDS = {
    "simulate": cmd_simulate,
    "drop": cmd_drop,
    "analyze": cmd_analyze,
    "validate": cmd_validate,
}


async def async_main(argv: Optional[List[str]] = None) -> int:
    """Async main function."""
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ValidationError as e:
        configure_logging()
        logger.error("Invalid configuration", error=str(e))
        return EXIT_BAD_CONFIG

    configure_logging(cfg.log_level, cfg.log_format)
    logger.info("Configuration loaded", command=args.command, digest=cfg.digest())
    try:
        return await COMMANDS[args.command](cfg, args)
    except SmallCellError as e:
        logger.error("Command failed", command=args.command, error=str(e), exc_info=True)
        return EXIT_FAILED


def main():
    """Main entry point for the application."""
    try:
        exit_code = asyncio.run(async_main())
        sys.exit(exit_code)
    except KeyboardInterrupt:
        logger.info("Application interrupted")
        sys.exit(EXIT_FAILED)
    except Exception as e:
        logger.error("Fatal error", error=str(e), exc_info=True)
        sys.exit(EXIT_FAILED)


if __name__ == "__main__":
    main()
