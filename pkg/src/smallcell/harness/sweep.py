"""
Monte Carlo sweeps: work units on a process pool, persisted as they finish.

A work unit is one drop at one user density; it evaluates every demand and
every baseline N_AP of the configuration on that drop.
"""
import asyncio
import math
import time
from collections import defaultdict
from concurrent.futures import Executor, ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
import structlog
from pydantic import BaseModel

from smallcell.adapters.database import DatabaseManager, ResultDAO
from smallcell.adapters.export import (
    AGGREGATE_CSV,
    MANIFEST_JSON,
    RESULTS_CSV,
    write_aggregate_csv,
    write_manifest,
    write_results_csv,
)
from smallcell.core.errors import DropError
from smallcell.core.models import AggregateRow, ResultRow
from smallcell.harness.pipeline import drop_seed, run_drop
from smallcell.utils.config import ExperimentConfig
from smallcell.utils.logging import configure_logging

logger = structlog.get_logger(__name__)

DATABASE_FILE = "results.sqlite"


class WorkUnit(BaseModel):
    """One drop at one user density."""

    lambda_u_ratio: float
    drop_index: int
    seed: int

    @property
    def key(self) -> Tuple[float, int]:
        """Identity used by the result store."""
        return (self.lambda_u_ratio, self.drop_index)


def plan_units(cfg: ExperimentConfig) -> List[WorkUnit]:
    """Work units of a sweep; drop ``i`` uses the same seed at every density."""
    return [
        WorkUnit(lambda_u_ratio=ratio, drop_index=i, seed=drop_seed(cfg, i))
        for ratio in cfg.lambda_u_ratios
        for i in range(cfg.drops)
    ]


def execute_unit(payload: Dict[str, Any], lambda_u_ratio: float, drop_index: int) -> List[Dict[str, Any]]:
    """
    Worker entry point: run one drop from a serialized configuration.

    Rows travel back as plain dicts.
    """
    cfg = ExperimentConfig.model_validate(payload)
    rows = run_drop(cfg, drop_seed(cfg, drop_index), lambda_u_ratio, drop_index)
    return [row.model_dump(mode="json") for row in rows]


class SweepRunner:
    """
    Runs the work units of an experiment and stores their rows.

    Finished units found in the result store are skipped, so a sweep can be
    interrupted and resumed.
    """

    def __init__(self, cfg: ExperimentConfig, dao: Optional[ResultDAO] = None):
        """
        Initialize the runner.

        Args:
            cfg: Experiment settings
            dao: Result store; rows are only kept in memory when omitted
        """
        self.cfg = cfg
        self.dao = dao
        self.digest = cfg.digest()
        self.failed: List[DropError] = []
        self.completed = 0
        self.skipped = 0
        self._rows: List[ResultRow] = []
        self._stopping = False
        self._executor: Optional[Executor] = None

    def stop(self) -> None:
        """Ask the runner to stop after the units in flight; pending units are cancelled."""
        if not self._stopping:
            logger.info("Sweep stop requested", digest=self.digest)
        self._stopping = True
        if self._executor is not None:
            self._executor.shutdown(wait=False, cancel_futures=True)

    @property
    def interrupted(self) -> bool:
        """Whether :meth:`stop` was called."""
        return self._stopping

    def _make_executor(self) -> Optional[Executor]:
        if self.cfg.workers <= 1:
            return None
        return ProcessPoolExecutor(
            max_workers=self.cfg.workers,
            initializer=configure_logging,
            initargs=(self.cfg.log_level, self.cfg.log_format),
        )

    async def _pending(self) -> List[WorkUnit]:
        units = plan_units(self.cfg)
        done: Set[Tuple[float, int]] = set()
        if self.dao is not None:
            done = await self.dao.completed_units(self.digest)
        pending = [u for u in units if u.key not in done]
        self.skipped = len(units) - len(pending)
        if self.skipped:
            logger.info("Resuming sweep", digest=self.digest, skipped=self.skipped)
        return pending

    async def _store(self, unit: WorkUnit, rows: List[ResultRow]) -> None:
        if self.dao is not None:
            await self.dao.save_unit(self.digest, unit.key, rows)
        else:
            self._rows.extend(rows)
        self.completed += 1

    async def run(self) -> List[ResultRow]:
        """
        Run every pending unit and return all rows of the configuration.

        Returns:
            Rows sorted by (scheme, lambda_u, demand, n_ap, drop_index)
        """
        pending = await self._pending()
        payload = self.cfg.model_dump(mode="json")
        loop = asyncio.get_running_loop()
        self._executor = self._make_executor()
        logger.info(
            "Sweep started",
            digest=self.digest,
            units=len(pending),
            workers=self.cfg.workers,
        )

        # at most `workers` units in flight, one at a time without a pool
        slots = asyncio.Semaphore(max(1, self.cfg.workers))

        async def launch(unit: WorkUnit) -> Tuple[WorkUnit, List[Dict[str, Any]]]:
            async with slots:
                if self._executor is None:
                    found = await asyncio.to_thread(
                        execute_unit, payload, unit.lambda_u_ratio, unit.drop_index
                    )
                else:
                    found = await loop.run_in_executor(
                        self._executor, execute_unit, payload, unit.lambda_u_ratio, unit.drop_index
                    )
            return unit, found

        tasks = [asyncio.ensure_future(launch(u)) for u in pending]
        try:
            for next_done in asyncio.as_completed(tasks):
                if self._stopping:
                    break
                try:
                    unit, found = await next_done
                except DropError as e:
                    logger.error("Drop failed", seed=e.seed, error=str(e.cause), exc_info=True)
                    self.failed.append(e)
                    continue
                except asyncio.CancelledError:
                    if self._stopping:
                        break
                    raise
                await self._store(unit, [ResultRow.model_validate(r) for r in found])
                logger.info(
                    "Drop finished",
                    seed=unit.seed,
                    drop_index=unit.drop_index,
                    lambda_u_ratio=unit.lambda_u_ratio,
                    completed=self.completed,
                    total=len(pending),
                )
        finally:
            for task in tasks:
                task.cancel()
            await asyncio.gather(*tasks, return_exceptions=True)
            if self._executor is not None:
                self._executor.shutdown(wait=True, cancel_futures=True)
                self._executor = None

        logger.info(
            "Sweep finished",
            digest=self.digest,
            completed=self.completed,
            failed=len(self.failed),
            interrupted=self._stopping,
        )
        if self.dao is not None:
            return await self.dao.fetch_rows(self.digest)
        return sorted(self._rows, key=ResultRow.sort_key)


def _mean_stderr(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if len(arr) < 2:
        return float(arr.mean()), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(len(arr)))


def aggregate(rows: Sequence[ResultRow]) -> List[AggregateRow]:
    """
    Mean and standard error of every metric per (scheme, lambda_u, demand, N_AP).

    Returns:
        One AggregateRow per sweep point, in the merge order of the rows
    """
    groups: Dict[tuple, List[ResultRow]] = defaultdict(list)
    for row in sorted(rows, key=ResultRow.sort_key):
        groups[(row.scheme, row.lambda_f, row.lambda_u, row.demand_bps, row.n_ap)].append(row)

    out: List[AggregateRow] = []
    for (scheme, lambda_f, lambda_u, demand, n_ap), members in groups.items():
        outage = _mean_stderr([r.outage_fraction for r in members])
        min_rate = _mean_stderr([r.min_rate_bps for r in members])
        min_norm = _mean_stderr([r.min_normalized for r in members])
        throughput = _mean_stderr([r.throughput_bps for r in members])
        shortfall = _mean_stderr([r.ap_shortfall for r in members])
        out.append(
            AggregateRow(
                scheme=scheme,
                demand_bps=demand,
                lambda_f=lambda_f,
                lambda_u=lambda_u,
                n_ap=n_ap,
                drops=len(members),
                outage_mean=outage[0],
                outage_stderr=outage[1],
                min_rate_mean=min_rate[0],
                min_rate_stderr=min_rate[1],
                min_normalized_mean=min_norm[0],
                min_normalized_stderr=min_norm[1],
                throughput_mean=throughput[0],
                throughput_stderr=throughput[1],
                ap_shortfall_mean=shortfall[0],
                ap_shortfall_stderr=shortfall[1],
                mean_ap_load=float(np.mean([r.mean_ap_load for r in members])),
            )
        )
    return out


class SweepResult(BaseModel):
    """Files and counts of a finished sweep."""

    results_csv: Path
    aggregate_csv: Path
    manifest: Path
    rows: int
    failed_seeds: List[int]
    interrupted: bool


async def run_sweep(
    cfg: ExperimentConfig,
    runner_hook: Optional[Callable[[SweepRunner], None]] = None,
    fresh: bool = False,
) -> SweepResult:
    """
    Run an experiment, then export rows, aggregates and the manifest.

    Args:
        cfg: Experiment settings
        runner_hook: Called with the SweepRunner before it starts (used to install
            signal handlers)
        fresh: Discard stored rows of this configuration first

    Returns:
        SweepResult with the written paths
    """
    out_dir = Path(cfg.output_dir)
    started = time.perf_counter()
    async with DatabaseManager(str(out_dir / DATABASE_FILE)) as db:
        dao = ResultDAO(db)
        if fresh:
            await dao.clear(cfg.digest())
        runner = SweepRunner(cfg, dao)
        if runner_hook is not None:
            runner_hook(runner)
        rows = await runner.run()

    wall = time.perf_counter() - started
    results_csv = await write_results_csv(out_dir / RESULTS_CSV, rows)
    aggregate_csv = await write_aggregate_csv(out_dir / AGGREGATE_CSV, aggregate(rows))
    manifest = await write_manifest(
        out_dir / MANIFEST_JSON,
        {
            "config": cfg.model_dump(mode="json"),
            "config_digest": cfg.digest(),
            "wall_time_s": wall,
            "rows": len(rows),
            "units_run": runner.completed,
            "units_resumed": runner.skipped,
            "failed_seeds": sorted(e.seed for e in runner.failed),
            "interrupted": runner.interrupted,
            "seed_rule": "drop i uses seed base_seed + i at every sweep point",
        },
    )
    return SweepResult(
        results_csv=results_csv,
        aggregate_csv=aggregate_csv,
        manifest=manifest,
        rows=len(rows),
        failed_seeds=sorted(e.seed for e in runner.failed),
        interrupted=runner.interrupted,
    )
