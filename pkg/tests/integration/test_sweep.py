"""
Integration tests for sweeps, persistence and result files.
"""
import csv
import json
import threading
import time

import numpy as np
import pytest

from smallcell.core.models import ResultRow
from smallcell.harness import sweep
from smallcell.harness.sweep import SweepRunner, aggregate, plan_units, run_sweep


def read_rows(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_plan_units(small_config):
    """Test that drop i uses seed base_seed + i at every density."""
    cfg = small_config.model_copy(update={"lambda_u_ratios": [3.0, 6.0]})
    units = plan_units(cfg)

    assert len(units) == 6
    assert [u.seed for u in units if u.lambda_u_ratio == 6.0] == [10, 11, 12]


@pytest.mark.asyncio
async def test_sweep_writes_all_files(small_config):
    """Test row counts, aggregates and the manifest of a sweep."""
    result = await run_sweep(small_config)
    per_drop = len(small_config.demands_bps) * (1 + len(small_config.n_ap_values))

    assert result.rows == small_config.drops * per_drop
    assert result.failed_seeds == []
    assert not result.interrupted
    assert len(read_rows(result.results_csv)) == result.rows

    aggregates = read_rows(result.aggregate_csv)
    assert len(aggregates) == per_drop
    assert {int(a["drops"]) for a in aggregates} == {small_config.drops}

    manifest = json.loads(result.manifest.read_text())
    assert manifest["config_digest"] == small_config.digest()
    assert manifest["units_run"] == small_config.drops


@pytest.mark.asyncio
async def test_sweep_resumes_from_the_store(small_config):
    """Test that a second run skips finished units and rewrites identical files."""
    first = await run_sweep(small_config)
    first_bytes = first.results_csv.read_bytes()
    runners = []

    second = await run_sweep(small_config, runner_hook=runners.append)

    assert runners[0].completed == 0
    assert runners[0].skipped == small_config.drops
    assert second.results_csv.read_bytes() == first_bytes

    fresh = await run_sweep(small_config, runner_hook=runners.append, fresh=True)
    assert runners[1].completed == small_config.drops
    assert fresh.results_csv.read_bytes() == first_bytes


@pytest.mark.asyncio
async def test_worker_count_does_not_change_results(small_config, tmp_path):
    """Test byte-identical results for one worker and a process pool."""
    serial = await run_sweep(small_config)
    parallel_cfg = small_config.model_copy(
        update={"workers": 2, "output_dir": tmp_path / "parallel"}
    )
    parallel = await run_sweep(parallel_cfg)

    assert parallel.results_csv.read_bytes() == serial.results_csv.read_bytes()


@pytest.mark.asyncio
async def test_stopped_sweep_reports_interruption(small_config):
    """Test that stopping before any unit finishes exports an interrupted run."""
    result = await run_sweep(small_config, runner_hook=lambda runner: runner.stop())

    assert result.interrupted
    assert result.rows < small_config.drops * 6


@pytest.mark.asyncio
async def test_in_memory_runner_and_aggregates(small_config):
    """Test aggregates against a direct recomputation."""
    rows = await SweepRunner(small_config).run()
    aggregates = aggregate(rows)

    assert rows == sorted(rows, key=ResultRow.sort_key)
    for agg in aggregates:
        members = [
            r
            for r in rows
            if r.scheme == agg.scheme and r.demand_bps == agg.demand_bps and r.n_ap == agg.n_ap
        ]
        outage = np.array([r.outage_fraction for r in members])
        assert agg.drops == len(members)
        assert agg.outage_mean == pytest.approx(outage.mean())
        assert agg.outage_stderr == pytest.approx(outage.std(ddof=1) / np.sqrt(len(outage)))
        assert agg.min_rate_mean == pytest.approx(np.mean([r.min_rate_bps for r in members]))


@pytest.mark.asyncio
async def test_single_worker_runs_one_unit_at_a_time(small_config, mocker):
    """Test that workers = 1 never has two drops in flight."""
    real = sweep.execute_unit
    lock = threading.Lock()
    state = {"running": 0, "peak": 0}

    def tracked(*args):
        with lock:
            state["running"] += 1
            state["peak"] = max(state["peak"], state["running"])
        try:
            time.sleep(0.01)
            return real(*args)
        finally:
            with lock:
                state["running"] -= 1

    mocker.patch("smallcell.harness.sweep.execute_unit", side_effect=tracked)
    cfg = small_config.model_copy(update={"drops": 5})
    rows = await SweepRunner(cfg).run()

    assert state["peak"] == 1
    assert len({r.drop_index for r in rows}) == 5
