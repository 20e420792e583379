# src/mamsim/scripts/matrix.py
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from loguru import logger

from mamsim.config import ExperimentConfig, RunSpec
from mamsim.db import get_engine, init_db, store_records
from mamsim.errors import ProtocolError
from mamsim.metrics import Report, RunRecord, summarize
from mamsim.redist.reconfig import ReconfigRun


@dataclass
class MatrixResult:
    records: list[RunRecord]
    report: Report


def _ensure_parent(path: str):
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def execute(config: ExperimentConfig, spec: RunSpec) -> RunRecord:
    """One run of the matrix; writes its trace when a trace directory is set."""
    run = ReconfigRun(
        spec.ns,
        spec.nd,
        spec.method,
        spec.strategy,
        data=config.data.descriptor(),
        app=config.app,
        cost=config.cost,
        seed=spec.seed,
        collective_blocks_background=config.runtime.collective_blocks_background,
    )
    record = run.run()
    trace_dir = config.output.trace_dir
    if trace_dir:
        run.rt.export_trace(os.path.join(trace_dir, f"{spec.name}.trace"))
    return record


def run_matrix(config: ExperimentConfig) -> MatrixResult:
    specs = config.runs()
    logger.info(f"matrix: {len(config.matrix())} pairs x {len(config.variants())} variants x {config.repeats} repeats = {len(specs)} runs")
    if config.output.trace_dir:
        os.makedirs(config.output.trace_dir, exist_ok=True)

    if config.workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            # map keeps run-index order
            records = list(pool.map(execute, [config] * len(specs), specs))
    else:
        records = [execute(config, spec) for spec in specs]

    bad = [spec.name for spec, rec in zip(specs, records) if not rec.data_ok]
    if bad:
        raise ProtocolError(f"drain data differs from source in {len(bad)} runs: {', '.join(bad)}")

    report = summarize(records, include_threading_in_min=config.include_threading_in_min)
    out = config.output
    if out.report:
        _ensure_parent(out.report)
        report.to_csv(out.report)
        logger.info(f"report written to {out.report}")
    if out.jsonl:
        _ensure_parent(out.jsonl)
        report.to_jsonl(out.jsonl)
    if out.db:
        engine = get_engine(out.db)
        init_db(engine)
        n = store_records(engine, records)
        logger.info(f"stored {n} runs in {out.db}")
    return MatrixResult(records, report)
