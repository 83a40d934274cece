"""Batch trace runner and its outputs."""
from .output import CHART_METRICS, emit_charts, emit_csv, emit_summary, read_csv
from .runner import (
    COLUMNS, METHODS, Comparison, MetricsRow, RunSpec, StepRecord, compare_methods, parse_method, run_seed,
    run_trace, sweep_k,
)

__all__ = [
    "COLUMNS", "METHODS", "CHART_METRICS", "Comparison", "MetricsRow", "RunSpec", "StepRecord",
    "compare_methods", "emit_charts", "emit_csv", "emit_summary", "parse_method", "read_csv",
    "run_seed", "run_trace", "sweep_k",
]
