"""Column layouts and JSON schemas of every artefact the CLI writes."""

from __future__ import annotations

from typing import Any

from .models import RunManifest, RunSummary

GENERATIONS_COLUMNS = ("generation", "best_fit", "avg_fit")
TIMING_COLUMNS = ("phase", "optimal", "worst", "average", "total")

FITNESS_TABLE_COLUMNS = ("algorithm", "test_case", "best_fit", "avg_fit")
ACCURACY_TABLE_COLUMNS = ("algorithm", "test_case", "accuracy", "loss")
TIMING_TABLE_COLUMNS = ("algorithm", "test_case", "phase", "optimal", "worst", "average")

GENERATIONS_FILE = "generations.csv"
TIMING_FILE = "timing.csv"
SUMMARY_FILE = "summary.json"
MANIFEST_FILE = "manifest.json"
METRICS_FILE = "metrics.prom"

FITNESS_TABLE_FILE = "table_fitness.csv"
ACCURACY_TABLE_FILE = "table_accuracy.csv"
TIMING_TABLE_FILE = "table_timing.csv"

RUN_FILES = (GENERATIONS_FILE, TIMING_FILE, SUMMARY_FILE, MANIFEST_FILE)

FITNESS_DECIMALS = 6
SECONDS_DECIMALS = 3

CSV_COLUMNS: dict[str, tuple[str, ...]] = {
    GENERATIONS_FILE: GENERATIONS_COLUMNS,
    TIMING_FILE: TIMING_COLUMNS,
    FITNESS_TABLE_FILE: FITNESS_TABLE_COLUMNS,
    ACCURACY_TABLE_FILE: ACCURACY_TABLE_COLUMNS,
    TIMING_TABLE_FILE: TIMING_TABLE_COLUMNS,
}


def summary_schema() -> dict[str, Any]:
    return RunSummary.model_json_schema()


def manifest_schema() -> dict[str, Any]:
    return RunManifest.model_json_schema()


def format_fitness(value: float) -> str:
    return f"{value:.{FITNESS_DECIMALS}f}"


def format_seconds(value: float) -> str:
    return f"{value:.{SECONDS_DECIMALS}f}"
