"""Experiment sweeps: spec-file parsing, concurrent runs, replay, oracle and report tables."""

from __future__ import annotations

import asyncio
import logging
import re
from collections import defaultdict
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from . import metrics
from .bootstrap import (
    BASELINE_ORACLE,
    KNAPSACK_ORACLE,
    build_problem,
    load_oracle_cache,
    problem_fingerprint,
)
from .config import Settings
from .engine import RunResult, run_algorithm
from .errors import QigaError, SpecError
from .fitness import FeatureSelectionProblem, Problem, knapsack_dp_oracle, random_knapsack
from .models import (
    ALGORITHMS,
    PHASES,
    Algorithm,
    EngineConfig,
    ExperimentSpec,
    ProblemSpec,
    RunManifest,
    RunSummary,
)
from .rotation import TestCase
from .schemas import (
    ACCURACY_TABLE_COLUMNS,
    ACCURACY_TABLE_FILE,
    FITNESS_TABLE_COLUMNS,
    FITNESS_TABLE_FILE,
    MANIFEST_FILE,
    METRICS_FILE,
    TIMING_TABLE_COLUMNS,
    TIMING_TABLE_FILE,
    format_fitness,
    format_seconds,
)
from .store import RunRecord, RunStore, load_json, write_csv

logger = logging.getLogger(__name__)

_SEED_RANGE = re.compile(r"^(\d+)\.\.(\d+)$")


def _split_list(value: str) -> list[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def parse_seeds(value: str) -> tuple[int, ...]:
    """``1..5`` (inclusive) or a comma-separated list."""

    text = value.strip()
    match = _SEED_RANGE.match(text)
    try:
        if match:
            low, high = int(match.group(1)), int(match.group(2))
            if high < low:
                raise SpecError(f"Empty seed range '{value}'.")
            return tuple(range(low, high + 1))
        seeds = tuple(int(item) for item in _split_list(text))
    except ValueError as exc:
        raise SpecError(f"Invalid seeds '{value}'.") from exc
    if not seeds:
        raise SpecError("At least one seed is required.")
    return seeds


def _as_int(value: str) -> int:
    return int(value)


def _as_float(value: str) -> float:
    return float(value)


def _as_optional_float(value: str) -> float | None:
    return None if value.lower() in {"", "none"} else float(value)


def _as_algorithms(value: str) -> tuple[str, ...]:
    return tuple(item.lower() for item in _split_list(value))


def _as_test_cases(value: str) -> tuple[TestCase, ...]:
    return tuple(TestCase.parse(item) for item in _split_list(value))


# key -> (section, field, converter); section None is the top level of ExperimentSpec
SPEC_KEYS: dict[str, tuple[str | None, str, Callable[[str], Any]]] = {
    "algorithms": (None, "algorithms", _as_algorithms),
    "test_cases": (None, "test_cases", _as_test_cases),
    "seeds": (None, "seeds", parse_seeds),
    "population_size": (None, "population_size", _as_int),
    "epochs": (None, "epochs", _as_int),
    "boost_c": (None, "boost_c", _as_float),
    "init_mode": (None, "init_mode", str),
    "mutation_scale": (None, "mutation_scale", str),
    "target_score": (None, "target_score", _as_optional_float),
    "output": (None, "output", Path),
    "problem": ("problem", "kind", str),
    "length": ("problem", "length", _as_int),
    "items": ("problem", "items", _as_int),
    "instance_seed": ("problem", "instance_seed", _as_int),
    "train_images": ("problem", "train_images", Path),
    "train_labels": ("problem", "train_labels", Path),
    "fitness_images": ("problem", "fitness_images", Path),
    "fitness_labels": ("problem", "fitness_labels", Path),
    "train_size": ("problem", "train_size", _as_int),
    "fitness_size": ("problem", "fitness_size", _as_int),
    "total_epochs": ("problem", "total_epochs", _as_int),
    "mean_threshold": ("selection", "mean_threshold", _as_float),
    "param_threshold": ("selection", "param_threshold", _as_float),
    "env_epsilon": ("selection", "env_epsilon", _as_float),
    "elitism_fraction": ("selection", "elitism_fraction", _as_float),
    "level_min": ("level", "min_length", _as_int),
    "level_max": ("level", "max_length", _as_int),
    "level_interval": ("level", "interval", _as_int),
    "block_n_min": ("block_init", "n_min", _as_int),
    "block_n_max": ("block_init", "n_max", _as_int),
    "block_d": ("block_init", "d", _as_int),
    "block_segment": ("block_init", "segment_size", _as_int),
}


def parse_spec_text(text: str, *, source: str = "<spec>") -> ExperimentSpec:
    """Parse flat ``key = value`` lines; ``#`` starts a comment, unknown keys fail."""

    values: dict[str, Any] = {}
    sections: dict[str, dict[str, Any]] = defaultdict(dict)
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if not sep or not key:
            raise SpecError(f"{source}:{number}: expected 'key = value', got '{raw.strip()}'.")
        if key not in SPEC_KEYS:
            raise SpecError(f"{source}:{number}: unknown key '{key}'.")
        section, field, convert = SPEC_KEYS[key]
        try:
            converted = convert(value)
        except (ValueError, QigaError) as exc:
            raise SpecError(f"{source}:{number}: invalid value for '{key}': {exc}") from exc
        if section is None:
            values[field] = converted
        else:
            sections[section][field] = converted
    values.update(sections)
    return ExperimentSpec.model_validate(values)


def parse_spec_file(path: Path) -> ExperimentSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"Cannot read spec file {path}: {exc}") from exc
    return parse_spec_text(text, source=str(path))


def run_id_for(algorithm: str, test_case: TestCase, seed: int) -> str:
    return f"{algorithm}-t{int(test_case)}-s{seed}"


def summarise(
    result: RunResult, algorithm: Algorithm, test_case: TestCase, seed: int, problem: ProblemSpec
) -> RunSummary:
    best = result.best
    assert best.phenotype is not None
    return RunSummary(
        algorithm=algorithm,
        test_case=test_case,
        seed=seed,
        problem=problem.label(),
        generations=result.generations,
        evaluations=result.evaluations,
        best_fit=result.best_score,
        avg_fit=result.avg_scores[-1],
        accuracy=result.accuracy,
        loss=result.loss,
        best_bits=str(best.phenotype),
        param_count=best.stats.param_count,
        level_trace=list(result.level_trace),
    )


def execute_run(
    manifest: RunManifest, problem: Problem, store: RunStore, *, directory: Path | None = None
) -> RunSummary:
    """Run one manifest to completion and persist its four files."""

    engine = manifest.engine
    try:
        result = run_algorithm(manifest.algorithm, engine, problem)
    except Exception:
        metrics.record_run(manifest.algorithm, "error")
        raise
    metrics.record_run(manifest.algorithm, "ok")
    summary = summarise(
        result, manifest.algorithm, engine.rotation_test_case, engine.seed, manifest.problem
    )
    store.save(
        manifest,
        summary,
        result.best_scores,
        result.avg_scores,
        result.timing,
        directory=directory,
    )
    return summary


def plan_runs(spec: ExperimentSpec) -> list[RunManifest]:
    manifests = []
    for algorithm in spec.algorithms:
        for test_case in spec.test_cases:
            for seed in spec.seeds:
                engine: EngineConfig = spec.engine_config(test_case, seed)
                manifests.append(
                    RunManifest(
                        run_id=run_id_for(algorithm, test_case, seed),
                        algorithm=algorithm,
                        engine=engine,
                        problem=spec.problem,
                    )
                )
    return manifests


async def run_experiment(
    spec: ExperimentSpec,
    settings: Settings,
    *,
    output: Path | None = None,
    workers: int | None = None,
) -> list[RunSummary]:
    """Run every (algorithm, test case, seed) of ``spec`` with bounded concurrency."""

    root = output or spec.output or settings.output_root
    store = RunStore(Path(root))
    problem = await asyncio.to_thread(build_problem, spec.problem, settings)
    manifests = plan_runs(spec)
    limit = asyncio.Semaphore(workers or settings.workers)
    logger.info(
        "experiment_started runs=%s problem=%s output=%s workers=%s",
        len(manifests),
        spec.problem.label(),
        root,
        workers or settings.workers,
    )

    async def _one(manifest: RunManifest) -> RunSummary:
        async with limit:
            return await asyncio.to_thread(execute_run, manifest, problem, store)

    summaries = await asyncio.gather(*(_one(manifest) for manifest in manifests))
    Path(root).mkdir(parents=True, exist_ok=True)
    (Path(root) / METRICS_FILE).write_bytes(metrics.metrics_payload())
    logger.info("experiment_finished runs=%s output=%s", len(summaries), root)
    return list(summaries)


def _manifest_path(source: Path) -> Path:
    return source / MANIFEST_FILE if source.is_dir() else source


def replay(source: Path, output: Path, settings: Settings) -> RunSummary:
    """Re-run a stored manifest into ``output``."""

    path = _manifest_path(Path(source))
    try:
        manifest = RunManifest.model_validate(load_json(path))
    except ValidationError as exc:
        raise QigaError(f"Invalid manifest {path}: {exc}") from exc
    problem = build_problem(manifest.problem, settings)
    logger.info("replay_started run_id=%s source=%s output=%s", manifest.run_id, path, output)
    return execute_run(manifest, problem, RunStore(output.parent), directory=output)


def compute_oracle(problem_spec: ProblemSpec, settings: Settings) -> dict[str, Any]:
    """Compute and cache the reference value of a problem."""

    cache = load_oracle_cache(settings)
    if problem_spec.kind == "onemax":
        length = build_problem(problem_spec, settings).encoding_length
        return {"kind": "onemax", "value": float(length), "cached": None}
    if problem_spec.kind == "knapsack":
        instance = random_knapsack(problem_spec.items, problem_spec.instance_seed)
        optimum = knapsack_dp_oracle(instance)
        path = cache.put(
            KNAPSACK_ORACLE,
            instance.fingerprint(),
            float(optimum),
            items=instance.items,
            capacity=instance.capacity,
        )
        return {"kind": KNAPSACK_ORACLE, "value": float(optimum), "cached": str(path)}
    problem = build_problem(problem_spec, settings)
    assert isinstance(problem, FeatureSelectionProblem)
    baseline = problem.baseline_error()
    path = cache.put(
        BASELINE_ORACLE,
        problem_fingerprint(problem_spec),
        baseline,
        accuracy=1.0 - baseline,
        features=problem.encoding_length,
    )
    return {"kind": BASELINE_ORACLE, "value": baseline, "cached": str(path)}


def _group(records: Sequence[RunRecord]) -> dict[tuple[str, int], list[RunRecord]]:
    groups: dict[tuple[str, int], list[RunRecord]] = defaultdict(list)
    for record in records:
        groups[(record.summary.algorithm, int(record.summary.test_case))].append(record)
    order = {name: index for index, name in enumerate(ALGORITHMS)}
    return dict(sorted(groups.items(), key=lambda item: (order[item[0][0]], item[0][1])))


def report(source: Path, output: Path) -> list[Path]:
    """Aggregate run directories into fitness, accuracy and timing tables.

    Fitness and accuracy figures are seed means. Timing takes the minimum of
    per-run optima, the maximum of per-run worsts and the mean of averages.
    """

    records = list(RunStore(Path(source)).iter_runs())
    if not records:
        raise QigaError(f"No run directories found under {source}.")
    groups = _group(records)

    fitness_rows, accuracy_rows, timing_rows = [], [], []
    for (algorithm, test_case), members in groups.items():
        summaries = [member.summary for member in members]
        fitness_rows.append(
            (
                algorithm,
                str(test_case),
                format_fitness(float(np.mean([s.best_fit for s in summaries]))),
                format_fitness(float(np.mean([s.avg_fit for s in summaries]))),
            )
        )
        accuracy_rows.append(
            (
                algorithm,
                str(test_case),
                format_fitness(float(np.mean([s.accuracy for s in summaries]))),
                format_fitness(float(np.mean([s.loss for s in summaries]))),
            )
        )
        for phase in PHASES:
            rows = [row for member in members for row in member.timing if row.phase == phase]
            if not rows:
                continue
            optimal = min(row.optimal for row in rows)
            worst = max(row.worst for row in rows)
            average = min(max(float(np.mean([row.average for row in rows])), optimal), worst)
            timing_rows.append(
                (
                    algorithm,
                    str(test_case),
                    phase,
                    format_seconds(optimal),
                    format_seconds(worst),
                    format_seconds(average),
                )
            )

    output.mkdir(parents=True, exist_ok=True)
    written = [
        output / FITNESS_TABLE_FILE,
        output / ACCURACY_TABLE_FILE,
        output / TIMING_TABLE_FILE,
    ]
    write_csv(written[0], FITNESS_TABLE_COLUMNS, fitness_rows)
    write_csv(written[1], ACCURACY_TABLE_COLUMNS, accuracy_rows)
    write_csv(written[2], TIMING_TABLE_COLUMNS, timing_rows)
    logger.info("report_written runs=%s groups=%s output=%s", len(records), len(groups), output)
    return written
