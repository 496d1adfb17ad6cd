from pathlib import Path

import pytest
from pydantic import ValidationError

from qiga.bootstrap import build_problem
from qiga.config import Settings
from qiga.errors import QigaError, SpecError
from qiga.experiment import (
    compute_oracle,
    parse_seeds,
    parse_spec_text,
    plan_runs,
    replay,
    report,
    run_experiment,
)
from qiga.fitness import knapsack_dp_oracle, random_knapsack
from qiga.models import ProblemSpec
from qiga.rotation import TestCase
from qiga.schemas import (
    ACCURACY_TABLE_FILE,
    CSV_COLUMNS,
    FITNESS_TABLE_FILE,
    GENERATIONS_FILE,
    MANIFEST_FILE,
    METRICS_FILE,
    SUMMARY_FILE,
    TIMING_TABLE_FILE,
)
from qiga.store import read_csv

SPEC_TEXT = """
# small OneMax sweep
algorithms = ga, qiga, dqiga
test_cases = T1
seeds = 1..2
population_size = 6
epochs = 5
problem = onemax
length = 12   # bits
"""


def _settings(tmp_path: Path) -> Settings:
    return Settings(output_root=tmp_path / "runs", cache_dir=tmp_path / "cache", workers=2)


def test_parse_seeds():
    assert parse_seeds("1..5") == (1, 2, 3, 4, 5)
    assert parse_seeds("3, 1,7") == (3, 1, 7)
    for bad in ("5..1", "a,b", ""):
        with pytest.raises(SpecError):
            parse_seeds(bad)


def test_parse_spec_text():
    spec = parse_spec_text(
        SPEC_TEXT
        + "level_min = 3\nlevel_max = 12\nlevel_interval = 3\n"
        + "init_mode = blocks\nblock_n_min = 1\nblock_n_max = 3\nblock_d = 8\nblock_segment = 2\n"
        + "elitism_fraction = 0.2\ntarget_score = none\n"
        + "mutation_scale = per-offspring\n"
    )
    assert spec.algorithms == ("ga", "qiga", "dqiga")
    assert spec.test_cases == (TestCase.T1,)
    assert spec.seeds == (1, 2)
    assert spec.problem == ProblemSpec(kind="onemax", length=12)
    assert (spec.level.min_length, spec.level.max_length, spec.level.interval) == (3, 12, 3)
    assert spec.block_init.pooling_cap == 3
    assert spec.selection.elitism_fraction == 0.2
    assert spec.target_score is None

    engine = spec.engine_config(TestCase.T1, 2)
    assert engine.seed == 2
    assert (engine.p_crossover, engine.p_mutation) == (0.2, 0.5)
    assert engine.mutation_scale == "per-offspring"


def test_parse_spec_text_errors():
    with pytest.raises(SpecError, match="unknown key 'colour'"):
        parse_spec_text("colour = blue\n")
    with pytest.raises(SpecError, match=":2:"):
        parse_spec_text("epochs = 5\npopulation_size\n")
    with pytest.raises(SpecError):
        parse_spec_text("epochs = many\n")
    with pytest.raises(SpecError):
        parse_spec_text("test_cases = T9\n")
    with pytest.raises(ValidationError):
        parse_spec_text("population_size = 1\n")
    with pytest.raises(ValidationError):
        parse_spec_text("algorithms = pso\n")


def test_plan_runs_covers_the_sweep():
    spec = parse_spec_text(SPEC_TEXT + "test_cases = T1, T3\n")
    manifests = plan_runs(spec)
    assert len(manifests) == 3 * 2 * 2
    assert manifests[0].run_id == "ga-t1-s1"
    assert {m.run_id for m in manifests} >= {"dqiga-t3-s2", "qiga-t1-s2"}
    assert all(m.engine.seed in (1, 2) for m in manifests)


@pytest.mark.asyncio
async def test_run_experiment_writes_run_directories(tmp_path):
    settings = _settings(tmp_path)
    spec = parse_spec_text(SPEC_TEXT)
    summaries = await run_experiment(spec, settings)

    assert len(summaries) == 6
    root = settings.output_root
    assert (root / METRICS_FILE).exists()
    for summary in summaries:
        run_dir = root / f"{summary.algorithm}-t1-s{summary.seed}"
        assert (run_dir / MANIFEST_FILE).exists()
        rows = read_csv(run_dir / GENERATIONS_FILE)
        assert len(rows) == summary.generations == 5
        assert summary.evaluations == 6 * 5
        assert len(summary.best_bits) <= 12


@pytest.mark.asyncio
async def test_runs_are_byte_identical_across_invocations(tmp_path):
    settings = _settings(tmp_path)
    spec = parse_spec_text(SPEC_TEXT)
    await run_experiment(spec, settings, output=tmp_path / "first", workers=1)
    await run_experiment(spec, settings, output=tmp_path / "second", workers=3)
    for run_id in ("ga-t1-s1", "qiga-t1-s2", "dqiga-t1-s1"):
        for name in (GENERATIONS_FILE, SUMMARY_FILE, MANIFEST_FILE):
            first = (tmp_path / "first" / run_id / name).read_bytes()
            assert first == (tmp_path / "second" / run_id / name).read_bytes()


@pytest.mark.asyncio
async def test_replay_reproduces_a_run(tmp_path):
    settings = _settings(tmp_path)
    await run_experiment(parse_spec_text(SPEC_TEXT), settings)
    source = settings.output_root / "qiga-t1-s2"
    target = tmp_path / "replayed" / "qiga-t1-s2"

    summary = replay(source / MANIFEST_FILE, target, settings)
    assert summary.seed == 2
    assert (target / GENERATIONS_FILE).read_bytes() == (source / GENERATIONS_FILE).read_bytes()
    assert (target / SUMMARY_FILE).read_bytes() == (source / SUMMARY_FILE).read_bytes()

    with pytest.raises(QigaError):
        replay(tmp_path / "nowhere", tmp_path / "out", settings)


@pytest.mark.asyncio
async def test_knapsack_replay_ignores_a_later_oracle(tmp_path):
    settings = _settings(tmp_path)
    spec = parse_spec_text(
        "algorithms = qiga\ntest_cases = T2\nseeds = 4\npopulation_size = 6\nepochs = 5\n"
        "problem = knapsack\nitems = 20\ninstance_seed = 0\n"
    )
    [summary] = await run_experiment(spec, settings)
    assert not list(settings.cache_dir.glob("*.json"))

    compute_oracle(spec.problem, settings)
    assert any(settings.cache_dir.glob("*.json"))

    source = settings.output_root / "qiga-t2-s4"
    target = tmp_path / "replayed" / "qiga-t2-s4"
    replayed = replay(source, target, settings)
    assert replayed.best_fit == summary.best_fit
    assert (target / GENERATIONS_FILE).read_bytes() == (source / GENERATIONS_FILE).read_bytes()
    assert (target / SUMMARY_FILE).read_bytes() == (source / SUMMARY_FILE).read_bytes()


def test_knapsack_problem_uses_the_exact_optimum_without_a_cache(tmp_path):
    problem_spec = ProblemSpec(kind="knapsack", items=20, instance_seed=0)
    expected = float(knapsack_dp_oracle(random_knapsack(20, 0)))
    assert build_problem(problem_spec, _settings(tmp_path)).optimum == expected


@pytest.mark.asyncio
async def test_report_aggregates_seeds(tmp_path):
    settings = _settings(tmp_path)
    summaries = await run_experiment(parse_spec_text(SPEC_TEXT), settings)
    written = report(settings.output_root, tmp_path / "tables")
    assert [path.name for path in written] == [
        FITNESS_TABLE_FILE,
        ACCURACY_TABLE_FILE,
        TIMING_TABLE_FILE,
    ]

    fitness = read_csv(tmp_path / "tables" / FITNESS_TABLE_FILE)
    assert [row["algorithm"] for row in fitness] == ["ga", "qiga", "dqiga"]
    qiga_best = [s.best_fit for s in summaries if s.algorithm == "qiga"]
    assert float(fitness[1]["best_fit"]) == pytest.approx(sum(qiga_best) / 2, abs=1e-6)

    for path in written:
        header = path.read_text(encoding="utf-8").splitlines()[0]
        assert tuple(header.split(",")) == CSV_COLUMNS[path.name]

    timing = read_csv(tmp_path / "tables" / TIMING_TABLE_FILE)
    assert {row["phase"] for row in timing} == {"rotation", "mutation", "crossover"}
    for row in timing:
        assert float(row["optimal"]) <= float(row["average"]) <= float(row["worst"])

    with pytest.raises(QigaError):
        report(tmp_path / "empty", tmp_path / "tables")


@pytest.mark.asyncio
async def test_feature_selection_sweep_reports_loss(tmp_path):
    settings = _settings(tmp_path)
    spec = parse_spec_text(
        "algorithms = qiga\ntest_cases = T3\nseeds = 4\npopulation_size = 4\nepochs = 4\n"
        "problem = feature-selection\nlength = 16\ntrain_size = 60\nfitness_size = 20\n"
        "total_epochs = 5\n"
    )
    [summary] = await run_experiment(spec, settings)
    assert summary.problem == "feature-selection-synthetic"
    assert 0.0 <= summary.accuracy <= 1.0
    assert summary.loss >= 0.0


def test_compute_oracle_caches_knapsack_optimum(tmp_path):
    settings = _settings(tmp_path)
    problem_spec = ProblemSpec(kind="knapsack", items=12, instance_seed=1)
    outcome = compute_oracle(problem_spec, settings)

    expected = knapsack_dp_oracle(random_knapsack(12, 1))
    assert outcome["value"] == float(expected)
    assert Path(outcome["cached"]).exists()
    assert build_problem(problem_spec, settings).optimum == float(expected)


def test_compute_oracle_other_problems(tmp_path):
    settings = _settings(tmp_path)
    onemax = compute_oracle(ProblemSpec(kind="onemax", length=20), settings)
    assert onemax == {"kind": "onemax", "value": 20.0, "cached": None}

    baseline = compute_oracle(
        ProblemSpec(kind="feature-selection", length=8, train_size=40, fitness_size=20), settings
    )
    assert baseline["kind"] == "centroid-baseline"
    assert baseline["value"] == pytest.approx(0.0)
