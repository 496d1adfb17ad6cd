"""Configuration and result models shared by the engine and the benchmark CLI."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

from .rotation import THETA_MAX_BY_CASE, THETA_MIN_DEFAULT, RotationPolicy, TestCase

Algorithm = Literal["ga", "qiga", "dqiga"]
InitMode = Literal["uniform", "random-angle", "blocks"]
MutationScale = Literal["per-gene", "per-offspring"]
ProblemKind = Literal["onemax", "knapsack", "feature-selection"]
Phase = Literal["rotation", "mutation", "crossover"]

ALGORITHMS: tuple[Algorithm, ...] = ("ga", "qiga", "dqiga")
PHASES: tuple[Phase, ...] = ("rotation", "mutation", "crossover")

TEST_CASE_PROBABILITIES: dict[TestCase, tuple[float, float]] = {
    TestCase.T1: (0.2, 0.5),
    TestCase.T2: (0.4, 0.6),
    TestCase.T3: (0.6, 0.8),
}


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class SelectionConfig(_Frozen):
    """Thresholds for tournament, environment selection and elitism."""

    mean_threshold: float = Field(
        default=0.01, ge=0, description="Mean-score gap that decides a top-rank tournament."
    )
    param_threshold: float = Field(
        default=10, ge=0, description="Active-gene gap that lets std decide a tournament."
    )
    env_epsilon: float = Field(
        default=0.01, ge=0, description="Mean-score gap deciding environment contests."
    )
    elitism_fraction: float = Field(
        default=0.1, ge=0, le=1, description="Share of the next population filled by elites."
    )


class LevelConfig(_Frozen):
    """Chromosome lengthening bounds for D-QIGA."""

    min_length: int = Field(ge=1)
    max_length: int = Field(ge=1)
    interval: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_order(self) -> LevelConfig:
        if self.min_length > self.max_length:
            raise ValueError("min_length must not exceed max_length")
        return self


class BlockInitConfig(_Frozen):
    """Block-layout initialisation: block counts, data side length and segment size."""

    n_min: int = Field(default=1, ge=1)
    n_max: int = Field(default=4, ge=1)
    d: int = Field(default=28, ge=2, description="Side length of the d x d training images.")
    segment_size: int = Field(default=1, ge=1, description="Qubits per block.")

    @property
    def pooling_cap(self) -> int:
        return int(math.floor(math.log2(self.d)))

    @model_validator(mode="after")
    def _check_bounds(self) -> BlockInitConfig:
        if self.n_min > self.n_max:
            raise ValueError("n_min must not exceed n_max")
        return self


class EngineConfig(_Frozen):
    """Parameters for one GA / QIGA / D-QIGA run."""

    population_size: int = Field(default=50, ge=2)
    epochs: int = Field(default=100, ge=1)
    p_crossover: float = Field(default=0.2, ge=0, le=1)
    p_mutation: float = Field(default=0.5, ge=0, le=1)
    mutation_scale: MutationScale = "per-gene"
    rotation_test_case: TestCase = TestCase.T1
    theta_min: float = Field(default=THETA_MIN_DEFAULT, gt=0, le=math.pi / 2)
    theta_max: float = Field(default=THETA_MAX_BY_CASE[TestCase.T1], gt=0, le=math.pi / 2)
    boost_c: float = Field(default=0.95, ge=0, le=1)
    selection: SelectionConfig = Field(default_factory=SelectionConfig)
    level: LevelConfig | None = None
    init_mode: InitMode = "uniform"
    block_init: BlockInitConfig | None = None
    target_score: float | None = Field(default=None, ge=0, le=1)
    seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_consistency(self) -> EngineConfig:
        if self.theta_min > self.theta_max:
            raise ValueError("theta_min must not exceed theta_max")
        if self.init_mode == "blocks" and self.block_init is None:
            raise ValueError("init_mode 'blocks' requires block_init")
        return self

    @classmethod
    def for_test_case(cls, test_case: TestCase | int, **overrides: Any) -> EngineConfig:
        """Preset with the crossover, mutation and angle parameters of a test case."""

        case = TestCase(test_case)
        p_crossover, p_mutation = TEST_CASE_PROBABILITIES[case]
        theta_max = overrides.pop("theta_max", THETA_MAX_BY_CASE[case])
        theta_min = min(overrides.pop("theta_min", THETA_MIN_DEFAULT), theta_max)
        values: dict[str, Any] = {
            "p_crossover": p_crossover,
            "p_mutation": p_mutation,
            "rotation_test_case": case,
            "theta_min": theta_min,
            "theta_max": theta_max,
        }
        values.update(overrides)
        return cls(**values)

    def mutation_rate(self, length: int) -> float:
        """Per-gene rate for the mutation operators and the GA bit flip.

        ``per-offspring`` spreads ``p_mutation`` over the chromosome: on
        average ``p_mutation`` genes mutate per offspring.
        """

        if self.mutation_scale == "per-offspring":
            return min(1.0, self.p_mutation / max(length, 1))
        return self.p_mutation

    def rotation_policy(self, level_max: int = 1) -> RotationPolicy:
        return RotationPolicy.for_test_case(
            self.rotation_test_case,
            level_max=level_max,
            theta_min=self.theta_min,
            theta_max=self.theta_max,
        )


class BatchConfig(_Frozen):
    """Splits the fitness set into ``fitness_set_size // total_epochs`` batches."""

    total_epochs: int = Field(default=100, ge=1)
    fitness_set_size: int = Field(default=500, ge=1)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def every_step(self) -> int:
        return self.fitness_set_size // self.total_epochs

    @model_validator(mode="after")
    def _check_step(self) -> BatchConfig:
        if self.fitness_set_size < self.total_epochs:
            raise ValueError("fitness_set_size must be at least total_epochs")
        return self


class ProblemSpec(_Frozen):
    """Problem descriptor resolved by ``qiga.bootstrap.build_problem``."""

    kind: ProblemKind = "onemax"
    length: int | None = Field(default=None, ge=1)
    items: int = Field(default=20, ge=1)
    instance_seed: int = Field(default=0, ge=0)
    train_images: Path | None = None
    train_labels: Path | None = None
    fitness_images: Path | None = None
    fitness_labels: Path | None = None
    train_size: int = Field(default=1000, ge=1)
    fitness_size: int = Field(default=500, ge=1)
    total_epochs: int = Field(default=100, ge=1)

    @property
    def uses_idx(self) -> bool:
        return self.train_images is not None

    def label(self) -> str:
        if self.kind == "onemax":
            return f"onemax-{self.length or 32}"
        if self.kind == "knapsack":
            return f"knapsack-{self.items}"
        return "feature-selection-idx" if self.uses_idx else "feature-selection-synthetic"


class ExperimentSpec(_Frozen):
    """Sweep definition: algorithms x test cases x seeds on one problem."""

    algorithms: tuple[Algorithm, ...] = ALGORITHMS
    test_cases: tuple[TestCase, ...] = (TestCase.T1, TestCase.T2, TestCase.T3)
    seeds: tuple[int, ...] = (1,)
    problem: ProblemSpec = Field(default_factory=ProblemSpec)
    population_size: int = Field(default=50, ge=2)
    epochs: int = Field(default=100, ge=1)
    boost_c: float = Field(default=0.95, ge=0, le=1)
    selection: SelectionConfig = Field(default_factory=SelectionConfig)
    level: LevelConfig | None = None
    mutation_scale: MutationScale = "per-gene"
    init_mode: InitMode = "uniform"
    block_init: BlockInitConfig | None = None
    target_score: float | None = Field(default=None, ge=0, le=1)
    output: Path | None = None

    @model_validator(mode="after")
    def _check_non_empty(self) -> ExperimentSpec:
        if not self.algorithms:
            raise ValueError("algorithms must not be empty")
        if not self.test_cases:
            raise ValueError("test_cases must not be empty")
        if not self.seeds:
            raise ValueError("seeds must not be empty")
        return self

    def engine_config(self, test_case: TestCase, seed: int) -> EngineConfig:
        return EngineConfig.for_test_case(
            test_case,
            population_size=self.population_size,
            epochs=self.epochs,
            boost_c=self.boost_c,
            mutation_scale=self.mutation_scale,
            selection=self.selection,
            level=self.level,
            init_mode=self.init_mode,
            block_init=self.block_init,
            target_score=self.target_score,
            seed=seed,
        )


class LevelTrace(BaseModel):
    """Generations actually run at one D-QIGA level."""

    level: int
    length: int
    generations: int
    best_score: float


class TimingRow(BaseModel):
    """Per-phase wall-clock summary in seconds."""

    phase: Phase
    optimal: float
    worst: float
    average: float
    total: float


class RunSummary(BaseModel):
    """Final figures of one run, written as ``summary.json``."""

    algorithm: Algorithm
    test_case: TestCase
    seed: int
    problem: str
    generations: int
    evaluations: int
    best_fit: float
    avg_fit: float
    accuracy: float
    loss: float
    best_bits: str
    param_count: int
    level_trace: list[LevelTrace] = Field(default_factory=list)


class RunManifest(BaseModel):
    """Everything needed to replay a run bit-identically."""

    format_version: int = 1
    run_id: str
    algorithm: Algorithm
    engine: EngineConfig
    problem: ProblemSpec
