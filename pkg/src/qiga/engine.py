"""Run drivers: classical GA baseline, QIGA and the dynamic-length D-QIGA.

Every random draw comes from a substream keyed by (seed, generation,
stream id), so a run is fully determined by its configuration and seed.
Generation 0 evaluates the initial population and each later generation
evaluates exactly ``population_size`` offspring.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from . import metrics
from .errors import ChromosomeError, OperatorError
from .fitness import Problem
from .models import BlockInitConfig, EngineConfig, LevelConfig, LevelTrace, TimingRow
from .operators import (
    FIXED_LENGTH_OPS,
    VARIABLE_LENGTH_OPS,
    ElitismScores,
    Individual,
    MutationOp,
    binary_tournament,
    compare_fitness,
    elitism_update,
    environment_select,
    generate_offspring,
    rank_indices,
)
from .qcore import (
    BinaryChromosome,
    QuantumChromosome,
    level_schedule,
    measure,
    random_angle_chromosome,
    resize_chromosome,
)
from .rotation import RotationPolicy, boost_chromosome, update_population
from .timing import PhaseTimer

logger = logging.getLogger(__name__)

STREAM_INIT = 0
STREAM_MEASURE = 1
STREAM_SELECT = 2
STREAM_VARIATION = 3
STREAM_ELITISM = 4
STREAM_ENVIRONMENT = 5

BLOCK_CATALOG = ("pooling", "plain")
BLOCK_CANDIDATES = 3
POOLING_THETA = math.pi / 8


def derive_substream(seed: int, generation: int, index: int) -> np.random.Generator:
    """Independent generator keyed by (seed, generation, index)."""

    return np.random.default_rng(np.random.SeedSequence([seed, generation, index]))


@dataclass(frozen=True)
class RunResult:
    """Per-generation traces and final figures of one run."""

    algorithm: str
    best_scores: tuple[float, ...]
    avg_scores: tuple[float, ...]
    best: Individual
    accuracy: float
    loss: float
    evaluations: int
    timing: tuple[TimingRow, ...]
    level_trace: tuple[LevelTrace, ...] = ()
    max_norm_deviation: float = 0.0

    @property
    def generations(self) -> int:
        return len(self.best_scores)

    @property
    def best_score(self) -> float:
        return self.best_scores[-1]


@dataclass(frozen=True)
class BlockLayout:
    """Block kinds, consecutive-block connections and pooling count of one individual.

    Connections are recorded for inspection; fitness never reads them.
    """

    kinds: tuple[str, ...]
    connections: tuple[tuple[int, int], ...]
    pooling_count: int
    segment_size: int

    @property
    def length(self) -> int:
        return len(self.kinds) * self.segment_size

    def to_chromosome(self, length: int) -> QuantumChromosome:
        """Pooling segments lean towards bit 0; plain segments and the tail stay uniform."""

        theta = np.full(length, math.pi / 4)
        for block, kind in enumerate(self.kinds):
            if kind == "pooling":
                start = block * self.segment_size
                theta[start : start + self.segment_size] = POOLING_THETA
        return QuantumChromosome.from_theta(theta)


def init_population_uniform(
    population_size: int,
    length: int,
    *,
    mode: str = "uniform",
    rng: np.random.Generator | None = None,
) -> list[QuantumChromosome]:
    """``uniform``: every qubit at θ = π/4; ``random-angle``: θ drawn per gene."""

    if population_size < 2:
        raise OperatorError(f"Population size must be >= 2, got {population_size}.")
    if length < 1:
        raise ChromosomeError(f"Chromosome length must be >= 1, got {length}.")
    if mode == "uniform":
        return [QuantumChromosome.uniform(length) for _ in range(population_size)]
    if mode == "random-angle":
        if rng is None:
            raise OperatorError("random-angle initialisation needs a random stream.")
        return [random_angle_chromosome(length, rng) for _ in range(population_size)]
    raise OperatorError(f"Unknown initialisation mode '{mode}'.")


def _draw_layout(cfg: BlockInitConfig, rng: np.random.Generator) -> BlockLayout:
    count = int(rng.integers(cfg.n_min, cfg.n_max + 1))
    kinds: list[str] = []
    pooling = 0
    for _ in range(count):
        kind = BLOCK_CATALOG[int(rng.integers(0, len(BLOCK_CATALOG)))]
        if kind == "pooling":
            if pooling + 1 > cfg.pooling_cap:
                kind = "plain"
            else:
                pooling += 1
        kinds.append(kind)
    connections = tuple((block, block + 1) for block in range(count - 1))
    return BlockLayout(tuple(kinds), connections, pooling, cfg.segment_size)


def init_block_layouts(
    population_size: int,
    cfg: BlockInitConfig,
    length: int,
    rng: np.random.Generator,
    *,
    problem: Problem | None = None,
) -> tuple[list[BlockLayout], int]:
    """Draw layouts, keeping the best of three candidates per individual.

    Returns the layouts and the number of fitness evaluations spent scoring
    candidates (zero without a problem, in which case the first candidate wins).
    """

    if cfg.n_max * cfg.segment_size > length:
        raise ChromosomeError(
            f"{cfg.n_max} blocks of {cfg.segment_size} qubits exceed the chromosome length {length}."
        )
    layouts: list[BlockLayout] = []
    evaluations = 0
    for _ in range(population_size):
        candidates = [_draw_layout(cfg, rng) for _ in range(BLOCK_CANDIDATES)]
        if problem is None:
            layouts.append(candidates[0])
            continue
        scored = []
        for candidate in candidates:
            bits = measure(candidate.to_chromosome(length), rng)
            scored.append(problem.evaluate(bits))
            evaluations += 1
        best = 0
        for index in range(1, len(candidates)):
            if compare_fitness(scored[index], scored[best]) < 0:
                best = index
        layouts.append(candidates[best])
    return layouts, evaluations


def init_population_blocks(
    population_size: int,
    cfg: BlockInitConfig,
    rng: np.random.Generator,
    *,
    length: int,
    problem: Problem | None = None,
) -> list[QuantumChromosome]:
    layouts, _ = init_block_layouts(population_size, cfg, length, rng, problem=problem)
    return [layout.to_chromosome(length) for layout in layouts]


class _RunState:
    """Mutable bookkeeping shared by the drivers."""

    def __init__(
        self, algorithm: str, cfg: EngineConfig, problem: Problem, seed: int
    ) -> None:
        self.algorithm = algorithm
        self.cfg = cfg
        self.problem = problem
        self.seed = seed
        self.timer = PhaseTimer(algorithm)
        self.generation = 0
        self.evaluations = 0
        self.best: Individual | None = None
        self.best_scores: list[float] = []
        self.avg_scores: list[float] = []
        self.norm_deviation = 0.0
        self.level_trace: list[LevelTrace] = []

    def stream(self, index: int) -> np.random.Generator:
        return derive_substream(self.seed, self.generation, index)

    def evaluate(self, individuals: Sequence[Individual]) -> list[Individual]:
        evaluated = []
        for individual in individuals:
            if individual.phenotype is None:
                raise OperatorError("Cannot evaluate an unmeasured individual.")
            evaluated.append(replace(individual, fitness=self.problem.evaluate(individual.phenotype)))
        self.evaluations += len(evaluated)
        metrics.record_evaluations(self.algorithm, len(evaluated))
        return evaluated

    def measure_all(self, genotypes: Sequence[QuantumChromosome]) -> list[Individual]:
        rng = self.stream(STREAM_MEASURE)
        return self.evaluate([Individual(genotype, measure(genotype, rng)) for genotype in genotypes])

    def track_norms(self, individuals: Sequence[Individual]) -> None:
        for individual in individuals:
            if individual.genotype is not None:
                self.norm_deviation = max(self.norm_deviation, individual.genotype.norm_deviation())

    def offer(self, candidates: Sequence[Individual]) -> None:
        """Update the best-so-far from ``candidates``."""

        for candidate in candidates:
            if self.best is None or compare_fitness(candidate.stats, self.best.stats) < 0:
                self.best = candidate

    def close_generation(self, population: Sequence[Individual]) -> None:
        assert self.best is not None
        self.best_scores.append(self.best.score)
        self.avg_scores.append(float(np.mean([individual.score for individual in population])))
        logger.debug(
            "generation_done algorithm=%s generation=%s best=%.6f avg=%.6f",
            self.algorithm,
            self.generation,
            self.best_scores[-1],
            self.avg_scores[-1],
        )
        self.generation += 1

    def reached_target(self) -> bool:
        target = self.cfg.target_score
        return target is not None and self.best is not None and self.best.score >= target

    def result(self) -> RunResult:
        assert self.best is not None and self.best.phenotype is not None
        phenotype = self.best.phenotype
        result = RunResult(
            algorithm=self.algorithm,
            best_scores=tuple(self.best_scores),
            avg_scores=tuple(self.avg_scores),
            best=self.best,
            accuracy=self.problem.accuracy(phenotype),
            loss=self.problem.loss(phenotype),
            evaluations=self.evaluations,
            timing=tuple(self.timer.summary()),
            level_trace=tuple(self.level_trace),
            max_norm_deviation=self.norm_deviation,
        )
        logger.info(
            "run_finished algorithm=%s generations=%s evaluations=%s best=%.6f accuracy=%.6f",
            self.algorithm,
            result.generations,
            result.evaluations,
            result.best_score,
            result.accuracy,
        )
        return result


def _base_seed(cfg: EngineConfig, rng: np.random.Generator | None) -> int:
    if rng is None:
        return cfg.seed
    return int(rng.integers(0, 2**63))


def _pool_size(population_size: int) -> int:
    return 2 * math.ceil(population_size / 2)


def _ensure_member(
    population: list[Individual], member: Individual, protected: Sequence[Individual] = ()
) -> list[Individual]:
    """Put ``member`` in place of the worst unprotected individual unless already present."""

    if any(individual is member for individual in population):
        return population
    guarded = {id(individual) for individual in protected}
    for index in reversed(rank_indices(population)):
        if id(population[index]) not in guarded:
            updated = list(population)
            updated[index] = member
            return updated
    return population


def _genotype(individual: Individual) -> QuantumChromosome:
    if individual.genotype is None:
        raise OperatorError("Quantum individual has no genotype.")
    return individual.genotype


def _phenotype(individual: Individual) -> BinaryChromosome:
    if individual.phenotype is None:
        raise OperatorError("Individual has not been measured yet.")
    return individual.phenotype


def _fit_best(best: Individual, length: int) -> Individual:
    """Lengthen the best individual; zero padding keeps its evaluation unchanged."""

    if best.length >= length:
        return best
    assert best.genotype is not None and best.phenotype is not None
    return replace(
        best,
        genotype=resize_chromosome(best.genotype, length),
        phenotype=best.phenotype.padded(length),
    )


def _quantum_generation(
    state: _RunState,
    population: list[Individual],
    policy: RotationPolicy,
    epoch: int,
    reps: int,
    ops: frozenset[MutationOp],
    length_bounds: tuple[int, int] | None,
) -> list[Individual]:
    cfg = state.cfg
    size = cfg.population_size
    generation = state.generation
    assert state.best is not None

    width = max(max(individual.length for individual in population), state.best.length)
    target = _fit_best(state.best, width)
    assert target.genotype is not None and target.phenotype is not None

    with state.timer.measure("rotation", generation):
        flags = [individual.score >= target.score for individual in population]
        rotated = update_population(
            [_genotype(individual) for individual in population],
            target.phenotype,
            [_phenotype(individual) for individual in population],
            flags,
            policy,
            epoch,
            reps,
            cfg.boost_c,
            best_theta=target.genotype.theta,
        )
    current = []
    for individual, genotype in zip(population, rotated):
        moved = replace(individual, genotype=genotype)
        if individual is state.best:
            state.best = moved
        current.append(moved)
    state.track_norms(current)

    select_rng = state.stream(STREAM_SELECT)
    pool = [binary_tournament(current, cfg.selection, select_rng) for _ in range(_pool_size(size))]
    reference_length = max(individual.length for individual in current)
    children = generate_offspring(
        current,
        pool,
        cfg.p_crossover,
        cfg.mutation_rate(reference_length),
        ops,
        state.stream(STREAM_VARIATION),
        length_bounds=length_bounds,
        timer=state.timer,
        generation=generation,
    )[:size]
    offspring = state.measure_all([_genotype(child) for child in children])
    state.track_norms(offspring)

    union = current + offspring
    _, opposition_index = elitism_update(
        ElitismScores.from_population(union),
        [individual.stats.std_error for individual in union],
        state.stream(STREAM_ELITISM),
    )
    state.offer(offspring)
    survivors = environment_select(
        current, offspring, cfg.selection, size, state.stream(STREAM_ENVIRONMENT)
    )
    best = state.best
    assert best is not None
    survivors = _ensure_member(survivors, best)
    survivors = _ensure_member(survivors, union[opposition_index], protected=[best])
    state.close_generation(survivors)
    return survivors


def _initial_genotypes(
    state: _RunState, length: int, problem: Problem
) -> list[QuantumChromosome]:
    cfg = state.cfg
    rng = state.stream(STREAM_INIT)
    if cfg.init_mode == "blocks":
        assert cfg.block_init is not None
        layouts, spent = init_block_layouts(
            cfg.population_size, cfg.block_init, length, rng, problem=problem
        )
        state.evaluations += spent
        metrics.record_evaluations(state.algorithm, spent)
        return [layout.to_chromosome(length) for layout in layouts]
    return init_population_uniform(cfg.population_size, length, mode=cfg.init_mode, rng=rng)


def run_qiga(
    cfg: EngineConfig, problem: Problem, rng: np.random.Generator | None = None
) -> RunResult:
    """Fixed-length QIGA over the problem's full encoding length."""

    state = _RunState("qiga", cfg, problem, _base_seed(cfg, rng))
    length = problem.encoding_length
    logger.info(
        "run_started algorithm=qiga length=%s population=%s epochs=%s test_case=%s seed=%s",
        length,
        cfg.population_size,
        cfg.epochs,
        cfg.rotation_test_case.name,
        state.seed,
    )
    policy = cfg.rotation_policy()
    population = state.measure_all(_initial_genotypes(state, length, problem))
    state.track_norms(population)
    state.offer(population)
    state.close_generation(population)

    for epoch in range(1, cfg.epochs):
        if state.reached_target():
            break
        population = _quantum_generation(
            state, population, policy, epoch, cfg.epochs, FIXED_LENGTH_OPS, None
        )
    return state.result()


def default_levels(length: int) -> LevelConfig:
    """Up to four levels ending at ``length`` with an interval of a quarter of it."""

    interval = max(1, length // 4)
    steps = min(3, (length - 1) // interval)
    return LevelConfig(min_length=length - steps * interval, max_length=length, interval=interval)


def _reinitialise(
    state: _RunState, population: Sequence[Individual], length: int
) -> list[QuantumChromosome]:
    """Keep the elite's qubits (boosted towards its bits), reset everyone else to uniform."""

    cfg = state.cfg
    best = state.best
    assert best is not None and best.genotype is not None and best.phenotype is not None
    elite_length = max(best.length, length)
    elite = _fit_best(best, elite_length)
    assert elite.genotype is not None and elite.phenotype is not None
    genotypes = [boost_chromosome(elite.genotype, elite.phenotype.bits, cfg.boost_c)]
    for individual in population[1:]:
        genotypes.append(QuantumChromosome.uniform(max(individual.length, length)))
    return genotypes


def run_dqiga(
    cfg: EngineConfig, problem: Problem, rng: np.random.Generator | None = None
) -> RunResult:
    """QIGA over a lengthening schedule; shorter phenotypes are zero-padded for evaluation."""

    levels = cfg.level or default_levels(problem.encoding_length)
    if levels.max_length > problem.encoding_length:
        raise ChromosomeError(
            f"Level max_length {levels.max_length} exceeds the encoding length "
            f"{problem.encoding_length}."
        )
    schedule = level_schedule(levels.min_length, levels.max_length, levels.interval, cfg.epochs)
    state = _RunState("dqiga", cfg, problem, _base_seed(cfg, rng))
    policy = cfg.rotation_policy(level_max=schedule.level_max)
    logger.info(
        "run_started algorithm=dqiga levels=%s lengths=%s..%s population=%s epochs=%s "
        "test_case=%s seed=%s",
        schedule.level_max,
        schedule.min_length,
        schedule.max_length,
        cfg.population_size,
        cfg.epochs,
        cfg.rotation_test_case.name,
        state.seed,
    )

    population: list[Individual] | None = None
    for level, (length, reps) in enumerate(zip(schedule.lengths, schedule.repetitions)):
        if reps == 0 or state.reached_target():
            state.level_trace.append(
                LevelTrace(
                    level=level,
                    length=length,
                    generations=0,
                    best_score=state.best.score if state.best else 0.0,
                )
            )
            continue
        start = state.generation
        if population is None:
            genotypes = _initial_genotypes(state, length, problem)
        else:
            genotypes = _reinitialise(state, population, length)
            logger.info(
                "level_started algorithm=dqiga level=%s length=%s generations=%s",
                level,
                length,
                reps,
            )
        population = state.measure_all(genotypes)
        state.track_norms(population)
        state.offer(population)
        assert state.best is not None
        state.best = _fit_best(state.best, length)
        population = _ensure_member(population, state.best)
        state.close_generation(population)

        if length == schedule.max_length:
            ops, bounds = FIXED_LENGTH_OPS, None
        else:
            ops, bounds = VARIABLE_LENGTH_OPS, (length, schedule.max_length)
        for epoch in range(1, reps):
            if state.reached_target():
                break
            population = _quantum_generation(state, population, policy, epoch, reps, ops, bounds)
        state.level_trace.append(
            LevelTrace(
                level=level,
                length=length,
                generations=state.generation - start,
                best_score=state.best.score,
            )
        )
    return state.result()


def _single_point(
    first: BinaryChromosome, second: BinaryChromosome, rng: np.random.Generator
) -> tuple[BinaryChromosome, BinaryChromosome]:
    length = len(first)
    if length < 2:
        return first, second
    point = int(rng.integers(1, length))
    return (
        BinaryChromosome(np.concatenate([first.bits[:point], second.bits[point:]])),
        BinaryChromosome(np.concatenate([second.bits[:point], first.bits[point:]])),
    )


def _flip_bits(
    bits: BinaryChromosome, rate: float, rng: np.random.Generator
) -> BinaryChromosome:
    flips = rng.random(len(bits)) < rate
    if not flips.any():
        return bits
    return BinaryChromosome(np.where(flips, 1 - bits.bits, bits.bits))


def run_classical_ga(
    cfg: EngineConfig, problem: Problem, rng: np.random.Generator | None = None
) -> RunResult:
    """Bitstring GA with tournament selection, single-point crossover, bit flips and elitism of one."""

    state = _RunState("ga", cfg, problem, _base_seed(cfg, rng))
    size = cfg.population_size
    length = problem.encoding_length
    logger.info(
        "run_started algorithm=ga length=%s population=%s epochs=%s seed=%s",
        length,
        size,
        cfg.epochs,
        state.seed,
    )
    init_rng = state.stream(STREAM_INIT)
    population = state.evaluate(
        [
            Individual(None, BinaryChromosome(init_rng.integers(0, 2, size=length, dtype=np.uint8)))
            for _ in range(size)
        ]
    )
    state.offer(population)
    state.close_generation(population)

    flip_rate = cfg.mutation_rate(length)
    for _ in range(1, cfg.epochs):
        if state.reached_target():
            break
        generation = state.generation
        select_rng = state.stream(STREAM_SELECT)
        pool = [binary_tournament(population, cfg.selection, select_rng) for _ in range(_pool_size(size))]
        variation_rng = state.stream(STREAM_VARIATION)
        children: list[BinaryChromosome] = []
        for index in range(0, len(pool), 2):
            first, second = pool[index].phenotype, pool[index + 1].phenotype
            assert first is not None and second is not None
            with state.timer.measure("crossover", generation):
                if variation_rng.random() < cfg.p_crossover:
                    first, second = _single_point(first, second, variation_rng)
            with state.timer.measure("mutation", generation):
                children.append(_flip_bits(first, flip_rate, variation_rng))
                children.append(_flip_bits(second, flip_rate, variation_rng))
        offspring = state.evaluate([Individual(None, bits) for bits in children[:size]])
        state.offer(offspring)
        best = state.best
        assert best is not None
        population = _ensure_member(offspring, best)
        state.close_generation(population)
    return state.result()


RUNNERS = {"ga": run_classical_ga, "qiga": run_qiga, "dqiga": run_dqiga}


def run_algorithm(
    algorithm: str, cfg: EngineConfig, problem: Problem, rng: np.random.Generator | None = None
) -> RunResult:
    """Dispatch to the driver registered for ``algorithm``."""

    try:
        runner = RUNNERS[algorithm]
    except KeyError as exc:
        raise OperatorError(f"Unknown algorithm '{algorithm}'.") from exc
    return runner(cfg, problem, rng)
