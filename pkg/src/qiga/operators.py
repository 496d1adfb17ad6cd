"""Genetic operators over quantum individuals.

Selection works on the score ``1 − mean_error`` (higher is better) while
``FitnessStats`` keeps the raw error figures.
"""

from __future__ import annotations

import functools
import math
from collections.abc import Iterable, Sequence
from contextlib import AbstractContextManager, nullcontext
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ChromosomeError, OperatorError
from .models import SelectionConfig
from .qcore import (
    NORM_TOLERANCE,
    THETA_HIGH,
    THETA_LOW,
    UNIFORM_AMPLITUDE,
    BinaryChromosome,
    QuantumChromosome,
)
from .timing import PhaseTimer

TIE_TOLERANCE = 1e-12
CROSSOVER_RETRIES = 16


@dataclass(frozen=True)
class FitnessStats:
    mean_error: float
    std_error: float
    param_count: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.mean_error <= 1.0:
            raise OperatorError(f"mean_error must lie in [0, 1], got {self.mean_error}.")
        if self.std_error < 0:
            raise OperatorError(f"std_error must be non-negative, got {self.std_error}.")
        if self.param_count < 0:
            raise OperatorError(f"param_count must be non-negative, got {self.param_count}.")

    @property
    def score(self) -> float:
        return 1.0 - self.mean_error


@dataclass(frozen=True)
class Individual:
    """Genotype, measured phenotype and fitness; the classical GA leaves genotype empty."""

    genotype: QuantumChromosome | None
    phenotype: BinaryChromosome | None = None
    fitness: FitnessStats | None = None

    def __post_init__(self) -> None:
        if (
            self.genotype is not None
            and self.phenotype is not None
            and len(self.phenotype) != self.genotype.length
        ):
            raise ChromosomeError(
                f"Phenotype has {len(self.phenotype)} genes, genotype has {self.genotype.length}."
            )

    @property
    def length(self) -> int:
        if self.genotype is not None:
            return self.genotype.length
        if self.phenotype is not None:
            return len(self.phenotype)
        return 0

    @property
    def stats(self) -> FitnessStats:
        if self.fitness is None:
            raise OperatorError("Individual has not been evaluated yet.")
        return self.fitness

    @property
    def score(self) -> float:
        return self.stats.score


@dataclass(frozen=True)
class ElitismScores:
    """One weight per individual, seeded from the selection score."""

    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        if not all(math.isfinite(value) for value in self.scores):
            raise OperatorError("Elitism scores must be finite.")

    @classmethod
    def from_population(cls, population: Iterable[Individual]) -> ElitismScores:
        return cls(tuple(individual.score for individual in population))

    def __len__(self) -> int:
        return len(self.scores)


class MutationOp(Enum):
    ADDITION = "addition"
    REMOVE = "remove"
    MODIFIED = "modified"
    SWAP = "swap"
    INVERSION = "inversion"
    SCRAMBLE = "scramble"


FIXED_LENGTH_OPS = frozenset(
    {MutationOp.MODIFIED, MutationOp.SWAP, MutationOp.INVERSION, MutationOp.SCRAMBLE}
)
VARIABLE_LENGTH_OPS = FIXED_LENGTH_OPS | {MutationOp.ADDITION, MutationOp.REMOVE}
_OP_ORDER = tuple(MutationOp)


def compare_fitness(a: FitnessStats, b: FitnessStats) -> int:
    """Return -1 when ``a`` is better, 1 when ``b`` is better, 0 on a full tie."""

    if abs(a.mean_error - b.mean_error) > TIE_TOLERANCE:
        return -1 if a.mean_error < b.mean_error else 1
    if a.std_error != b.std_error:
        return -1 if a.std_error < b.std_error else 1
    if a.param_count != b.param_count:
        return -1 if a.param_count < b.param_count else 1
    return 0


def rank_indices(population: Sequence[Individual]) -> list[int]:
    """Indices sorted best-first by ``compare_fitness``; ties keep index order."""

    key = functools.cmp_to_key(compare_fitness)
    return sorted(range(len(population)), key=lambda index: key(population[index].stats))


def tournament_contest(
    first: Individual,
    second: Individual,
    cfg: SelectionConfig,
    rng: np.random.Generator,
    *,
    both_top: bool,
) -> Individual:
    """Decide one binary tournament between two drawn individuals.

    The pair is ordered by decreasing score first. When both sit in the top
    rank, a score gap above ``mean_threshold`` keeps the leader; otherwise a
    parameter gap above ``param_threshold`` with a noisier leader hands the
    win to the runner-up. Outside the top rank the winner is random.
    """

    if not both_top:
        return first if rng.random() < 0.5 else second
    if second.score > first.score + TIE_TOLERANCE:
        first, second = second, first
    if first.score - second.score > cfg.mean_threshold:
        return first
    if (
        first.stats.param_count - second.stats.param_count > cfg.param_threshold
        and first.stats.std_error > second.stats.std_error
    ):
        return second
    return first


def binary_tournament(
    population: Sequence[Individual], cfg: SelectionConfig, rng: np.random.Generator
) -> Individual:
    """Draw two distinct individuals and run ``tournament_contest``.

    The top rank holds everyone tied with the population's maximum score.
    """

    if not population:
        raise OperatorError("Cannot run a tournament on an empty population.")
    if len(population) == 1:
        return population[0]
    i, j = (int(index) for index in rng.choice(len(population), size=2, replace=False))
    cutoff = max(individual.score for individual in population) - TIE_TOLERANCE
    both_top = population[i].score >= cutoff and population[j].score >= cutoff
    return tournament_contest(population[i], population[j], cfg, rng, both_top=both_top)


def exchange_segments(
    first: QuantumChromosome, second: QuantumChromosome, pos1: int, pos2: int
) -> tuple[QuantumChromosome, QuantumChromosome]:
    """Swap ``[pos1, pos1 + L)`` of ``first`` with ``[pos2, pos2 + L)`` of ``second``."""

    length = first.length
    if second.length != length:
        raise ChromosomeError(f"Parent lengths differ: {length} vs {second.length}.")
    span = min(length - pos1, length - pos2)
    alpha_a, beta_a = first.alpha.copy(), first.beta.copy()
    alpha_b, beta_b = second.alpha.copy(), second.beta.copy()
    alpha_a[pos1 : pos1 + span] = second.alpha[pos2 : pos2 + span]
    beta_a[pos1 : pos1 + span] = second.beta[pos2 : pos2 + span]
    alpha_b[pos2 : pos2 + span] = first.alpha[pos1 : pos1 + span]
    beta_b[pos2 : pos2 + span] = first.beta[pos1 : pos1 + span]
    return QuantumChromosome(alpha_a, beta_a), QuantumChromosome(alpha_b, beta_b)


def _valid_offspring(children: Sequence[QuantumChromosome], length: int) -> bool:
    return all(
        child.length == length and child.norm_deviation() <= NORM_TOLERANCE for child in children
    )


def crossover(
    parent_i: Individual, parent_j: Individual, p_crossover: float, rng: np.random.Generator
) -> tuple[Individual, Individual]:
    """Two-position segment exchange applied with probability ``p_crossover``.

    Identical genotypes come back unchanged whatever positions would be drawn.
    """

    if not 0.0 <= p_crossover <= 1.0:
        raise OperatorError(f"p_crossover must lie in [0, 1], got {p_crossover}.")
    if parent_i.genotype is None or parent_j.genotype is None:
        raise OperatorError("Quantum crossover needs genotypes on both parents.")
    length = parent_i.genotype.length
    if parent_j.genotype.length != length:
        raise ChromosomeError(f"Parent lengths differ: {length} vs {parent_j.genotype.length}.")
    if rng.random() >= p_crossover:
        return parent_i, parent_j
    if parent_i.genotype == parent_j.genotype:
        return parent_i, parent_j
    for _ in range(CROSSOVER_RETRIES):
        pos1, pos2 = (int(value) for value in rng.integers(0, length, size=2))
        children = exchange_segments(parent_i.genotype, parent_j.genotype, pos1, pos2)
        if _valid_offspring(children, length):
            return Individual(children[0]), Individual(children[1])
    return parent_i, parent_j


def swap_genes(chromosome: QuantumChromosome, i: int, j: int) -> QuantumChromosome:
    alpha, beta = chromosome.alpha.copy(), chromosome.beta.copy()
    alpha[[i, j]] = alpha[[j, i]]
    beta[[i, j]] = beta[[j, i]]
    return QuantumChromosome(alpha, beta)


def invert_segment(chromosome: QuantumChromosome, start: int, stop: int) -> QuantumChromosome:
    """Reverse the genes between ``start`` and ``stop`` inclusive."""

    low, high = sorted((start, stop))
    alpha, beta = chromosome.alpha.copy(), chromosome.beta.copy()
    alpha[low : high + 1] = alpha[low : high + 1][::-1]
    beta[low : high + 1] = beta[low : high + 1][::-1]
    return QuantumChromosome(alpha, beta)


def _apply_op(
    op: MutationOp,
    alpha: np.ndarray,
    beta: np.ndarray,
    bounds: tuple[int, int] | None,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    length = alpha.size
    if op is MutationOp.ADDITION:
        if bounds is None or length >= bounds[1]:
            return alpha, beta
        pos = int(rng.integers(0, length + 1))
        return np.insert(alpha, pos, UNIFORM_AMPLITUDE), np.insert(beta, pos, UNIFORM_AMPLITUDE)
    if op is MutationOp.REMOVE:
        if bounds is None or length <= max(bounds[0], 1):
            return alpha, beta
        pos = int(rng.integers(0, length))
        return np.delete(alpha, pos), np.delete(beta, pos)
    if op is MutationOp.MODIFIED:
        pos = int(rng.integers(0, length))
        theta = rng.uniform(THETA_LOW, THETA_HIGH)
        alpha[pos], beta[pos] = math.cos(theta), math.sin(theta)
        return alpha, beta

    low, high = sorted(int(value) for value in rng.integers(0, length, size=2))
    if op is MutationOp.SWAP:
        alpha[[low, high]] = alpha[[high, low]]
        beta[[low, high]] = beta[[high, low]]
    elif op is MutationOp.INVERSION:
        alpha[low : high + 1] = alpha[low : high + 1][::-1].copy()
        beta[low : high + 1] = beta[low : high + 1][::-1].copy()
    else:
        order = rng.permutation(high - low + 1) + low
        alpha[low : high + 1] = alpha[order]
        beta[low : high + 1] = beta[order]
    return alpha, beta


def mutate(
    individual: Individual,
    mutation_rate: float,
    allowed_ops: Iterable[MutationOp],
    length_bounds: tuple[int, int] | None,
    rng: np.random.Generator,
) -> Individual:
    """Per-gene mutation; ``length_bounds=None`` means fixed-length mode."""

    if not 0.0 <= mutation_rate <= 1.0:
        raise OperatorError(f"mutation_rate must lie in [0, 1], got {mutation_rate}.")
    ops = [op for op in _OP_ORDER if op in set(allowed_ops)]
    if not ops:
        raise OperatorError("allowed_ops must not be empty.")
    if length_bounds is None and (MutationOp.ADDITION in ops or MutationOp.REMOVE in ops):
        raise OperatorError("Addition and Remove are only available in variable-length mode.")
    if individual.genotype is None:
        raise OperatorError("Quantum mutation needs a genotype.")

    genotype = individual.genotype
    hits = int(np.count_nonzero(rng.random(genotype.length) < mutation_rate))
    if hits == 0:
        return individual
    alpha, beta = genotype.alpha.copy(), genotype.beta.copy()
    for _ in range(hits):
        op = ops[int(rng.integers(0, len(ops)))]
        alpha, beta = _apply_op(op, alpha, beta, length_bounds, rng)
    return Individual(QuantumChromosome(alpha, beta))


def reflect(scores: Sequence[float]) -> tuple[float, ...]:
    """Opposition reflection ``s -> max + min − s``."""

    if not scores:
        return ()
    high, low = max(scores), min(scores)
    return tuple(high + low - value for value in scores)


def elitism_update(
    scores: ElitismScores, stds: Sequence[float], rng: np.random.Generator
) -> tuple[ElitismScores, int]:
    """Reward the steadier of two random individuals, reflect, and pick the best index."""

    size = len(scores)
    if size < 2:
        raise OperatorError("Elitism needs at least two individuals.")
    if len(stds) != size:
        raise OperatorError(f"{len(stds)} std values for {size} scores.")
    values = list(scores.scores)
    i, j = (int(index) for index in rng.choice(size, size=2, replace=False))
    temp = abs(rng.random() * (values[j] - values[i]))
    if stds[i] < stds[j]:
        values[i] += temp
    else:
        values[j] += temp
    reflected = reflect(values)

    # Duplicates are ignored after their first occurrence.
    seen: set[float] = set()
    best_index = 0
    best_value = -math.inf
    for index, value in enumerate(reflected):
        if value in seen:
            continue
        seen.add(value)
        if value > best_value:
            best_index, best_value = index, value
    return ElitismScores(reflected), best_index


def generate_offspring(
    population: Sequence[Individual],
    mating_pool: Sequence[Individual],
    p_crossover: float,
    mutation_rate: float,
    allowed_ops: Iterable[MutationOp],
    rng: np.random.Generator,
    *,
    length_bounds: tuple[int, int] | None = None,
    timer: PhaseTimer | None = None,
    generation: int = 0,
) -> list[Individual]:
    """Pair the pool at random, cross and mutate each pair; odd pools leave one member out.

    Parents of different lengths skip crossover and go straight to mutation.
    With a ``timer`` the crossover and mutation phases are timed separately.
    """

    members = {id(individual) for individual in population}
    if any(id(candidate) not in members for candidate in mating_pool):
        raise OperatorError("Every mating-pool member must belong to the population.")

    def phase(name: str) -> AbstractContextManager[None]:
        return timer.measure(name, generation) if timer is not None else nullcontext()

    ops = frozenset(allowed_ops)
    pool = list(mating_pool)
    offspring: list[Individual] = []
    while len(pool) >= 2:
        first, second = sorted(
            (int(index) for index in rng.choice(len(pool), size=2, replace=False)), reverse=True
        )
        parent_a, parent_b = pool.pop(first), pool.pop(second)
        with phase("crossover"):
            if parent_a.length == parent_b.length:
                child_a, child_b = crossover(parent_a, parent_b, p_crossover, rng)
            else:
                child_a, child_b = parent_a, parent_b
        with phase("mutation"):
            children = [
                mutate(child, mutation_rate, ops, length_bounds, rng) for child in (child_a, child_b)
            ]
        for child in children:
            _validate_child(child, length_bounds)
            offspring.append(child)
    return offspring


def _validate_child(child: Individual, length_bounds: tuple[int, int] | None) -> None:
    genotype = child.genotype
    if genotype is None:
        raise OperatorError("Offspring lost its genotype.")
    if genotype.norm_deviation() > NORM_TOLERANCE:
        raise OperatorError("Offspring violates qubit normalisation.")
    if length_bounds is not None and not (
        length_bounds[0] <= genotype.length <= length_bounds[1]
    ):
        raise OperatorError(
            f"Offspring length {genotype.length} is outside bounds {length_bounds}."
        )


def environment_select(
    current: Sequence[Individual],
    offspring: Sequence[Individual],
    cfg: SelectionConfig,
    size: int,
    rng: np.random.Generator,
) -> list[Individual]:
    """Choose the next population of ``size`` from parents and offspring.

    Elites come first by ``compare_fitness``; the remaining slots go to
    pairwise contests between the two highest-scoring candidates left.
    """

    union = list(current) + list(offspring)
    if len(union) < size:
        raise OperatorError(f"Need {size} candidates, only {len(union)} available.")
    ranked = rank_indices(union)
    elite_count = min(size, int(math.floor(cfg.elitism_fraction * size + 0.5)))
    chosen = ranked[:elite_count]

    remaining = sorted(ranked[elite_count:], key=lambda index: -union[index].score)
    while len(chosen) < size:
        if len(remaining) == 1:
            chosen.append(remaining.pop())
            break
        lead, runner = union[remaining[0]], union[remaining[1]]
        if lead.score - runner.score > cfg.env_epsilon:
            pick = 0
        elif lead.stats.std_error < runner.stats.std_error:
            pick = 0
        elif runner.stats.std_error < lead.stats.std_error:
            pick = 1
        else:
            pick = int(rng.integers(0, 2))
        chosen.append(remaining.pop(pick))

    key = functools.cmp_to_key(compare_fitness)
    chosen.sort(key=lambda index: key(union[index].stats))
    return [union[index] for index in chosen]
