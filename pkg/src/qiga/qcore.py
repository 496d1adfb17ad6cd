"""Qubit and chromosome representation, measurement, and the lengthening schedule."""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import ChromosomeError, NormalizationError, ScheduleError

POLE_EPSILON = 1e-3
THETA_LOW = POLE_EPSILON
THETA_HIGH = math.pi / 2 - POLE_EPSILON
NORM_TOLERANCE = 1e-9
RENORMALIZE_TOLERANCE = 1e-6
UNIFORM_AMPLITUDE = math.sqrt(0.5)


def clamp_theta(theta: float) -> float:
    """Clamp a gene angle into [ε, π/2 − ε]."""

    return min(max(theta, THETA_LOW), THETA_HIGH)


@dataclass(frozen=True)
class Qubit:
    """Real, first-quadrant amplitude pair (alpha for |0>, beta for |1>)."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise NormalizationError(
                f"Amplitudes must be non-negative, got ({self.alpha}, {self.beta})."
            )
        deviation = abs(self.alpha * self.alpha + self.beta * self.beta - 1.0)
        if deviation > NORM_TOLERANCE:
            raise NormalizationError(
                f"Qubit ({self.alpha}, {self.beta}) deviates from unit norm by {deviation:.3e}."
            )

    @property
    def theta(self) -> float:
        return math.atan2(self.beta, self.alpha)

    @property
    def p_one(self) -> float:
        """Probability of measuring bit 1."""

        return self.beta * self.beta

    @classmethod
    def from_theta(cls, theta: float) -> Qubit:
        clamped = clamp_theta(theta)
        return cls(math.cos(clamped), math.sin(clamped))


def new_qubit(alpha: float, beta: float) -> Qubit:
    """Build a normalised, pole-clamped qubit from raw amplitudes."""

    if not (math.isfinite(alpha) and math.isfinite(beta)):
        raise NormalizationError(f"Amplitudes must be finite, got ({alpha}, {beta}).")
    norm = alpha * alpha + beta * beta
    if norm == 0.0:
        raise NormalizationError("The zero vector (0, 0) is not a qubit state.")
    if abs(norm - 1.0) > RENORMALIZE_TOLERANCE:
        raise NormalizationError(
            f"|alpha|^2 + |beta|^2 = {norm:.9f} deviates from 1 by more than "
            f"{RENORMALIZE_TOLERANCE:g}."
        )
    # Signs are folded into the first quadrant; only squared amplitudes are observable.
    theta = math.atan2(abs(beta), abs(alpha))
    if THETA_LOW <= theta <= THETA_HIGH:
        scale = math.sqrt(norm)
        return Qubit(abs(alpha) / scale, abs(beta) / scale)
    return Qubit.from_theta(theta)


def uniform_qubit() -> Qubit:
    """Return the equal superposition (1/√2, 1/√2)."""

    return Qubit(UNIFORM_AMPLITUDE, UNIFORM_AMPLITUDE)


def _frozen(array: np.ndarray, dtype: type) -> np.ndarray:
    copy = np.array(array, dtype=dtype, copy=True)
    copy.setflags(write=False)
    return copy


@dataclass(frozen=True, eq=False)
class QuantumChromosome:
    """Ordered qubits stored as two aligned, read-only amplitude arrays."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self) -> None:
        alpha = _frozen(self.alpha, np.float64)
        beta = _frozen(self.beta, np.float64)
        if alpha.ndim != 1 or alpha.shape != beta.shape:
            raise ChromosomeError("Amplitude arrays must be one-dimensional and aligned.")
        if alpha.size < 1:
            raise ChromosomeError("A chromosome needs at least one qubit.")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def from_qubits(cls, qubits: Iterable[Qubit]) -> QuantumChromosome:
        items = list(qubits)
        return cls(
            np.array([q.alpha for q in items], dtype=np.float64),
            np.array([q.beta for q in items], dtype=np.float64),
        )

    @classmethod
    def from_theta(cls, theta: np.ndarray) -> QuantumChromosome:
        clamped = np.clip(np.asarray(theta, dtype=np.float64), THETA_LOW, THETA_HIGH)
        return cls(np.cos(clamped), np.sin(clamped))

    @classmethod
    def uniform(cls, length: int) -> QuantumChromosome:
        values = np.full(length, UNIFORM_AMPLITUDE, dtype=np.float64)
        return cls(values, values)

    @property
    def length(self) -> int:
        return int(self.alpha.size)

    @property
    def theta(self) -> np.ndarray:
        return np.arctan2(self.beta, self.alpha)

    @property
    def qubits(self) -> tuple[Qubit, ...]:
        return tuple(Qubit(float(a), float(b)) for a, b in zip(self.alpha, self.beta))

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, index: int) -> Qubit:
        return Qubit(float(self.alpha[index]), float(self.beta[index]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, QuantumChromosome):
            return NotImplemented
        return np.array_equal(self.alpha, other.alpha) and np.array_equal(self.beta, other.beta)

    def __hash__(self) -> int:
        return hash((self.alpha.tobytes(), self.beta.tobytes()))

    def norm_deviation(self) -> float:
        """Largest |alpha² + beta² − 1| across the chromosome."""

        return float(np.max(np.abs(self.alpha**2 + self.beta**2 - 1.0)))


def random_angle_chromosome(length: int, rng: np.random.Generator) -> QuantumChromosome:
    """Chromosome whose gene angles are drawn uniformly in [ε, π/2 − ε]."""

    return QuantumChromosome.from_theta(rng.uniform(THETA_LOW, THETA_HIGH, size=length))


@dataclass(frozen=True, eq=False)
class BinaryChromosome:
    """Measured bitstring."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = _frozen(self.bits, np.uint8)
        if bits.ndim != 1:
            raise ChromosomeError("Bitstrings must be one-dimensional.")
        if bits.size and int(bits.max()) > 1:
            raise ChromosomeError("Bitstrings may only contain 0 and 1.")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_string(cls, text: str) -> BinaryChromosome:
        return cls(np.array([int(char) for char in text], dtype=np.uint8))

    def __len__(self) -> int:
        return int(self.bits.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryChromosome):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self) -> int:
        return hash(self.bits.tobytes())

    def __str__(self) -> str:
        return "".join(str(int(bit)) for bit in self.bits)

    @property
    def ones(self) -> int:
        return int(self.bits.sum())

    def padded(self, length: int) -> BinaryChromosome:
        """Zero-pad the tail up to ``length`` genes (no-op when already that long)."""

        if length < len(self):
            raise ChromosomeError(f"Cannot pad a {len(self)}-bit string down to {length} bits.")
        if length == len(self):
            return self
        return BinaryChromosome(np.concatenate([self.bits, np.zeros(length - len(self), np.uint8)]))


def measure(chromosome: QuantumChromosome, rng: np.random.Generator) -> BinaryChromosome:
    """Observe every qubit once: bit 1 when r < beta², else bit 0."""

    draws = rng.random(chromosome.length)
    return BinaryChromosome((draws < chromosome.beta**2).astype(np.uint8))


@dataclass(frozen=True)
class LevelSchedule:
    """Chromosome lengths and generation budgets per D-QIGA level."""

    min_length: int
    max_length: int
    interval: int
    level_max: int
    lengths: tuple[int, ...] = field(default_factory=tuple)
    repetitions: tuple[int, ...] = field(default_factory=tuple)

    @property
    def total(self) -> int:
        return sum(self.repetitions)


def level_schedule(min_length: int, max_length: int, interval: int, m: int) -> LevelSchedule:
    """Build the lengthening plan.

    The level count is ``(max − min) / interval + 1``. Generations are shared
    in proportion to the level index over the triangular number k(k+1)/2,
    floored per level, with the rounding remainder given to the last level.
    """

    if min_length < 1 or max_length < min_length:
        raise ScheduleError(
            f"Require 1 <= min_length <= max_length, got ({min_length}, {max_length})."
        )
    if interval < 1:
        raise ScheduleError(f"Interval must be >= 1, got {interval}.")
    span = max_length - min_length
    if span % interval:
        raise ScheduleError(
            f"(max_length - min_length) = {span} is not divisible by interval {interval}."
        )
    level_max = span // interval + 1
    if m < level_max:
        raise ScheduleError(f"Iteration budget m={m} is smaller than level_max={level_max}.")

    triangular = level_max * (level_max + 1) // 2
    repetitions = [(level + 1) * m // triangular for level in range(level_max)]
    repetitions[-1] += m - sum(repetitions)
    lengths = tuple(min_length + level * interval for level in range(level_max))
    return LevelSchedule(
        min_length=min_length,
        max_length=max_length,
        interval=interval,
        level_max=level_max,
        lengths=lengths,
        repetitions=tuple(repetitions),
    )


def resize_chromosome(chromosome: QuantumChromosome, new_length: int) -> QuantumChromosome:
    """Lengthen a chromosome by appending uniform qubits; existing genes stay in place."""

    current = chromosome.length
    if new_length < current:
        raise ChromosomeError(f"Cannot shrink a chromosome from {current} to {new_length} genes.")
    if new_length == current:
        return chromosome
    extra = new_length - current
    filler = np.full(extra, UNIFORM_AMPLITUDE, dtype=np.float64)
    return QuantumChromosome(
        np.concatenate([chromosome.alpha, filler]),
        np.concatenate([chromosome.beta, filler]),
    )


def max_norm_deviation(chromosomes: Sequence[QuantumChromosome]) -> float:
    """Largest normalisation error across a population (0.0 for an empty one)."""

    return max((c.norm_deviation() for c in chromosomes), default=0.0)
