"""Fitness statistics and the problem suite (OneMax, 0/1 knapsack, feature selection)."""

from __future__ import annotations

import hashlib
import math
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import orjson

from .errors import ProblemError
from .models import BatchConfig
from .operators import FitnessStats
from .qcore import BinaryChromosome

ORACLE_CELL_LIMIT = 10_000_000
PROBABILITY_FLOOR = 1e-12


def batch_error_stats(errors: Sequence[float], param_count: int = 0) -> FitnessStats:
    """Mean and population standard deviation of per-batch errors."""

    if len(errors) == 0:
        raise ProblemError("At least one batch error is required.")
    values = np.asarray(errors, dtype=np.float64)
    mean = float(np.clip(values.mean(), 0.0, 1.0))
    return FitnessStats(mean_error=mean, std_error=float(values.std()), param_count=param_count)


def split_batches(size: int, n_batches: int) -> list[slice]:
    """Equal batches of ``size // n_batches`` samples; the remainder joins the last one."""

    if n_batches < 1:
        raise ProblemError(f"n_batches must be >= 1, got {n_batches}.")
    step = size // n_batches
    bounds = [index * step for index in range(n_batches)] + [size]
    batches = [slice(bounds[i], bounds[i + 1]) for i in range(n_batches)]
    # Empty batches cannot be scored.
    return [batch for batch in batches if batch.stop > batch.start]


class Problem(ABC):
    """Binary-encoded objective evaluated on (zero-padded) phenotypes."""

    name: str = "problem"
    encoding_length: int
    optimum: float | None = None

    @abstractmethod
    def objective(self, bits: BinaryChromosome) -> float:
        """Raw objective value of a full-length bitstring (higher is better)."""

    @abstractmethod
    def batch_errors(self, bits: BinaryChromosome, batch_cfg: BatchConfig | None) -> list[float]:
        """Per-batch error fractions of a full-length bitstring."""

    def decode(self, bits: BinaryChromosome) -> BinaryChromosome:
        if len(bits) > self.encoding_length:
            raise ProblemError(
                f"{self.name}: phenotype has {len(bits)} genes, encoding allows "
                f"{self.encoding_length}."
            )
        return bits.padded(self.encoding_length)

    def evaluate(self, bits: BinaryChromosome, batch_cfg: BatchConfig | None = None) -> FitnessStats:
        decoded = self.decode(bits)
        return batch_error_stats(self.batch_errors(decoded, batch_cfg), param_count=decoded.ones)

    def loss(self, bits: BinaryChromosome) -> float:
        return self.evaluate(bits).mean_error

    def accuracy(self, bits: BinaryChromosome) -> float:
        return 1.0 - self.evaluate(bits).mean_error


def evaluate_fitness(
    problem: Problem,
    phenotypes: Sequence[BinaryChromosome],
    batch_cfg: BatchConfig | None = None,
) -> list[FitnessStats]:
    return [problem.evaluate(bits, batch_cfg) for bits in phenotypes]


def onemax(bits: BinaryChromosome) -> int:
    return bits.ones


class OneMaxProblem(Problem):
    name = "onemax"

    def __init__(self, length: int) -> None:
        if length < 1:
            raise ProblemError(f"OneMax length must be >= 1, got {length}.")
        self.encoding_length = length
        self.optimum = float(length)

    def objective(self, bits: BinaryChromosome) -> float:
        return float(onemax(self.decode(bits)))

    def batch_errors(self, bits: BinaryChromosome, batch_cfg: BatchConfig | None) -> list[float]:
        return [1.0 - onemax(bits) / self.encoding_length]


@dataclass(frozen=True)
class KnapsackInstance:
    weights: tuple[int, ...]
    values: tuple[int, ...]
    capacity: int

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.values):
            raise ProblemError(
                f"{len(self.weights)} weights for {len(self.values)} values."
            )
        if self.capacity < 0 or any(w < 0 for w in self.weights) or any(
            v < 0 for v in self.values
        ):
            raise ProblemError("Knapsack weights, values and capacity must be non-negative.")

    @property
    def items(self) -> int:
        return len(self.weights)

    def fingerprint(self) -> str:
        payload = orjson.dumps(
            {"weights": list(self.weights), "values": list(self.values), "capacity": self.capacity},
            option=orjson.OPT_SORT_KEYS,
        )
        return hashlib.sha256(payload).hexdigest()[:16]


def random_knapsack(items: int, seed: int) -> KnapsackInstance:
    """Seeded instance: weights 1..30, values 1..50, capacity half the total weight."""

    rng = np.random.default_rng(np.random.SeedSequence([seed, items]))
    weights = tuple(int(w) for w in rng.integers(1, 31, size=items))
    values = tuple(int(v) for v in rng.integers(1, 51, size=items))
    return KnapsackInstance(weights=weights, values=values, capacity=sum(weights) // 2)


def knapsack_value(bits: BinaryChromosome, inst: KnapsackInstance) -> int:
    """Total value of the selection, or 0 when it is overweight."""

    if len(bits) != inst.items:
        raise ProblemError(f"Selection has {len(bits)} bits for {inst.items} items.")
    chosen = bits.bits.astype(bool)
    weight = int(np.asarray(inst.weights, dtype=np.int64)[chosen].sum())
    if weight > inst.capacity:
        return 0
    return int(np.asarray(inst.values, dtype=np.int64)[chosen].sum())


def knapsack_dp_oracle(inst: KnapsackInstance) -> int:
    """Exact optimum by dynamic programming over capacity."""

    if (inst.capacity + 1) * max(inst.items, 1) > ORACLE_CELL_LIMIT:
        raise ProblemError(
            f"Instance too large for the DP oracle: capacity {inst.capacity} x {inst.items} items."
        )
    best = np.zeros(inst.capacity + 1, dtype=np.int64)
    for weight, value in zip(inst.weights, inst.values):
        if weight == 0:
            best = best + value
        elif weight <= inst.capacity:
            best[weight:] = np.maximum(best[weight:], best[: inst.capacity + 1 - weight] + value)
    return int(best[-1])


class KnapsackProblem(Problem):
    """Death-penalty knapsack; error is normalised by the optimum when known."""

    name = "knapsack"

    def __init__(self, instance: KnapsackInstance, optimum: int | None = None) -> None:
        self.instance = instance
        self.encoding_length = instance.items
        self.optimum = None if optimum is None else float(optimum)

    @property
    def normaliser(self) -> float:
        if self.optimum:
            return self.optimum
        return float(sum(self.instance.values))

    def objective(self, bits: BinaryChromosome) -> float:
        return float(knapsack_value(self.decode(bits), self.instance))

    def batch_errors(self, bits: BinaryChromosome, batch_cfg: BatchConfig | None) -> list[float]:
        scale = self.normaliser
        if scale == 0:
            return [0.0]
        return [min(1.0, max(0.0, 1.0 - knapsack_value(bits, self.instance) / scale))]


@dataclass(frozen=True)
class Dataset:
    """Flattened grayscale samples in [0, 1] with integer labels."""

    images: np.ndarray
    labels: np.ndarray
    rows: int = 0
    cols: int = 0

    def __post_init__(self) -> None:
        if self.images.ndim != 2 or self.labels.ndim != 1:
            raise ProblemError("Dataset images must be 2-D and labels 1-D.")
        if self.images.shape[0] != self.labels.shape[0]:
            raise ProblemError(
                f"{self.images.shape[0]} images for {self.labels.shape[0]} labels."
            )

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def features(self) -> int:
        return int(self.images.shape[1])

    def head(self, count: int) -> Dataset:
        return Dataset(self.images[:count], self.labels[:count], self.rows, self.cols)


def synthetic_feature_dataset(
    n_samples: int, n_features: int = 32, *, seed: int = 0, separating_feature: int = 0
) -> Dataset:
    """Two-class set where one feature alone separates the classes.

    The separating feature equals the label; every other feature is noise in
    [0, 0.1], too small to outweigh it for up to 40 features.
    """

    if n_features < 1 or not 0 <= separating_feature < n_features:
        raise ProblemError("separating_feature must index one of the features.")
    rng = np.random.default_rng(np.random.SeedSequence([seed, n_samples, n_features]))
    labels = np.arange(n_samples, dtype=np.int64) % 2
    images = rng.uniform(0.0, 0.1, size=(n_samples, n_features))
    images[:, separating_feature] = labels.astype(np.float64)
    return Dataset(images, labels)


def class_centroids(train: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Sorted class labels and their mean feature vectors."""

    if len(train) == 0:
        raise ProblemError("The training set is empty.")
    classes = np.unique(train.labels)
    centroids = np.stack([train.images[train.labels == label].mean(axis=0) for label in classes])
    return classes, centroids


def _squared_distances(samples: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((samples[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _check_mask(mask: BinaryChromosome, features: int) -> np.ndarray:
    if len(mask) != features:
        raise ProblemError(f"Mask has {len(mask)} genes for {features} features.")
    return mask.bits.astype(bool)


def feature_selection_error(
    mask: BinaryChromosome,
    train: Dataset,
    fitness_set: Dataset,
    n_batches: int = 1,
    *,
    centroids: tuple[np.ndarray, np.ndarray] | None = None,
) -> list[float]:
    """Per-batch nearest-centroid error over the masked features."""

    selected = _check_mask(mask, train.features)
    if len(fitness_set) == 0:
        raise ProblemError("The fitness set is empty.")
    batches = split_batches(len(fitness_set), n_batches)
    if not selected.any():
        return [1.0] * len(batches)
    classes, full = centroids if centroids is not None else class_centroids(train)
    distances = _squared_distances(fitness_set.images[:, selected], full[:, selected])
    wrong = classes[np.argmin(distances, axis=1)] != fitness_set.labels
    return [float(wrong[batch].mean()) for batch in batches]


def centroid_loss(
    mask: BinaryChromosome,
    train: Dataset,
    fitness_set: Dataset,
    *,
    centroids: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Cross-entropy of a softmax over negative squared centroid distances.

    Distances are divided by the number of selected features. Samples whose
    label has no centroid count with probability ``PROBABILITY_FLOOR``.
    """

    selected = _check_mask(mask, train.features)
    classes, full = centroids if centroids is not None else class_centroids(train)
    if not selected.any():
        return math.log(len(classes)) if len(classes) > 1 else 0.0
    logits = -_squared_distances(fitness_set.images[:, selected], full[:, selected])
    logits /= int(selected.sum())
    shift = logits.max(axis=1)
    log_norm = shift + np.log(np.exp(logits - shift[:, None]).sum(axis=1))

    positions = np.minimum(np.searchsorted(classes, fitness_set.labels), len(classes) - 1)
    known = classes[positions] == fitness_set.labels
    true_logit = logits[np.arange(len(fitness_set)), positions]
    log_prob = np.where(known, true_logit - log_norm, -np.inf)
    log_prob = np.maximum(log_prob, math.log(PROBABILITY_FLOOR))
    return float(-log_prob.mean())


class FeatureSelectionProblem(Problem):
    """Feature masks scored by a nearest-centroid classifier on the fitness set."""

    name = "feature-selection"

    def __init__(
        self, train: Dataset, fitness_set: Dataset, batch_cfg: BatchConfig | None = None
    ) -> None:
        if train.features != fitness_set.features:
            raise ProblemError(
                f"Train set has {train.features} features, fitness set {fitness_set.features}."
            )
        self.train = train
        self.fitness_set = fitness_set
        self.batch_cfg = batch_cfg
        self.encoding_length = train.features
        self._centroids = class_centroids(train)

    def _batches(self, batch_cfg: BatchConfig | None) -> int:
        cfg = batch_cfg or self.batch_cfg
        return 1 if cfg is None else cfg.every_step

    def objective(self, bits: BinaryChromosome) -> float:
        return self.accuracy(bits)

    def batch_errors(self, bits: BinaryChromosome, batch_cfg: BatchConfig | None) -> list[float]:
        return feature_selection_error(
            bits, self.train, self.fitness_set, self._batches(batch_cfg), centroids=self._centroids
        )

    def loss(self, bits: BinaryChromosome) -> float:
        return centroid_loss(
            self.decode(bits), self.train, self.fitness_set, centroids=self._centroids
        )

    def baseline_error(self) -> float:
        """Error of the all-features mask."""

        full = BinaryChromosome(np.ones(self.encoding_length, dtype=np.uint8))
        return self.evaluate(full).mean_error
