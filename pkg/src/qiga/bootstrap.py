"""Bootstrap helpers turning a problem descriptor into a ready ``Problem``."""

from __future__ import annotations

import hashlib
import logging
from pathlib import Path

import orjson

from .config import Settings
from .errors import ProblemError
from .fitness import (
    ORACLE_CELL_LIMIT,
    Dataset,
    FeatureSelectionProblem,
    KnapsackProblem,
    OneMaxProblem,
    Problem,
    knapsack_dp_oracle,
    random_knapsack,
    synthetic_feature_dataset,
)
from .idx import load_idx
from .models import BatchConfig, ProblemSpec
from .store import OracleCache

logger = logging.getLogger(__name__)

DEFAULT_ONEMAX_LENGTH = 32
DEFAULT_SYNTHETIC_FEATURES = 32
KNAPSACK_ORACLE = "knapsack"
BASELINE_ORACLE = "centroid-baseline"


def load_oracle_cache(settings: Settings) -> OracleCache:
    return OracleCache(Path(settings.cache_dir))


def problem_fingerprint(spec: ProblemSpec) -> str:
    """Stable key of a problem descriptor (paths included, contents not)."""

    payload = orjson.dumps(spec.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS)
    return hashlib.sha256(payload).hexdigest()[:16]


def load_datasets(spec: ProblemSpec) -> tuple[Dataset, Dataset]:
    """Training and fitness sets of a feature-selection problem.

    Without IDX paths a synthetic separable set is generated. Without
    separate fitness files the fitness set follows the training samples in
    the same files.
    """

    if not spec.uses_idx:
        total = spec.train_size + spec.fitness_size
        data = synthetic_feature_dataset(
            total, spec.length or DEFAULT_SYNTHETIC_FEATURES, seed=spec.instance_seed
        )
        return _split(data, spec.train_size)

    if spec.train_labels is None:
        raise ProblemError("train_images requires train_labels.")
    assert spec.train_images is not None
    if spec.fitness_images is None:
        data = load_idx(spec.train_images, spec.train_labels, spec.train_size + spec.fitness_size)
        return _split(data, spec.train_size)
    if spec.fitness_labels is None:
        raise ProblemError("fitness_images requires fitness_labels.")
    train = load_idx(spec.train_images, spec.train_labels, spec.train_size)
    fitness_set = load_idx(spec.fitness_images, spec.fitness_labels, spec.fitness_size)
    return train, fitness_set


def _split(data: Dataset, train_size: int) -> tuple[Dataset, Dataset]:
    if len(data) <= train_size:
        raise ProblemError(
            f"{len(data)} samples leave nothing for the fitness set after {train_size} training samples."
        )
    train = Dataset(data.images[:train_size], data.labels[:train_size], data.rows, data.cols)
    rest = Dataset(data.images[train_size:], data.labels[train_size:], data.rows, data.cols)
    return train, rest


def build_problem(spec: ProblemSpec, settings: Settings) -> Problem:
    """Instantiate the problem.

    Knapsack error is normalised by the exact optimum, read from the oracle
    cache or computed on the spot, so a run never depends on whether
    ``oracle`` ran first. Instances too large for the DP oracle fall back to
    the sum of values.
    """

    if spec.kind == "onemax":
        return OneMaxProblem(spec.length or DEFAULT_ONEMAX_LENGTH)

    if spec.kind == "knapsack":
        instance = random_knapsack(spec.items, spec.instance_seed)
        cached = load_oracle_cache(settings).get(KNAPSACK_ORACLE, instance.fingerprint())
        if cached is not None:
            return KnapsackProblem(instance, int(cached))
        if (instance.capacity + 1) * instance.items > ORACLE_CELL_LIMIT:
            logger.info(
                "knapsack_oracle_skipped fingerprint=%s normaliser=sum_of_values",
                instance.fingerprint(),
            )
            return KnapsackProblem(instance, None)
        return KnapsackProblem(instance, knapsack_dp_oracle(instance))

    train, fitness_set = load_datasets(spec)
    if len(fitness_set) == 0:
        raise ProblemError("The fitness set is empty.")
    batch_cfg = BatchConfig(
        total_epochs=min(spec.total_epochs, len(fitness_set)), fitness_set_size=len(fitness_set)
    )
    logger.info(
        "feature_problem_ready features=%s train=%s fitness=%s batches=%s",
        train.features,
        len(train),
        len(fitness_set),
        batch_cfg.every_step,
    )
    return FeatureSelectionProblem(train, fitness_set, batch_cfg)
