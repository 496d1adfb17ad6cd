"""Prometheus metrics helpers for qiga runs."""

from __future__ import annotations

import threading

from prometheus_client import CollectorRegistry, Counter, Histogram, generate_latest

_LOCK = threading.Lock()
_REGISTRY: CollectorRegistry | None = None

# Prometheus collectors (initialised lazily so tests can reset the registry)
_EVALUATION_COUNTER: Counter
_PHASE_SECONDS: Histogram
_RUN_COUNTER: Counter


def _initialise_registry() -> None:
    global _REGISTRY
    global _EVALUATION_COUNTER, _PHASE_SECONDS, _RUN_COUNTER

    registry = CollectorRegistry()

    _EVALUATION_COUNTER = Counter(
        "qiga_fitness_evaluations_total",
        "Fitness evaluations grouped by algorithm.",
        ["algorithm"],
        registry=registry,
    )
    _PHASE_SECONDS = Histogram(
        "qiga_phase_seconds",
        "Per-generation wall time of the rotation, mutation and crossover phases.",
        ["algorithm", "phase"],
        buckets=(0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0),
        registry=registry,
    )
    _RUN_COUNTER = Counter(
        "qiga_runs_total",
        "Completed runs grouped by algorithm and status.",
        ["algorithm", "status"],
        registry=registry,
    )

    _REGISTRY = registry


def _ensure_registry() -> None:
    if _REGISTRY is None:
        with _LOCK:
            if _REGISTRY is None:
                _initialise_registry()


def record_evaluations(algorithm: str, count: int) -> None:
    _ensure_registry()
    _EVALUATION_COUNTER.labels(algorithm=algorithm).inc(count)


def record_phase(algorithm: str, phase: str, duration_seconds: float) -> None:
    _ensure_registry()
    _PHASE_SECONDS.labels(algorithm=algorithm, phase=phase).observe(duration_seconds)


def record_run(algorithm: str, status: str) -> None:
    """Record a finished run (status ``ok`` or ``error``)."""

    _ensure_registry()
    _RUN_COUNTER.labels(algorithm=algorithm, status=status).inc()


def metrics_payload() -> bytes:
    """Return the Prometheus text exposition of every collector."""

    _ensure_registry()
    return generate_latest(_REGISTRY or CollectorRegistry())


def reset_metrics_for_tests() -> None:  # pragma: no cover - test utility
    """Reset the registry so tests can run with a clean state."""

    with _LOCK:
        _initialise_registry()
