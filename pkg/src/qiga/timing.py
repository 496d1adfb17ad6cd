"""Per-phase wall-clock recording for engine runs."""

from __future__ import annotations

import time
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass

from . import metrics
from .errors import QigaError
from .models import PHASES, TimingRow


@dataclass
class PhaseRecord:
    """One timed phase of one generation."""

    phase: str
    generation: int
    duration_s: float


def timing_stats(durations: Sequence[float]) -> tuple[float, float, float]:
    """Return (optimal, worst, average) = (min, max, mean)."""

    if not durations:
        raise QigaError("timing_stats needs at least one duration.")
    optimal, worst = min(durations), max(durations)
    average = sum(durations) / len(durations)
    # float rounding can push the mean just outside [min, max]
    return optimal, worst, min(max(average, optimal), worst)


class PhaseTimer:
    """Collects per-generation durations of the rotation, mutation and crossover phases."""

    def __init__(self, algorithm: str) -> None:
        self._algorithm = algorithm
        self._records: list[PhaseRecord] = []

    @contextmanager
    def measure(self, phase: str, generation: int) -> Iterator[None]:
        started = time.perf_counter()
        try:
            yield
        finally:
            self.record(phase, generation, time.perf_counter() - started)

    def record(self, phase: str, generation: int, duration_s: float) -> None:
        self._records.append(PhaseRecord(phase=phase, generation=generation, duration_s=duration_s))
        metrics.record_phase(self._algorithm, phase, duration_s)

    def durations(self, phase: str) -> list[float]:
        """Per-generation totals for ``phase``, in generation order."""

        totals: dict[int, float] = {}
        for record in self._records:
            if record.phase == phase:
                totals[record.generation] = totals.get(record.generation, 0.0) + record.duration_s
        return [totals[generation] for generation in sorted(totals)]

    def summary(self) -> list[TimingRow]:
        """One row per phase; phases never timed (GA rotation) report zeros."""

        rows: list[TimingRow] = []
        for phase in PHASES:
            values = self.durations(phase)
            if not values:
                rows.append(TimingRow(phase=phase, optimal=0.0, worst=0.0, average=0.0, total=0.0))
                continue
            optimal, worst, average = timing_stats(values)
            rows.append(
                TimingRow(
                    phase=phase, optimal=optimal, worst=worst, average=average, total=sum(values)
                )
            )
        return rows
