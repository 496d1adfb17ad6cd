"""File-backed persistence for run directories and oracle results."""

from __future__ import annotations

import csv
import logging
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import orjson
from pydantic import ValidationError

from .errors import QigaError
from .models import RunManifest, RunSummary, TimingRow
from .schemas import (
    GENERATIONS_COLUMNS,
    GENERATIONS_FILE,
    MANIFEST_FILE,
    SUMMARY_FILE,
    TIMING_COLUMNS,
    TIMING_FILE,
    format_fitness,
    format_seconds,
)

logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS


def dump_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(payload, option=JSON_OPTIONS) + b"\n")


def load_json(path: Path) -> Any:
    try:
        return orjson.loads(path.read_bytes())
    except (OSError, orjson.JSONDecodeError) as exc:
        raise QigaError(f"Cannot read JSON file {path}: {exc}") from exc


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def read_csv(path: Path) -> list[dict[str, str]]:
    with path.open("r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


@dataclass(frozen=True)
class RunRecord:
    """The parsed contents of one run directory."""

    path: Path
    manifest: RunManifest
    summary: RunSummary
    timing: tuple[TimingRow, ...]


class RunStore:
    """Writes and reads run directories under one output root."""

    def __init__(self, root: Path) -> None:
        self._root = root

    @property
    def root(self) -> Path:
        return self._root

    def run_dir(self, run_id: str) -> Path:
        return self._root / run_id

    def save(
        self,
        manifest: RunManifest,
        summary: RunSummary,
        best_scores: Sequence[float],
        avg_scores: Sequence[float],
        timing: Sequence[TimingRow],
        *,
        directory: Path | None = None,
    ) -> Path:
        target = directory or self.run_dir(manifest.run_id)
        target.mkdir(parents=True, exist_ok=True)
        write_csv(
            target / GENERATIONS_FILE,
            GENERATIONS_COLUMNS,
            (
                (str(generation), format_fitness(best), format_fitness(avg))
                for generation, (best, avg) in enumerate(zip(best_scores, avg_scores))
            ),
        )
        write_csv(
            target / TIMING_FILE,
            TIMING_COLUMNS,
            (
                (
                    row.phase,
                    format_seconds(row.optimal),
                    format_seconds(row.worst),
                    format_seconds(row.average),
                    format_seconds(row.total),
                )
                for row in timing
            ),
        )
        dump_json(target / SUMMARY_FILE, summary.model_dump(mode="json"))
        dump_json(target / MANIFEST_FILE, manifest.model_dump(mode="json"))
        logger.debug("run_saved run_id=%s path=%s", manifest.run_id, target)
        return target

    def load(self, directory: Path) -> RunRecord:
        try:
            manifest = RunManifest.model_validate(load_json(directory / MANIFEST_FILE))
            summary = RunSummary.model_validate(load_json(directory / SUMMARY_FILE))
            timing = tuple(
                TimingRow.model_validate(row) for row in read_csv(directory / TIMING_FILE)
            )
        except (OSError, ValidationError) as exc:
            raise QigaError(f"Run directory {directory} is incomplete or invalid: {exc}") from exc
        return RunRecord(path=directory, manifest=manifest, summary=summary, timing=timing)

    def iter_runs(self) -> Iterator[RunRecord]:
        """Every run directory below the root, in sorted path order."""

        if not self._root.exists():
            return
        for manifest_path in sorted(self._root.rglob(MANIFEST_FILE)):
            yield self.load(manifest_path.parent)


class OracleCache:
    """JSON oracle results keyed by problem fingerprint."""

    def __init__(self, cache_dir: Path) -> None:
        self._dir = cache_dir

    def _path(self, kind: str, fingerprint: str) -> Path:
        return self._dir / f"{kind}-{fingerprint}.json"

    def get(self, kind: str, fingerprint: str) -> float | None:
        path = self._path(kind, fingerprint)
        if not path.exists():
            return None
        payload = load_json(path)
        value = payload.get("value") if isinstance(payload, dict) else None
        if value is None:
            logger.warning("oracle_cache_invalid path=%s", path)
            return None
        return float(value)

    def put(self, kind: str, fingerprint: str, value: float, **details: Any) -> Path:
        path = self._path(kind, fingerprint)
        dump_json(path, {"kind": kind, "fingerprint": fingerprint, "value": value, **details})
        logger.info("oracle_cached kind=%s fingerprint=%s value=%s", kind, fingerprint, value)
        return path
