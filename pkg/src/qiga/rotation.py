"""Rotation-gate update: direction, magnitude, lookup-table dispatch and the amplitude boost."""

from __future__ import annotations

import csv
import io
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ChromosomeError, OperatorError, RotationTableError, ScheduleError
from .qcore import THETA_HIGH, THETA_LOW, BinaryChromosome, Qubit, QuantumChromosome

logger = logging.getLogger(__name__)

ZERO_TOLERANCE = 1e-9
DETERMINANT_TOLERANCE = 1e-12
THETA_MIN_DEFAULT = 0.001 * math.pi

SIGN_TOKENS = ("+", "-", "±", "0")
QUADRANT_COLUMNS = ("sign_pos", "sign_neg", "sign_alpha_zero", "sign_beta_zero")
_FREE_SIGN = 2


class TestCase(IntEnum):
    """Parameter preset (crossover/mutation probabilities, rotation angle, case constants)."""

    __test__ = False

    T1 = 1
    T2 = 2
    T3 = 3

    @classmethod
    def parse(cls, value: str | int) -> TestCase:
        text = str(value).strip().upper().removeprefix("T")
        try:
            return cls(int(text))
        except ValueError as exc:
            raise RotationTableError(f"Unknown test case '{value}'.") from exc


class MagnitudeCase(Enum):
    CASE1 = "dtheta1"
    CASE2 = "dtheta2"
    CASE3 = "dtheta3"


class Direction(Enum):
    NEGATIVE = "negative"
    POSITIVE = "positive"
    FREE = "free"


THETA_MAX_BY_CASE: Mapping[TestCase, float] = {
    TestCase.T1: 0.001 * math.pi,
    TestCase.T2: 0.05 * math.pi,
    TestCase.T3: 0.08 * math.pi,
}
CONST_B_BY_CASE: Mapping[TestCase, float] = {TestCase.T1: 20.0, TestCase.T2: 25.0, TestCase.T3: 30.0}
CONST_C_BY_CASE: Mapping[TestCase, float] = {
    TestCase.T1: 400.0,
    TestCase.T2: 500.0,
    TestCase.T3: 600.0,
}


@dataclass(frozen=True)
class RotationPolicy:
    """Angle bounds and magnitude constants for one test case."""

    test_case: TestCase
    theta_min: float
    theta_max: float
    const_a: float = 1.0
    const_b: float = 20.0
    const_c: float = 400.0
    level_max: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.theta_min <= self.theta_max <= math.pi / 2:
            raise RotationTableError(
                f"Require 0 < theta_min <= theta_max <= pi/2, got "
                f"({self.theta_min}, {self.theta_max})."
            )
        if min(self.const_a, self.const_b, self.const_c) <= 0:
            raise RotationTableError("Magnitude constants must be positive.")

    @classmethod
    def for_test_case(
        cls,
        test_case: TestCase | int,
        *,
        level_max: int = 1,
        theta_min: float | None = None,
        theta_max: float | None = None,
    ) -> RotationPolicy:
        case = TestCase(test_case)
        upper = THETA_MAX_BY_CASE[case] if theta_max is None else theta_max
        lower = THETA_MIN_DEFAULT if theta_min is None else theta_min
        return cls(
            test_case=case,
            theta_min=min(lower, upper),
            theta_max=upper,
            const_b=CONST_B_BY_CASE[case],
            const_c=CONST_C_BY_CASE[case],
            level_max=level_max,
        )

    def constant(self, case: MagnitudeCase) -> float:
        if case is MagnitudeCase.CASE1:
            return self.const_a
        if case is MagnitudeCase.CASE2:
            return self.const_b
        return self.const_c


RowKey = tuple[int, int, bool]


@dataclass(frozen=True)
class LookupRow:
    """One lookup-table row: sign tokens per quadrant and magnitude case, per test case."""

    x_bit: int
    b_bit: int
    fx_ge_fb: bool
    sign_by_quadrant: Mapping[TestCase, tuple[str, str, str, str]]
    magnitude_case: Mapping[TestCase, MagnitudeCase | None]

    @property
    def key(self) -> RowKey:
        return (self.x_bit, self.b_bit, self.fx_ge_fb)


def _parse_bit(value: str, column: str, line: int) -> int:
    if value not in {"0", "1"}:
        raise RotationTableError(f"Line {line}: column '{column}' must be 0 or 1, got '{value}'.")
    return int(value)


def _parse_case(value: str, line: int) -> MagnitudeCase | None:
    if value in {"0", "-", "−"}:
        return None
    try:
        return MagnitudeCase(value)
    except ValueError as exc:
        raise RotationTableError(f"Line {line}: unknown delta_theta token '{value}'.") from exc


def parse_rotation_table(text: str) -> dict[RowKey, LookupRow]:
    """Parse the CSV lookup table; ``#`` lines are comments."""

    lines = [line for line in text.splitlines() if line.strip() and not line.startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(lines)))
    signs: dict[RowKey, dict[TestCase, tuple[str, str, str, str]]] = {}
    cases: dict[RowKey, dict[TestCase, MagnitudeCase | None]] = {}
    for line, record in enumerate(reader, start=2):
        try:
            x_bit = _parse_bit(record["x_bit"], "x_bit", line)
            b_bit = _parse_bit(record["b_bit"], "b_bit", line)
            flag = record["fx_ge_fb"].strip().lower()
            if flag not in {"true", "false"}:
                raise RotationTableError(f"Line {line}: fx_ge_fb must be true/false, got '{flag}'.")
            test_case = TestCase.parse(record["test_case"])
            tokens = tuple(record[column].strip().replace("−", "-") for column in QUADRANT_COLUMNS)
            delta = record["delta_theta"].strip()
        except (KeyError, AttributeError) as exc:
            raise RotationTableError(f"Line {line}: missing column ({exc}).") from exc
        for token in tokens:
            if token not in SIGN_TOKENS:
                raise RotationTableError(f"Line {line}: unknown sign token '{token}'.")
        key = (x_bit, b_bit, flag == "true")
        per_case = signs.setdefault(key, {})
        if test_case in per_case:
            raise RotationTableError(f"Line {line}: duplicate row {key} for {test_case.name}.")
        per_case[test_case] = tokens
        cases.setdefault(key, {})[test_case] = _parse_case(delta, line)

    if len(signs) != 8 or any(len(per_case) != len(TestCase) for per_case in signs.values()):
        raise RotationTableError(
            f"Rotation table must hold 8 rows x {len(TestCase)} test cases, got {len(signs)} rows."
        )
    return {
        key: LookupRow(
            x_bit=key[0],
            b_bit=key[1],
            fx_ge_fb=key[2],
            sign_by_quadrant=dict(signs[key]),
            magnitude_case=dict(cases[key]),
        )
        for key in sorted(signs)
    }


@lru_cache(maxsize=1)
def default_table() -> dict[RowKey, LookupRow]:
    """Return the packaged lookup table."""

    text = resources.files("qiga").joinpath("data/rotation_table.csv").read_text(encoding="utf-8")
    return parse_rotation_table(text)


def load_rotation_table(path: Path | None = None) -> dict[RowKey, LookupRow]:
    if path is None:
        return default_table()
    return parse_rotation_table(path.read_text(encoding="utf-8"))


def rotation_matrix(theta: float) -> np.ndarray:
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    return np.array([[cos_t, -sin_t], [sin_t, cos_t]], dtype=np.float64)


def apply_rotation(q: Qubit, signed_delta: float) -> Qubit:
    """Rotate a qubit by ``signed_delta`` radians, clamping at the poles."""

    if signed_delta == 0.0:
        return q
    target = q.theta + signed_delta
    if target < THETA_LOW or target > THETA_HIGH:
        return Qubit.from_theta(target)
    cos_d, sin_d = math.cos(signed_delta), math.sin(signed_delta)
    return Qubit(cos_d * q.alpha - sin_d * q.beta, sin_d * q.alpha + cos_d * q.beta)


def rotation_direction(theta_i: float, theta_j: float) -> Direction:
    """Direction from the determinant sin(theta_j − theta_i) and the angular gap."""

    delta = theta_j - theta_i
    if abs(math.sin(delta)) <= DETERMINANT_TOLERANCE:
        return Direction.FREE
    if abs(delta) <= math.pi:
        return Direction.NEGATIVE
    return Direction.POSITIVE


def annealed_cap(policy: RotationPolicy, epoch: int, reps: int) -> float:
    """Linear anneal from theta_max at epoch 0 down to theta_min at epoch ``reps``."""

    if reps < 1:
        raise ScheduleError(f"Repetition budget must be >= 1, got {reps}.")
    if epoch <= 0:
        return policy.theta_max
    if epoch >= reps:
        return policy.theta_min
    return policy.theta_max - ((policy.theta_max - policy.theta_min) / reps) * epoch


def magnitude(policy: RotationPolicy, case: MagnitudeCase, theta: float, target_bit: int) -> float:
    branch = (math.pi / 2 - theta) if target_bit == 1 else theta
    return abs(branch / policy.constant(case))


def _quadrant(alpha: float, beta: float) -> int:
    if abs(alpha) <= ZERO_TOLERANCE:
        return 2
    if abs(beta) <= ZERO_TOLERANCE:
        return 3
    return 0 if alpha * beta > 0 else 1


def _resolve_sign(token: str, theta: float, best_theta: float) -> int:
    if token == "+":
        return 1
    if token == "-":
        return -1
    if token == "0":
        return 0
    direction = rotation_direction(theta, best_theta)
    return -1 if direction is Direction.NEGATIVE else 1


def lookup(
    row_key: RowKey,
    q: Qubit,
    policy: RotationPolicy,
    *,
    best_theta: float | None = None,
    table: Mapping[RowKey, LookupRow] | None = None,
) -> tuple[int, MagnitudeCase | None]:
    """Resolve the sign and magnitude case for one gene.

    ``±`` cells are decided by the determinant rule over (gene angle,
    best gene angle); a free direction resolves to +1.
    """

    rows = table if table is not None else default_table()
    key = (int(row_key[0]), int(row_key[1]), bool(row_key[2]))
    row = rows.get(key)
    if row is None:
        raise RotationTableError(f"Unknown lookup row {row_key!r}.")
    token = row.sign_by_quadrant[policy.test_case][_quadrant(q.alpha, q.beta)]
    reference = q.theta if best_theta is None else best_theta
    return _resolve_sign(token, q.theta, reference), row.magnitude_case[policy.test_case]


def rotate_gene(
    q: Qubit,
    x_bit: int,
    b_bit: int,
    fx_ge_fb: bool,
    policy: RotationPolicy,
    epoch: int,
    reps: int,
    *,
    best_theta: float | None = None,
) -> Qubit:
    sign, case = lookup((x_bit, b_bit, fx_ge_fb), q, policy, best_theta=best_theta)
    if sign == 0 or case is None:
        return q
    step = min(magnitude(policy, case, q.theta, b_bit), annealed_cap(policy, epoch, reps))
    return apply_rotation(q, sign * step)


def _check_boost_factor(c: float) -> None:
    if not 0.0 <= c <= 1.0:
        raise OperatorError(f"Boost factor c must lie in [0, 1], got {c}.")


def boost_best(q: Qubit, best_bit: int, c: float) -> Qubit:
    """Scale the amplitude opposing ``best_bit`` by c and renormalise the other as √(1 − k)."""

    _check_boost_factor(c)
    if c == 1.0:
        return q
    if best_bit == 1:
        alpha = c * q.alpha
        beta = math.sqrt(1.0 - alpha * alpha)
    else:
        beta = c * q.beta
        alpha = math.sqrt(1.0 - beta * beta)
    if THETA_LOW <= math.atan2(beta, alpha) <= THETA_HIGH:
        return Qubit(alpha, beta)
    return Qubit.from_theta(math.atan2(beta, alpha))


def _encode_signs(rows: Mapping[RowKey, LookupRow], test_case: TestCase) -> np.ndarray:
    """Sign codes indexed [x, b, fx_ge_fb, quadrant]; ±1, 0, or 2 for a free cell."""

    codes = np.zeros((2, 2, 2, 4), dtype=np.int8)
    mapping = {"+": 1, "-": -1, "0": 0, "±": _FREE_SIGN}
    for (x_bit, b_bit, flag), row in rows.items():
        for quadrant, token in enumerate(row.sign_by_quadrant[test_case]):
            codes[x_bit, b_bit, int(flag), quadrant] = mapping[token]
    codes.setflags(write=False)
    return codes


@lru_cache(maxsize=8)
def _default_sign_codes(test_case: TestCase) -> np.ndarray:
    return _encode_signs(default_table(), test_case)


def _sign_codes(
    test_case: TestCase, table: Mapping[RowKey, LookupRow] | None = None
) -> np.ndarray:
    if table is None:
        return _default_sign_codes(test_case)
    return _encode_signs(table, test_case)


def _case_constants(
    policy: RotationPolicy, table: Mapping[RowKey, LookupRow] | None = None
) -> np.ndarray:
    """Magnitude constants indexed [x, b, fx_ge_fb]; NaN where the row does not rotate."""

    rows = table if table is not None else default_table()
    constants = np.full((2, 2, 2), np.nan, dtype=np.float64)
    for (x_bit, b_bit, flag), row in rows.items():
        case = row.magnitude_case[policy.test_case]
        if case is not None:
            constants[x_bit, b_bit, int(flag)] = policy.constant(case)
    return constants


def _with_clamp(alpha: np.ndarray, beta: np.ndarray) -> QuantumChromosome:
    theta = np.arctan2(beta, alpha)
    outside = (theta < THETA_LOW) | (theta > THETA_HIGH)
    if np.any(outside):
        clamped = np.clip(theta, THETA_LOW, THETA_HIGH)
        alpha = np.where(outside, np.cos(clamped), alpha)
        beta = np.where(outside, np.sin(clamped), beta)
    return QuantumChromosome(alpha, beta)


def rotate_chromosome(
    chromosome: QuantumChromosome,
    x_bits: np.ndarray,
    b_bits: np.ndarray,
    fx_ge_fb: bool,
    policy: RotationPolicy,
    epoch: int,
    reps: int,
    *,
    best_theta: np.ndarray | None = None,
    table: Mapping[RowKey, LookupRow] | None = None,
) -> QuantumChromosome:
    """Vectorised ``rotate_gene`` over every gene of one chromosome."""

    alpha, beta = chromosome.alpha, chromosome.beta
    theta = chromosome.theta
    x_idx = np.asarray(x_bits, dtype=np.intp)
    b_idx = np.asarray(b_bits, dtype=np.intp)
    if x_idx.shape != alpha.shape or b_idx.shape != alpha.shape:
        raise ChromosomeError("Bit arrays must match the chromosome length.")

    quadrant = np.where(
        np.abs(alpha) <= ZERO_TOLERANCE,
        2,
        np.where(np.abs(beta) <= ZERO_TOLERANCE, 3, np.where(alpha * beta > 0, 0, 1)),
    )
    flag = int(bool(fx_ge_fb))
    codes = _sign_codes(policy.test_case, table)[x_idx, b_idx, flag, quadrant].astype(np.float64)

    free = codes == _FREE_SIGN
    if np.any(free):
        reference = theta if best_theta is None else np.asarray(best_theta, dtype=np.float64)
        delta = reference - theta
        degenerate = np.abs(np.sin(delta)) <= DETERMINANT_TOLERANCE
        negative = ~degenerate & (np.abs(delta) <= math.pi)
        codes = np.where(free, np.where(negative, -1.0, 1.0), codes)

    constants = _case_constants(policy, table)[x_idx, b_idx, flag]
    active = (codes != 0) & ~np.isnan(constants)
    if not np.any(active):
        return chromosome

    branch = np.where(b_idx == 1, math.pi / 2 - theta, theta)
    raw = np.abs(branch / np.where(active, constants, 1.0))
    step = np.where(active, codes * np.minimum(raw, annealed_cap(policy, epoch, reps)), 0.0)
    cos_d, sin_d = np.cos(step), np.sin(step)
    return _with_clamp(cos_d * alpha - sin_d * beta, sin_d * alpha + cos_d * beta)


def boost_chromosome(
    chromosome: QuantumChromosome, best_bits: np.ndarray, c: float
) -> QuantumChromosome:
    """Vectorised ``boost_best`` over every gene of one chromosome."""

    _check_boost_factor(c)
    if c == 1.0:
        return chromosome
    toward_one = np.asarray(best_bits) == 1
    scaled_alpha = c * chromosome.alpha
    scaled_beta = c * chromosome.beta
    alpha = np.where(toward_one, scaled_alpha, np.sqrt(1.0 - scaled_beta**2))
    beta = np.where(toward_one, np.sqrt(1.0 - scaled_alpha**2), scaled_beta)
    return _with_clamp(alpha, beta)


def update_population(
    population: Sequence[QuantumChromosome],
    best: BinaryChromosome,
    binaries: Sequence[BinaryChromosome],
    fitness_flags: Sequence[bool],
    policy: RotationPolicy,
    epoch: int,
    reps: int,
    c: float,
    *,
    best_theta: np.ndarray | None = None,
    table: Mapping[RowKey, LookupRow] | None = None,
) -> list[QuantumChromosome]:
    """Rotate every gene towards the best individual, then boost its bit.

    Chromosomes shorter than ``best`` use the best's prefix. The input
    population is left untouched.
    """

    if not len(population) == len(binaries) == len(fitness_flags):
        raise ChromosomeError(
            f"Population ({len(population)}), measurements ({len(binaries)}) and flags "
            f"({len(fitness_flags)}) must be aligned."
        )
    updated: list[QuantumChromosome] = []
    for chromosome, measured, flag in zip(population, binaries, fitness_flags):
        length = chromosome.length
        if len(best) < length:
            raise ChromosomeError(
                f"Best individual has {len(best)} genes, chromosome needs {length}."
            )
        if len(measured) != length:
            raise ChromosomeError(
                f"Measured bitstring has {len(measured)} genes, chromosome has {length}."
            )
        b_bits = best.bits[:length]
        reference = None if best_theta is None else best_theta[:length]
        rotated = rotate_chromosome(
            chromosome,
            measured.bits,
            b_bits,
            flag,
            policy,
            epoch,
            reps,
            best_theta=reference,
            table=table,
        )
        updated.append(boost_chromosome(rotated, b_bits, c))
    logger.debug(
        "population_updated size=%s epoch=%s reps=%s test_case=%s",
        len(updated),
        epoch,
        reps,
        policy.test_case.name,
    )
    return updated
