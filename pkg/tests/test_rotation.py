import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qiga.errors import ChromosomeError, OperatorError, RotationTableError, ScheduleError
from qiga.qcore import THETA_HIGH, THETA_LOW, BinaryChromosome, QuantumChromosome, Qubit
from qiga.rotation import (
    Direction,
    MagnitudeCase,
    RotationPolicy,
    TestCase,
    annealed_cap,
    apply_rotation,
    boost_best,
    default_table,
    load_rotation_table,
    lookup,
    magnitude,
    parse_rotation_table,
    rotate_chromosome,
    rotate_gene,
    rotation_direction,
    rotation_matrix,
    update_population,
)

angles = st.floats(min_value=THETA_LOW, max_value=THETA_HIGH, allow_nan=False)


def _p_bit(q: Qubit, bit: int) -> float:
    return q.beta**2 if bit == 1 else q.alpha**2


def test_rotation_matrix_examples():
    assert np.allclose(rotation_matrix(0.0), np.eye(2))
    assert np.allclose(rotation_matrix(math.pi / 2) @ np.array([1.0, 0.0]), [0.0, 1.0])
    u = rotation_matrix(0.3)
    assert np.allclose(u.T @ u, np.eye(2), atol=1e-12)


@given(theta=st.floats(min_value=-10.0, max_value=10.0, allow_nan=False))
@settings(max_examples=1000, deadline=None)
def test_rotation_matrix_is_orthogonal(theta):
    u = rotation_matrix(theta)
    assert np.allclose(u.T @ u, np.eye(2), atol=1e-12)


def test_apply_rotation_examples():
    q = Qubit.from_theta(0.7)
    assert apply_rotation(q, 0.0) is q

    quarter = Qubit.from_theta(math.pi / 4)
    assert apply_rotation(quarter, 0.05 * math.pi).theta == pytest.approx(
        math.pi / 4 + 0.05 * math.pi, abs=1e-12
    )

    top = Qubit.from_theta(THETA_HIGH)
    assert apply_rotation(top, 0.1).theta == pytest.approx(THETA_HIGH, abs=1e-12)


@given(
    theta=st.floats(min_value=0.3, max_value=1.2),
    first=st.floats(min_value=-0.1, max_value=0.1),
    second=st.floats(min_value=-0.1, max_value=0.1),
)
@settings(max_examples=200, deadline=None)
def test_apply_rotation_composes(theta, first, second):
    q = Qubit.from_theta(theta)
    chained = apply_rotation(apply_rotation(q, first), second)
    direct = apply_rotation(q, first + second)
    assert chained.alpha == pytest.approx(direct.alpha, abs=1e-9)
    assert chained.beta == pytest.approx(direct.beta, abs=1e-9)


def test_rotation_direction_cases():
    assert rotation_direction(0.3, 0.3) is Direction.FREE
    assert rotation_direction(0.1, 0.4) is Direction.NEGATIVE
    assert rotation_direction(0.1, 0.1 + 1.2 * math.pi) is Direction.POSITIVE


@given(first=angles, second=angles)
@settings(max_examples=200, deadline=None)
def test_rotation_direction_never_positive_inside_quadrant(first, second):
    assert rotation_direction(first, second) is not Direction.POSITIVE
    assert rotation_direction(second, first) is not Direction.POSITIVE


def test_annealed_cap_endpoints_and_midpoint():
    policy = RotationPolicy.for_test_case(TestCase.T3)
    assert annealed_cap(policy, 0, 100) == policy.theta_max
    assert annealed_cap(policy, 100, 100) == policy.theta_min
    assert annealed_cap(policy, 50, 100) == pytest.approx(0.0405 * math.pi, abs=1e-12)
    with pytest.raises(ScheduleError):
        annealed_cap(policy, 1, 0)


@given(reps=st.integers(min_value=1, max_value=500), data=st.data())
@settings(max_examples=100, deadline=None)
def test_annealed_cap_is_monotone_and_bounded(reps, data):
    policy = RotationPolicy.for_test_case(TestCase.T2)
    epoch = data.draw(st.integers(min_value=0, max_value=reps))
    cap = annealed_cap(policy, epoch, reps)
    assert policy.theta_min - 1e-15 <= cap <= policy.theta_max + 1e-15
    assert annealed_cap(policy, epoch + 1, reps) <= cap + 1e-15


def test_magnitude_examples():
    t1 = RotationPolicy.for_test_case(TestCase.T1)
    t2 = RotationPolicy.for_test_case(TestCase.T2)
    assert magnitude(t1, MagnitudeCase.CASE1, 0.3, 1) == pytest.approx(math.pi / 2 - 0.3)
    assert magnitude(t2, MagnitudeCase.CASE3, 0.3, 0) == pytest.approx(6.0e-4)
    assert magnitude(t2, MagnitudeCase.CASE2, THETA_HIGH, 1) == pytest.approx(0.0, abs=1e-4)


def test_lookup_rows():
    policy = RotationPolicy.for_test_case(TestCase.T1)
    q = Qubit.from_theta(0.5)
    assert lookup((0, 1, True), q, policy) == (-1, MagnitudeCase.CASE2)
    assert lookup((0, 0, False), q, policy) == (0, None)
    assert lookup((1, 0, True), q, policy) == (1, MagnitudeCase.CASE3)
    with pytest.raises(RotationTableError):
        lookup((2, 0, True), q, policy)


def test_lookup_resolves_free_cells_by_direction(tmp_path):
    text = resources.files("qiga").joinpath("data/rotation_table.csv").read_text(encoding="utf-8")
    custom = tmp_path / "table.csv"
    custom.write_text(
        text.replace("0,0,false,T1,0,0,0,0,0", "0,0,false,T1,±,0,0,0,dtheta1"), encoding="utf-8"
    )
    table = load_rotation_table(custom)
    assert load_rotation_table() == default_table()
    policy = RotationPolicy.for_test_case(TestCase.T1)
    q = Qubit.from_theta(0.5)
    assert lookup((0, 0, False), q, policy, best_theta=0.2, table=table) == (
        -1,
        MagnitudeCase.CASE1,
    )
    assert lookup((0, 0, False), q, policy, best_theta=q.theta, table=table)[0] == 1
    assert lookup((0, 0, False), q, policy, table=table)[0] == 1


def test_rotate_gene_examples():
    policy = RotationPolicy.for_test_case(TestCase.T1)
    q = Qubit.from_theta(0.4)
    assert rotate_gene(q, 0, 0, False, policy, 0, 100) is q

    t3 = RotationPolicy.for_test_case(TestCase.T3)
    start = Qubit.from_theta(0.3)
    moved = rotate_gene(start, 1, 1, False, t3, 0, 100)
    assert moved.theta - start.theta == pytest.approx(0.08 * math.pi, abs=1e-12)

    late = rotate_gene(start, 1, 1, False, t3, 100, 100)
    assert abs(late.theta - start.theta) <= t3.theta_min + 1e-12


@pytest.mark.parametrize("case", [TestCase.T1, TestCase.T3])
@given(theta=angles, x_bit=st.integers(0, 1), b_bit=st.integers(0, 1), epoch=st.integers(0, 50))
@settings(max_examples=200, deadline=None)
def test_rotation_never_moves_away_from_best_bit(case, theta, x_bit, b_bit, epoch):
    policy = RotationPolicy.for_test_case(case)
    q = Qubit.from_theta(theta)
    moved = rotate_gene(q, x_bit, b_bit, False, policy, epoch, 50, best_theta=theta)
    assert _p_bit(moved, b_bit) >= _p_bit(q, b_bit) - 1e-12
    assert abs(moved.alpha**2 + moved.beta**2 - 1.0) <= 1e-9


def test_boost_best_examples():
    q = Qubit(0.6, 0.8)
    assert boost_best(q, 1, 1.0) is q

    boosted = boost_best(q, 1, 0.5)
    assert boosted.alpha == pytest.approx(0.3, abs=1e-12)
    assert boosted.beta == pytest.approx(math.sqrt(0.91), abs=1e-12)

    collapsed = boost_best(q, 0, 0.0)
    assert collapsed.theta == pytest.approx(THETA_LOW, abs=1e-12)

    with pytest.raises(OperatorError):
        boost_best(q, 1, 1.5)


@given(theta=angles, bit=st.integers(0, 1), c=st.floats(min_value=0.0, max_value=1.0))
@settings(max_examples=200, deadline=None)
def test_boost_best_preserves_normalisation(theta, bit, c):
    boosted = boost_best(Qubit.from_theta(theta), bit, c)
    assert abs(boosted.alpha**2 + boosted.beta**2 - 1.0) <= 1e-9
    assert _p_bit(boosted, bit) >= _p_bit(Qubit.from_theta(theta), bit) - 1e-12


@pytest.mark.parametrize("case", list(TestCase))
def test_vectorised_rotation_matches_scalar(case):
    rng = np.random.default_rng(int(case))
    policy = RotationPolicy.for_test_case(case)
    theta = rng.uniform(THETA_LOW, THETA_HIGH, size=64)
    best_theta = rng.uniform(THETA_LOW, THETA_HIGH, size=64)
    x_bits = rng.integers(0, 2, size=64)
    b_bits = rng.integers(0, 2, size=64)
    chrom = QuantumChromosome.from_theta(theta)
    for flag in (False, True):
        vector = rotate_chromosome(
            chrom, x_bits, b_bits, flag, policy, 3, 20, best_theta=best_theta
        )
        for index in range(64):
            scalar = rotate_gene(
                chrom[index],
                int(x_bits[index]),
                int(b_bits[index]),
                flag,
                policy,
                3,
                20,
                best_theta=float(best_theta[index]),
            )
            assert vector[index].alpha == pytest.approx(scalar.alpha, abs=1e-9)
            assert vector[index].beta == pytest.approx(scalar.beta, abs=1e-9)


def test_update_population_identity_when_nothing_rotates():
    policy = RotationPolicy.for_test_case(TestCase.T1)
    chrom = QuantumChromosome.from_theta(np.linspace(0.2, 1.3, 8))
    zeros = BinaryChromosome(np.zeros(8, dtype=np.uint8))
    updated = update_population([chrom], zeros, [zeros], [False], policy, 1, 10, 1.0)
    assert updated[0] == chrom


def test_update_population_uses_a_loaded_table(tmp_path):
    text = resources.files("qiga").joinpath("data/rotation_table.csv").read_text(encoding="utf-8")
    custom = tmp_path / "table.csv"
    custom.write_text(
        text.replace("0,0,false,T1,0,0,0,0,0", "0,0,false,T1,+,+,0,0,dtheta1"), encoding="utf-8"
    )
    table = load_rotation_table(custom)
    policy = RotationPolicy.for_test_case(TestCase.T1)
    chrom = QuantumChromosome.from_theta(np.linspace(0.2, 1.3, 8))
    zeros = BinaryChromosome(np.zeros(8, dtype=np.uint8))

    packaged = update_population([chrom], zeros, [zeros], [False], policy, 1, 10, 1.0)
    loaded = update_population([chrom], zeros, [zeros], [False], policy, 1, 10, 1.0, table=table)
    assert packaged[0] == chrom
    assert np.all(loaded[0].theta > chrom.theta)
    assert loaded[0].norm_deviation() <= 1e-9


def test_update_population_converges_to_fixed_best():
    policy = RotationPolicy.for_test_case(TestCase.T1)
    best = BinaryChromosome.from_string("1011001110001101")
    population = [QuantumChromosome.uniform(16)]
    for epoch in range(200):
        population = update_population(population, best, [best], [True], policy, epoch, 200, 0.95)
        assert population[0].norm_deviation() <= 1e-9
    chrom = population[0]
    for index, bit in enumerate(best.bits):
        assert _p_bit(chrom[index], int(bit)) >= 0.99


def test_update_population_rejects_misaligned_inputs():
    policy = RotationPolicy.for_test_case(TestCase.T1)
    chrom = QuantumChromosome.uniform(4)
    best = BinaryChromosome.from_string("1010")
    with pytest.raises(ChromosomeError):
        update_population([chrom], best, [], [True], policy, 0, 10, 0.95)
    with pytest.raises(ChromosomeError):
        update_population(
            [QuantumChromosome.uniform(6)],
            best,
            [BinaryChromosome.from_string("101010")],
            [True],
            policy,
            0,
            10,
            0.95,
        )


def test_default_table_shape_and_parse_errors():
    table = default_table()
    assert len(table) == 8
    assert all(len(row.sign_by_quadrant) == 3 for row in table.values())

    header = (
        "x_bit,b_bit,fx_ge_fb,test_case,sign_pos,sign_neg,sign_alpha_zero,"
        "sign_beta_zero,delta_theta\n"
    )
    with pytest.raises(RotationTableError):
        parse_rotation_table(header + "0,0,false,T1,0,0,0,0,0\n")
    with pytest.raises(RotationTableError):
        parse_rotation_table(header + "0,0,false,T1,?,0,0,0,0\n")


def test_test_case_parse():
    assert TestCase.parse("T2") is TestCase.T2
    assert TestCase.parse(3) is TestCase.T3
    with pytest.raises(RotationTableError):
        TestCase.parse("x")
