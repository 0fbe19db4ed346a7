import numpy as np
import pytest

from capwalk.capacity import (
    ball_capacity,
    ball_points,
    capacity_bounds,
    capacity_exact,
    equilibrium_measure,
    escape_probability,
    incremental_capacity,
    point_set,
    union_capacity_upper,
)
from capwalk.errors import DomainError, ResourceError
from capwalk.green import FAR_FIELD_COEFF


def _random_ball_set(rng, radius=10, max_size=40):
    size = int(rng.integers(1, max_size + 1))
    pts = rng.integers(-radius, radius + 1, size=(4 * size, 3))
    pts = pts[(pts.astype(float) ** 2).sum(axis=1) <= radius * radius][:size]
    return point_set(pts if len(pts) else [[0, 0, 0]])


def test_singleton_capacity(table):
    # 1x1 system: esc(0) = 1/G(0)
    m = equilibrium_measure(point_set([[0, 0, 0]]), table)
    assert m.cap == pytest.approx(1.0 / table.g0, abs=1e-12)
    assert m.cap == pytest.approx(0.659463, abs=1e-6)
    assert m.esc[0] == m.cap


def test_pair_capacity_closed_form(table):
    # 2x2 symmetric system with G(e1) = G(0) - 1
    pair = point_set([[0, 0, 0], [1, 0, 0]])
    m = equilibrium_measure(pair, table)
    expected = 2.0 / (2.0 * table.g0 - 1.0)
    assert m.cap == pytest.approx(expected, abs=1e-10)
    assert m.cap == pytest.approx(0.983878, abs=1e-6)
    assert m.esc[0] == pytest.approx(m.esc[1], abs=1e-12)


def test_translation_invariance(table, rng):
    for _ in range(5):
        A = _random_ball_set(rng)
        shift = rng.integers(-30, 31, size=3)
        assert capacity_exact(point_set(A.points + shift), table) == pytest.approx(
            capacity_exact(A, table), rel=1e-12
        )


def test_equilibrium_residual_and_range(table, rng):
    for _ in range(10):
        m = equilibrium_measure(_random_ball_set(rng), table)
        assert m.solver_residual <= 1e-10
        assert (m.esc >= 0).all() and (m.esc <= 1).all()


def test_empty_set_conventions(table):
    assert capacity_exact(point_set(np.zeros((0, 3)))) == 0.0
    assert escape_probability((5, 5, 5), point_set(np.zeros((0, 3)))) == 1.0
    with pytest.raises(DomainError):
        equilibrium_measure(point_set(np.zeros((0, 3))), table)


def test_budget_guard(table):
    big = ball_points(12)
    with pytest.raises(ResourceError):
        equilibrium_measure(big, table, max_points=1000)


def test_escape_probability_neighbor(table):
    # 1 - G(e1)/G(0) = 1/G(0)
    value = escape_probability((1, 0, 0), point_set([[0, 0, 0]]), table)
    assert value == pytest.approx(1.0 / table.g0, abs=1e-10)
    with pytest.raises(DomainError):
        escape_probability((0, 0, 0), point_set([[0, 0, 0]]), table)


def test_escape_probability_far(table):
    x = (1000, 0, 0)
    cap0 = 1.0 / table.g0
    value = escape_probability(x, point_set([[0, 0, 0]]), table)
    assert value == pytest.approx(1.0 - cap0 * FAR_FIELD_COEFF / 1000.0, abs=1e-4)


def test_escape_far_rate(table, rng):
    # 1 - esc ~ Cap(A) * 3/(2 pi r) within 5% for r >= 100
    A = _random_ball_set(rng, radius=5, max_size=15)
    cap = capacity_exact(A, table)
    centroid = A.points.mean(axis=0)
    for r in (100.0, 250.0, 600.0):
        direction = rng.standard_normal(3)
        x = np.rint(centroid + r * direction / np.linalg.norm(direction)).astype(int)
        hit = 1.0 - escape_probability(tuple(x), A, table)
        rr = np.sqrt(((x - centroid) ** 2).sum())
        assert hit == pytest.approx(cap * FAR_FIELD_COEFF / rr, rel=0.05)


def test_bounds_singleton(table):
    lo, hi = capacity_bounds(point_set([[0, 0, 0]]), table)
    assert lo == pytest.approx(1.0 / table.g0)
    assert hi == pytest.approx(1.0 / table.g0)


def test_bounds_sandwich_exact(table, rng):
    for _ in range(20):
        A = _random_ball_set(rng)
        lo, hi = capacity_bounds(A, table)
        cap = capacity_exact(A, table)
        assert lo <= cap + 1e-10
        assert cap <= hi + 1e-10


def test_bounds_with_multiplicity(table):
    # doubling a point enters both |X| and the G-sums
    plain = point_set([[0, 0, 0], [2, 0, 0]])
    doubled = point_set([[0, 0, 0], [2, 0, 0]], counts=[2, 1])
    lo1, hi1 = capacity_bounds(plain, table)
    lo2, hi2 = capacity_bounds(doubled, table)
    assert (lo2, hi2) != (lo1, hi1)
    cap = capacity_exact(plain, table)
    assert lo2 <= cap + 1e-10  # the bound still sandwiches the set capacity


def test_union_bound(table, rng):
    X = point_set([[0, 0, 0]])
    Y = point_set([[1, 0, 0]])
    assert union_capacity_upper(X, Y, table) >= 0.98386 - 1e-6
    assert union_capacity_upper(X, X, table) >= capacity_exact(X, table)
    for _ in range(25):
        A = _random_ball_set(rng, max_size=30)
        B = _random_ball_set(rng, max_size=30)
        union = point_set(np.concatenate([A.points, B.points]))
        assert union_capacity_upper(A, B, table) >= capacity_exact(union, table) - 1e-10


def test_incremental_identity_hand_value(table):
    A = point_set([[0, 0, 0]])
    B = point_set([[1, 0, 0]])
    inc = incremental_capacity(A, B, table)
    g0 = table.g0
    expected = (1.0 - (g0 - 1.0) / g0) * (1.0 / (2 * g0 - 1.0))
    assert inc == pytest.approx(expected, abs=1e-10)
    assert inc == pytest.approx(0.324415, abs=1e-6)
    assert inc == pytest.approx(
        capacity_exact(point_set([[0, 0, 0], [1, 0, 0]]), table) - capacity_exact(A, table),
        abs=1e-10,
    )


def test_incremental_empty_and_disjointness(table):
    A = point_set([[0, 0, 0]])
    assert incremental_capacity(A, point_set(np.zeros((0, 3))), table) == 0.0
    with pytest.raises(DomainError):
        incremental_capacity(A, A, table)


def test_incremental_identity_randomized(table, rng):
    for _ in range(30):
        A = _random_ball_set(rng)
        B = _random_ball_set(rng)
        b_keys = {tuple(p) for p in A.points.tolist()}
        B = point_set(
            [p for p in B.points.tolist() if tuple(p) not in b_keys] or [[11, 0, 0]]
        )
        union = point_set(np.concatenate([A.points, B.points]))
        lhs = incremental_capacity(A, B, table)
        rhs = capacity_exact(union, table) - capacity_exact(A, table)
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, rhs)


def test_monotone_and_subadditive(table, rng):
    for _ in range(20):
        A = _random_ball_set(rng)
        B = _random_ball_set(rng)
        union = point_set(np.concatenate([A.points, B.points]))
        cap_a, cap_b, cap_u = (
            capacity_exact(A, table),
            capacity_exact(B, table),
            capacity_exact(union, table),
        )
        assert cap_a <= cap_u + 1e-10
        assert cap_b <= cap_u + 1e-10
        assert cap_u <= cap_a + cap_b + 1e-10


def test_ball_points_counts():
    assert ball_points(0).size == 1
    assert ball_points(1).size == 7
    assert ball_points(2).size == 33
    with pytest.raises(DomainError):
        ball_points(-1)
    with pytest.raises(ResourceError):
        ball_points(100)


def test_ball_capacity_modes(table):
    single = ball_capacity(0, table)
    assert single.mode == "exact"
    assert single.value == pytest.approx(1.0 / table.g0)
    asym = ball_capacity(500.0, table)
    assert asym.mode == "asymptotic"
    assert asym.value == pytest.approx(500.0 / FAR_FIELD_COEFF)


@pytest.mark.slow
def test_ball_capacity_matches_asymptote(table):
    ball = ball_capacity(8.0, table)
    assert ball.mode == "exact"
    assert ball.value / (8.0 / FAR_FIELD_COEFF) == pytest.approx(1.0, abs=0.10)
