import itertools

import numpy as np
import pytest
from scipy.stats import chisquare

from capwalk.errors import DomainError
from capwalk.lattice import UNIT_STEPS, pack
from capwalk.walk import (
    WalkPath,
    ball_cover,
    concat,
    from_steps,
    fresh_points,
    simulate_bridge,
    simulate_bridge_batch,
    simulate_srw,
)


def test_path_validation():
    with pytest.raises(DomainError):
        WalkPath(positions=np.array([[0, 0, 0], [2, 0, 0]]))
    with pytest.raises(DomainError):
        WalkPath(positions=np.array([[0, 0, 0], [0, 0, 0]]))
    WalkPath(positions=np.array([[0, 0, 0]]))  # single point is fine


def test_simulate_srw_basics():
    path = simulate_srw(0, seed=1)
    assert path.n == 0 and path.diameter == 0.0
    path = simulate_srw(1000, seed=42)
    assert path.n == 1000
    again = simulate_srw(1000, seed=42)
    assert np.array_equal(path.positions, again.positions)
    other = simulate_srw(1000, seed=43)
    assert not np.array_equal(path.positions, other.positions)


def test_srw_mean_square_displacement():
    # E ||S_n||^2 = n; seeded mean over 100 walks of length 1e5
    总 = 0.0
    n = 100_000
    vals = [
        (simulate_srw(n, seed=s).positions[-1].astype(float) ** 2).sum() / n
        for s in range(100)
    ]
    assert abs(np.mean(vals) - 1.0) <= 0.05


def test_srw_step_uniformity():
    path = simulate_srw(60_000, seed=7)
    counts = np.bincount(path.step_codes(), minlength=6)
    assert chisquare(counts).pvalue > 0.01


def test_fresh_points_and_range():
    path = from_steps((0, 0, 0), [0, 1])  # 0 -> e1 -> 0
    assert path.fresh.tolist() == [True, True, False]
    pts, first = fresh_points(path)
    assert pts.size == 2
    assert path.range_set.size == 2
    assert int(path.fresh.sum()) == path.range_set.size


def test_fresh_fraction_band():
    # asymptotic fresh density is 1/G(0) ~ 0.659; finite-n sits slightly above
    fracs = [
        simulate_srw(10_000, seed=s).fresh.sum() / 10_001 for s in range(50)
    ]
    assert 0.60 <= np.mean(fracs) <= 0.72


def test_diameter_band():
    path = from_steps((0, 0, 0), [])
    assert path.diameter == 0.0
    assert from_steps((0, 0, 0), [0]).diameter == 1.0
    vals = [simulate_srw(10_000, seed=s).diameter / 100.0 for s in range(100)]
    assert 0.8 <= np.mean(vals) <= 1.6


def test_concat():
    p = from_steps((0, 0, 0), [0, 2])
    q = from_steps(p.positions[-1], [4, 1])
    joined = concat(p, q)
    assert joined.n == 4
    assert (joined.positions[0] == 0).all()
    with pytest.raises(DomainError):
        concat(p, from_steps((9, 9, 9), [0]))
    # identity with empty q
    empty = WalkPath(positions=p.positions[-1:][:])
    assert concat(p, empty).n == p.n


def test_serialization_roundtrip():
    path = simulate_srw(500, seed=3)
    text = path.to_text()
    clone = WalkPath.from_text(text)
    assert np.array_equal(path.positions, clone.positions)


# ---------------------------------------------------------------------------
# bridges
# ---------------------------------------------------------------------------

def _enumerate_bridges(d, steps):
    """Exact endpoint-conditioned law over full code sequences (brute force)."""
    target = np.asarray(d)
    seqs = []
    for codes in itertools.product(range(6), repeat=steps):
        disp = UNIT_STEPS[list(codes)].sum(axis=0) if steps else np.zeros(3, int)
        if (disp == target).all():
            seqs.append(codes)
    return seqs


def test_bridge_forced_path():
    path = simulate_bridge((0, 0, 0), (2, 0, 0), 2, seed=0)
    assert np.array_equal(path.positions, [[0, 0, 0], [1, 0, 0], [2, 0, 0]])


def test_bridge_guards():
    with pytest.raises(DomainError):
        simulate_bridge((0, 0, 0), (3, 0, 0), 2, seed=0)  # unreachable
    with pytest.raises(DomainError):
        simulate_bridge((0, 0, 0), (1, 0, 0), 2, seed=0)  # parity
    path = simulate_bridge((5, 5, 5), (5, 5, 5), 0, seed=0)
    assert path.n == 0


def test_bridge_endpoints_always_hit(rng):
    for _ in range(25):
        steps = int(rng.integers(1, 30))
        d = rng.integers(-3, 4, size=3)
        if np.abs(d).sum() > steps or (steps - np.abs(d).sum()) % 2:
            continue
        path = simulate_bridge((1, 2, 3), (1 + d[0], 2 + d[1], 3 + d[2]), steps, seed=int(rng.integers(1 << 30)))
        assert (path.positions[0] == (1, 2, 3)).all()
        assert (path.positions[-1] == (1 + d[0], 2 + d[1], 3 + d[2])).all()
        assert path.n == steps


def test_bridge_two_step_loop_uniform():
    # the 6 two-step loops s, -s are equally likely (chi-square at 6e4 draws)
    codes = simulate_bridge_batch((0, 0, 0), (0, 0, 0), 2, size=60_000, seed=11)
    first = codes[:, 0]
    counts = np.bincount(first, minlength=6)
    assert chisquare(counts).pvalue > 0.01


def test_bridge_batch_matches_single_law():
    # batch and single-draw samplers share the count-vector law
    batch = simulate_bridge_batch((0, 0, 0), (1, 1, 0), 5, size=4000, seed=5)
    single = np.stack(
        [
            np.bincount(
                simulate_bridge((0, 0, 0), (1, 1, 0), 5, seed=1000 + s).step_codes(),
                minlength=6,
            )
            for s in range(1500)
        ]
    )
    batch_counts = np.stack([np.bincount(row, minlength=6) for row in batch])
    m1_batch = batch_counts[:, 0] + batch_counts[:, 1]
    m1_single = single[:, 0] + single[:, 1]
    _, p = _two_sample_counts_test(m1_batch, m1_single, 6)
    assert p > 0.001


def _two_sample_counts_test(x, y, k):
    from scipy.stats import chi2_contingency

    tab = np.stack([np.bincount(x, minlength=k), np.bincount(y, minlength=k)])
    tab = tab[:, tab.sum(axis=0) > 0]
    stat, p, _, _ = chi2_contingency(tab)
    return stat, p


def test_bridge_middle_marginal_vs_enumeration():
    # P(S_2 = 0) for the 4-step loop matches brute-force enumeration within 3 sigma
    seqs = _enumerate_bridges((0, 0, 0), 4)
    hits = sum(
        1
        for codes in seqs
        if (UNIT_STEPS[list(codes[:2])].sum(axis=0) == 0).all()
    )
    p_exact = hits / len(seqs)
    n_draws = 40_000
    codes = simulate_bridge_batch((0, 0, 0), (0, 0, 0), 4, size=n_draws, seed=17)
    mid = UNIT_STEPS[codes[:, 0]] + UNIT_STEPS[codes[:, 1]]
    p_hat = float((mid == 0).all(axis=1).mean())
    sigma = np.sqrt(p_exact * (1 - p_exact) / n_draws)
    assert abs(p_hat - p_exact) <= 3 * sigma


@pytest.mark.parametrize(
    "d,steps",
    [
        ((0, 0, 0), 2),
        ((0, 0, 0), 4),
        ((0, 0, 0), 6),
        ((1, 0, 0), 5),
        ((1, 1, 0), 4),
        ((2, 0, 0), 6),
        ((1, 1, 0), 6),
    ],
)
def test_bridge_count_vector_tv(d, steps):
    # TV between the sampled count-vector law and enumeration <= 0.01 at 1e5 draws
    seqs = _enumerate_bridges(d, steps)
    exact = {}
    for codes in seqs:
        key = tuple(np.bincount(codes, minlength=6))
        exact[key] = exact.get(key, 0) + 1
    total = sum(exact.values())
    n_draws = 100_000
    codes = simulate_bridge_batch((0, 0, 0), d, steps, size=n_draws, seed=23)
    counts = {}
    for row in np.stack([np.bincount(r, minlength=6) for r in codes]):
        key = tuple(row)
        counts[key] = counts.get(key, 0) + 1
    tv = 0.5 * sum(
        abs(counts.get(k, 0) / n_draws - c / total)
        for k, c in exact.items()
    )
    tv += 0.5 * sum(v / n_draws for k, v in counts.items() if k not in exact)
    assert tv <= 0.01


def test_bridge_full_path_tv():
    # full path-law TV at small sizes (shuffle uniformity included)
    for d, steps in [((1, 0, 0), 3), ((0, 0, 0), 2)]:
        seqs = _enumerate_bridges(d, steps)
        p_each = 1.0 / len(seqs)
        n_draws = 200_000
        codes = simulate_bridge_batch((0, 0, 0), d, steps, size=n_draws, seed=29)
        radix = (codes * (6 ** np.arange(steps))).sum(axis=1)
        exact_keys = {
            sum(c * 6**i for i, c in enumerate(codes_)) for codes_ in seqs
        }
        freq = np.bincount(radix, minlength=6**steps) / n_draws
        tv = 0.5 * sum(abs(freq[k] - p_each) for k in exact_keys)
        tv += 0.5 * (1.0 - sum(freq[k] for k in exact_keys))
        assert tv <= 0.01


# ---------------------------------------------------------------------------
# ball cover
# ---------------------------------------------------------------------------

def test_ball_cover_single_center():
    path = from_steps((0, 0, 0), [0, 1] * 20)  # oscillates within B_1
    cover = ball_cover(path, 5.0)
    assert cover.count == 1
    assert cover.covers(path)


def test_ball_cover_straight_path():
    r = 10.0
    path = from_steps((0, 0, 0), [0] * 30)  # straight +x, length 3r
    cover = ball_cover(path, r)
    assert cover.count == 3
    gaps = np.sqrt(
        (np.diff(cover.centers, axis=0).astype(float) ** 2).sum(axis=1)
    )
    assert ((gaps >= r - 1) & (gaps < r + 1)).all()


def test_ball_cover_guard():
    with pytest.raises(DomainError):
        ball_cover(from_steps((0, 0, 0), [0]), 1.0)


def test_ball_cover_srw_invariants():
    for seed in range(20):
        path = simulate_srw(4000, seed=seed)
        cover = ball_cover(path, 12.0)
        assert cover.covers(path)
        if cover.count > 1:
            gaps = np.sqrt(
                (np.diff(cover.centers, axis=0).astype(float) ** 2).sum(axis=1)
            )
            assert ((gaps >= 11.0) & (gaps < 13.0)).all()
        assert cover.stop_times[0] == 0
        assert (np.diff(cover.stop_times) > 0).all()
