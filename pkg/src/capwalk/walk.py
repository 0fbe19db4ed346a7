"""Simple random walks and exact walk bridges on Z^3.

A WalkPath stores the position sequence S_0..S_n and derives range,
first-visit (fresh) flags, diameter D_n = max ||S_i||, and the ball-cover
decomposition by exit stopping times.

The bridge sampler is exact: an n-step bridge with displacement d is a
uniformly shuffled multiset of signed unit steps whose six type counts
follow the conditional multinomial law.  The counts are drawn by first
splitting steps across coordinates (the two passive coordinates are
collapsed with the diagonal-decomposition identity for 2-d walks, so the
marginal of one coordinate's step count is available in closed form) and
then splitting each coordinate's steps into + and - moves.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from . import lattice
from .capacity import PointSet, point_set
from .errors import DomainError
from .rng import as_generator

_STEP_CODES = lattice.UNIT_STEPS  # code c moves by _STEP_CODES[c]


@dataclass(frozen=True)
class WalkPath:
    """Nearest-neighbor lattice path S_0..S_n."""

    positions: np.ndarray  # (n+1, 3) integer

    def __post_init__(self):
        pos = np.asarray(self.positions)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise DomainError("positions must be an (n+1, 3) array")
        if pos.shape[0] > 1:
            steps = np.abs(np.diff(pos, axis=0)).sum(axis=1)
            if not (steps == 1).all():
                bad = int(np.argmax(steps != 1))
                raise DomainError(f"non-unit step at index {bad}")

    @property
    def n(self) -> int:
        return len(self.positions) - 1

    @cached_property
    def diameter(self) -> float:
        """D_n = max_{0<=i<=n} ||S_i|| (Euclidean, from the origin)."""
        return float(lattice.norms(self.positions).max())

    @cached_property
    def _first_visit(self) -> np.ndarray:
        keys = lattice.pack(self.positions)
        _, first = np.unique(keys, return_index=True)
        fresh = np.zeros(len(keys), dtype=bool)
        fresh[first] = True
        return fresh

    @property
    def fresh(self) -> np.ndarray:
        """fresh[i] is True iff S_i was not visited before time i."""
        return self._first_visit

    @cached_property
    def range_set(self) -> PointSet:
        return point_set(self.positions[self._first_visit])

    def step_codes(self) -> np.ndarray:
        """Direction codes 0..5 of the n steps."""
        diffs = np.diff(self.positions, axis=0)
        codes = np.zeros(len(diffs), dtype=np.int64)
        for c, step in enumerate(_STEP_CODES):
            codes[(diffs == step).all(axis=1)] = c
        return codes

    def to_text(self) -> str:
        """Serialize as `n x0 y0 z0` then one step code per line block."""
        head = f"{self.n} {self.positions[0, 0]} {self.positions[0, 1]} {self.positions[0, 2]}"
        return head + "\n" + " ".join(map(str, self.step_codes().tolist())) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "WalkPath":
        lines = text.strip().splitlines()
        n, x0, y0, z0 = map(int, lines[0].split())
        codes = np.array(
            [int(tok) for line in lines[1:] for tok in line.split()], dtype=np.int64
        )
        if len(codes) != n:
            raise DomainError(f"expected {n} step codes, found {len(codes)}")
        return from_steps((x0, y0, z0), codes)


def from_steps(start, codes) -> WalkPath:
    codes = np.asarray(codes, dtype=np.int64)
    if codes.size and (codes.min() < 0 or codes.max() > 5):
        raise DomainError("step codes must be in 0..5")
    start = lattice.as_points(start)[0]
    positions = np.concatenate(
        [start[None, :], start[None, :] + np.cumsum(_STEP_CODES[codes], axis=0)]
    )
    return WalkPath(positions=positions)


def simulate_srw(n: int, seed=0) -> WalkPath:
    """Simple random walk of n i.i.d. uniform unit steps from the origin."""
    if n < 0:
        raise DomainError("n must be >= 0")
    rng = as_generator(seed)
    codes = rng.integers(0, 6, size=n)
    return from_steps((0, 0, 0), codes)


def diameter(path: WalkPath) -> float:
    return path.diameter


def fresh_points(path: WalkPath) -> tuple[PointSet, np.ndarray]:
    """Distinct visited points with the index of each first visit."""
    keys = lattice.pack(path.positions)
    uniq, first = np.unique(keys, return_index=True)
    order = np.argsort(uniq)
    return point_set(lattice.unpack(uniq[order])), first[order]


def concat(p: WalkPath, q: WalkPath) -> WalkPath:
    """Join two paths; q must start where p ends.  Bookkeeping is recomputed."""
    if not (p.positions[-1] == q.positions[0]).all():
        raise DomainError("q must start at p's endpoint")
    return WalkPath(positions=np.concatenate([p.positions, q.positions[1:]]))


# ---------------------------------------------------------------------------
# exact bridge sampling
# ---------------------------------------------------------------------------

def _log_paths_1d(m: np.ndarray, d: int) -> np.ndarray:
    """log #{1-d walks of m steps with displacement d} = log C(m, (m+d)/2).

    Invalid (m, d) combinations (parity or reach) give -inf.
    """
    m = np.asarray(m, dtype=np.float64)
    up = (m + d) / 2.0
    valid = (m >= abs(d)) & (np.mod(m - abs(d), 2) == 0)
    out = np.full(m.shape, -np.inf)
    mv, uv = m[valid], up[valid]
    out[valid] = gammaln(mv + 1) - gammaln(uv + 1) - gammaln(mv - uv + 1)
    return out


def _log_paths_2d(m: np.ndarray, d1: int, d2: int) -> np.ndarray:
    """log #{2-d walks of m steps with displacement (d1, d2)}.

    Under the 45-degree rotation a 2-d walk splits into two independent
    1-d walks with displacements d1 + d2 and d1 - d2.
    """
    return _log_paths_1d(m, d1 + d2) + _log_paths_1d(m, d1 - d2)


def _sample_categorical(rng: np.random.Generator, log_w: np.ndarray) -> int:
    log_w = log_w - log_w.max()
    w = np.exp(log_w)
    total = w.sum()
    u = rng.random() * total
    return int(np.searchsorted(np.cumsum(w), u))


def simulate_bridge(a, b, steps: int, seed=0) -> WalkPath:
    """Exact sample of an SRW bridge from a to b in `steps` steps.

    Sampling is exact: coordinate step counts (m1, m2, m3) are drawn from
    their joint conditional law (via the closed-form marginal of m1, then
    m2 given m3 = steps - m1 - m2), each coordinate's count splits into
    +/- moves deterministically from the displacement, and the resulting
    step multiset is shuffled uniformly.
    """
    if steps < 0:
        raise DomainError("steps must be >= 0")
    a = lattice.as_points(a)[0]
    b = lattice.as_points(b)[0]
    d = b - a
    l1 = int(np.abs(d).sum())
    if l1 > steps or (steps - l1) % 2 != 0:
        raise DomainError(
            f"displacement {tuple(d)} unreachable in {steps} steps (parity/reach)"
        )
    rng = as_generator(seed)
    if steps == 0:
        return WalkPath(positions=a[None, :].copy())

    m_all = np.arange(steps + 1)
    # marginal of coordinate 1's step count: C(steps, m1) N1(m1) N2(steps - m1)
    log_binom = (
        gammaln(steps + 1) - gammaln(m_all + 1) - gammaln(steps - m_all + 1)
    )
    log_w1 = log_binom + _log_paths_1d(m_all, int(d[0])) + _log_paths_2d(
        steps - m_all, int(d[1]), int(d[2])
    )
    m1 = _sample_categorical(rng, log_w1)

    rest = steps - m1
    m_rest = np.arange(rest + 1)
    log_binom2 = gammaln(rest + 1) - gammaln(m_rest + 1) - gammaln(rest - m_rest + 1)
    log_w2 = (
        log_binom2
        + _log_paths_1d(m_rest, int(d[1]))
        + _log_paths_1d(rest - m_rest, int(d[2]))
    )
    m2 = _sample_categorical(rng, log_w2)
    m3 = rest - m2

    codes = []
    for axis, m in enumerate((m1, m2, m3)):
        plus = (m + int(d[axis])) // 2
        codes.extend([2 * axis] * plus)
        codes.extend([2 * axis + 1] * (m - plus))
    codes = np.array(codes, dtype=np.int64)
    rng.shuffle(codes)
    return from_steps(a, codes)


def bridge_count_vector(a, b, steps: int, seed=0) -> np.ndarray:
    """The six step-type counts (n1+, n1-, ..., n3-) of one exact bridge draw."""
    path = simulate_bridge(a, b, steps, seed)
    codes = path.step_codes()
    return np.bincount(codes, minlength=6)


def simulate_bridge_batch(a, b, steps: int, size: int, seed=0) -> np.ndarray:
    """`size` independent exact bridge draws as a (size, steps) code array.

    Same law as simulate_bridge, vectorized: the coordinate split is drawn
    per sample from the closed-form marginals, then each row's step multiset
    is shuffled with independent sort keys.
    """
    if size < 1:
        raise DomainError("size must be >= 1")
    a = lattice.as_points(a)[0]
    b = lattice.as_points(b)[0]
    d = b - a
    l1 = int(np.abs(d).sum())
    if l1 > steps or (steps - l1) % 2 != 0:
        raise DomainError(
            f"displacement {tuple(d)} unreachable in {steps} steps (parity/reach)"
        )
    rng = as_generator(seed)
    if steps == 0:
        return np.zeros((size, 0), dtype=np.int64)

    m_all = np.arange(steps + 1)
    log_binom = gammaln(steps + 1) - gammaln(m_all + 1) - gammaln(steps - m_all + 1)
    log_w1 = log_binom + _log_paths_1d(m_all, int(d[0])) + _log_paths_2d(
        steps - m_all, int(d[1]), int(d[2])
    )
    w1 = np.exp(log_w1 - log_w1.max())
    m1s = rng.choice(steps + 1, size=size, p=w1 / w1.sum())
    m2s = np.empty(size, dtype=np.int64)
    for m1 in np.unique(m1s):
        rest = steps - int(m1)
        m_rest = np.arange(rest + 1)
        log_b2 = gammaln(rest + 1) - gammaln(m_rest + 1) - gammaln(rest - m_rest + 1)
        log_w2 = (
            log_b2
            + _log_paths_1d(m_rest, int(d[1]))
            + _log_paths_1d(rest - m_rest, int(d[2]))
        )
        w2 = np.exp(log_w2 - log_w2.max())
        mask = m1s == m1
        m2s[mask] = rng.choice(rest + 1, size=int(mask.sum()), p=w2 / w2.sum())

    codes = np.empty((size, steps), dtype=np.int64)
    m3s = steps - m1s - m2s
    for row in range(size):
        col = 0
        for axis, m in enumerate((int(m1s[row]), int(m2s[row]), int(m3s[row]))):
            plus = (m + int(d[axis])) // 2
            codes[row, col : col + plus] = 2 * axis
            codes[row, col + plus : col + m] = 2 * axis + 1
            col += m
    order = np.argsort(rng.random((size, steps)), axis=1)
    return np.take_along_axis(codes, order, axis=1)


# ---------------------------------------------------------------------------
# ball cover
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BallCover:
    """Successive exit-ball decomposition of a path."""

    radius: float
    centers: np.ndarray      # (b, 3) positions at the stopping times
    stop_times: np.ndarray   # (b,) int, stop_times[0] = 0
    count: int

    def covers(self, path: WalkPath) -> bool:
        pos = path.positions.astype(np.float64)
        for lo, hi, c in zip(
            self.stop_times,
            list(self.stop_times[1:]) + [path.n + 1],
            self.centers,
        ):
            seg = pos[lo:hi] - c
            if np.sqrt((seg * seg).sum(axis=1)).max() >= self.radius:
                return False
        return True


def ball_cover(path: WalkPath, r: float) -> BallCover:
    """Exit-time cover: T_{i+1} is the first t with ||S_t - S_{T_i}|| >= r - 1."""
    if r < 2:
        raise DomainError("cover radius must be >= 2")
    pos = path.positions.astype(np.float64)
    centers = [path.positions[0]]
    times = [0]
    t = 0
    threshold = (r - 1.0) ** 2
    while True:
        rel = pos[t:] - pos[t]
        far = np.nonzero((rel * rel).sum(axis=1) >= threshold)[0]
        if len(far) == 0:
            break
        t = t + int(far[0])
        centers.append(path.positions[t])
        times.append(t)
    return BallCover(
        radius=float(r),
        centers=np.array(centers, dtype=np.int64),
        stop_times=np.array(times, dtype=np.int64),
        count=len(times),
    )
