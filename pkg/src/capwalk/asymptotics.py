"""Normalizers, capacity trajectories, rate functionals, and event checkers.

The normalizers (natural logs throughout, ``log_k`` the k-fold iterate):

    h3(n)    = (sqrt(6) pi / 9) (log_3 n)^-1 sqrt(n log_2 n)
    hhat3(n) = (sqrt(6) pi^2 / 9) sqrt(n / log_2 n)
    phi(n)   = sqrt((2/3) n log_2 n)
    psi(n)   = pi sqrt(n / (6 log_2 n))
    j3(n, k) = k sqrt(n log_2 n) / log_3 n

Trajectories are the normalized range-capacity curves f_n(t) = R_{nt}/h3(n)
and g_n(t) = R_{nt}/hhat3(n) on a grid; the limiting shapes live in

    S = {l : l(0) = 0, int l'(t)^2 dt <= 1}      (rate_S)
    K = {l nondecreasing : int l(t)^-2 dt <= 1}  (rate_K)

Both rate functionals are exact on piecewise-linear inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .capacity import PointSet, capacity_exact, point_set
from .errors import DomainError
from .estimator import capacity_mc_subsampled
from .green import GreenTable, default_table
from .walk import WalkPath

MIN_N = 16  # smallest n with log_3 n > 0


def iterated_log(n: float, k: int) -> float:
    """k-fold natural logarithm; DomainError when any iterate is <= 0."""
    value = float(n)
    for _ in range(k):
        if value <= 0:
            raise DomainError(f"log_{k} undefined at {n}")
        value = math.log(value)
    if value <= 0:
        raise DomainError(f"log_{k}({n}) = {value} <= 0")
    return value


@dataclass(frozen=True)
class Normalizers:
    n: int
    h3: float
    hhat3: float
    phi: float
    psi: float
    log1: float
    log2: float
    log3: float

    def j3(self, k_n: float) -> float:
        return k_n * math.sqrt(self.n * self.log2) / self.log3

    @property
    def log4(self) -> float:
        return math.log(self.log3)


def normalizers(n: int) -> Normalizers:
    if n < MIN_N:
        raise DomainError(f"normalizers need n >= {MIN_N} (log_3 must be positive)")
    l1 = iterated_log(n, 1)
    l2 = iterated_log(n, 2)
    l3 = iterated_log(n, 3)
    return Normalizers(
        n=int(n),
        h3=(math.sqrt(6.0) * math.pi / 9.0) * math.sqrt(n * l2) / l3,
        hhat3=(math.sqrt(6.0) * math.pi**2 / 9.0) * math.sqrt(n / l2),
        phi=math.sqrt((2.0 / 3.0) * n * l2),
        psi=math.pi * math.sqrt(n / (6.0 * l2)),
        log1=l1,
        log2=l2,
        log3=l3,
    )


def phi_of(x: float) -> float:
    """phi evaluated at a real argument (used for sub-interval bands)."""
    return math.sqrt((2.0 / 3.0) * x * iterated_log(x, 2))


def h3_of(x: float) -> float:
    return (math.sqrt(6.0) * math.pi / 9.0) * math.sqrt(x * iterated_log(x, 2)) / iterated_log(x, 3)


# ---------------------------------------------------------------------------
# monotone cleanup
# ---------------------------------------------------------------------------

def isotonic_fit(y, weights=None) -> np.ndarray:
    """Nondecreasing least-squares fit (pool adjacent violators)."""
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64)
    means = list(y)
    sizes = [1] * len(y)
    wsum = list(w)
    i = 0
    while i < len(means) - 1:
        if means[i] <= means[i + 1] + 1e-15:
            i += 1
            continue
        total = wsum[i] + wsum[i + 1]
        merged = (means[i] * wsum[i] + means[i + 1] * wsum[i + 1]) / total
        means[i : i + 2] = [merged]
        wsum[i : i + 2] = [total]
        sizes[i : i + 2] = [sizes[i] + sizes[i + 1]]
        while i > 0 and means[i - 1] > means[i]:
            total = wsum[i - 1] + wsum[i]
            merged = (means[i - 1] * wsum[i - 1] + means[i] * wsum[i]) / total
            means[i - 1 : i + 1] = [merged]
            wsum[i - 1 : i + 1] = [total]
            sizes[i - 1 : i + 1] = [sizes[i - 1] + sizes[i]]
            i -= 1
    return np.repeat(means, sizes)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    grid: np.ndarray        # increasing t values, grid[0] may be 0
    values: np.ndarray      # f_n or g_n on the grid
    kind: str               # "f" | "g"
    n: int
    meta: dict = field(default_factory=dict)


def trajectory(
    path: WalkPath,
    grid,
    kind: str = "f",
    exact_budget: int = 3000,
    mc_fraction: float = 0.25,
    mc_samples: int = 400,
    kill_radius_factor: float = 25.0,
    seed: int = 0,
    table: GreenTable | None = None,
) -> Trajectory:
    """Normalized capacity-versus-time curve R_{floor(nt)} / h3 (or hhat3).

    Prefix capacities are exact while the prefix range fits the dense-solve
    budget and Monte Carlo beyond; Monte Carlo noise is removed by isotonic
    regression (recorded in meta).  t = 0 maps to value 0 by convention.
    """
    if kind not in ("f", "g"):
        raise DomainError("kind must be 'f' or 'g'")
    if path.n < MIN_N:
        raise DomainError(f"trajectory needs path length >= {MIN_N}")
    grid = np.asarray(grid, dtype=np.float64)
    if (np.diff(grid) <= 0).any() or grid[0] < 0 or grid[-1] > 1 + 1e-12:
        raise DomainError("grid must be strictly increasing within [0, 1]")
    norm = normalizers(path.n)
    denom = norm.h3 if kind == "f" else norm.hhat3
    table = table or default_table()
    raw = np.zeros(len(grid))
    stderr = np.zeros(len(grid))
    methods = []
    for i, t in enumerate(grid):
        m = int(np.floor(path.n * t))
        if t == 0.0:
            raw[i] = 0.0
            methods.append("zero")
            continue
        prefix = point_set(path.positions[: m + 1])
        if prefix.size <= exact_budget:
            raw[i] = capacity_exact(prefix, table)
            methods.append("exact")
        else:
            est = capacity_mc_subsampled(
                prefix,
                fraction=mc_fraction,
                samples_per_point=mc_samples,
                kill_radius_factor=kill_radius_factor,
                seed=seed + 7919 * i,
            )
            raw[i] = est.value
            stderr[i] = est.stderr
            methods.append("mc")
    values = raw / denom
    cleaned = isotonic_fit(values)
    return Trajectory(
        grid=grid,
        values=cleaned,
        kind=kind,
        n=path.n,
        meta={
            "raw_values": values.copy(),
            "stderr": stderr / denom,
            "methods": methods,
            "isotonic_applied": bool(np.any(values != cleaned)),
            "mc_settings": {
                "fraction": mc_fraction,
                "samples_per_point": mc_samples,
                "kill_radius_factor": kill_radius_factor,
                "seed": seed,
            },
        },
    )


# ---------------------------------------------------------------------------
# rate functionals
# ---------------------------------------------------------------------------

def _grid_values(f) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(f, Trajectory):
        return f.grid, f.values
    grid, values = f
    return np.asarray(grid, dtype=np.float64), np.asarray(values, dtype=np.float64)


def rate_S(f) -> float:
    """int l'(t)^2 dt of the piecewise-linear interpolant: sum (df)^2 / dt.

    A grid starting at t > 0 gets an implicit anchor cell from (0, 0).
    """
    grid, values = _grid_values(f)
    if grid[0] == 0 and abs(values[0]) > 1e-12:
        raise DomainError("rate_S needs f(0) = 0")
    dt = np.diff(grid)
    if (dt <= 0).any():
        raise DomainError("grid cells must have positive length")
    df = np.diff(values)
    total = float(np.sum(df * df / dt))
    if grid[0] > 0:
        total += values[0] ** 2 / grid[0]
    return total


def rate_K(g, T: float | None = None) -> float:
    """int_0^T l(t)^-2 dt for the piecewise-linear interpolant, cell-exact.

    Over a cell where g runs linearly from g0 to g1 the integral is
    dt / (g0 g1).  A grid starting at t > 0 is treated as a right-continuous
    jump at 0 (constant value[0] on (0, grid[0]]); a cell leaving g(0) = 0
    makes the integral +inf.  T extends the last value as a constant.
    """
    grid, values = _grid_values(g)
    dt = np.diff(grid)
    if (dt <= 0).any():
        raise DomainError("grid cells must have positive length")
    positive_t = grid > 0
    if (values[positive_t] <= 0).any():
        raise DomainError("rate_K needs g > 0 at positive grid points")
    if grid[0] > 0:
        total = grid[0] / (values[0] * values[0])
        cells = slice(0, None)
    elif values[0] <= 0:
        if len(grid) > 1 and dt[0] > 0:
            return float("inf")
        total, cells = 0.0, slice(1, None)
    else:
        total, cells = 0.0, slice(0, None)
    g0 = values[:-1][cells]
    g1 = values[1:][cells]
    total += float(np.sum(dt[cells] / (g0 * g1)))
    if T is not None:
        if T < grid[-1] - 1e-12:
            raise DomainError("T must cover the grid")
        total += max(0.0, T - grid[-1]) / (values[-1] * values[-1])
    return float(total)


@dataclass
class SMembership:
    status: str                      # "inside" | "near" | "outside"
    rate: float
    dist_upper: float
    certificate: tuple | None = None


def membership_S(f, eps: float = 0.05) -> SMembership:
    """Locate f relative to the unit-rate set S.

    inside: rate <= 1.  outside: some eps-shrunk increment family already
    forces rate > 1 for every function within eps (the certificate lists the
    intervals).  Otherwise near, with the scaling bound
    dist <= ||f||_inf (1 - rate^-1/2) from f / sqrt(rate) in S.
    """
    grid, values = _grid_values(f)
    rate = rate_S(f)
    if rate <= 1.0 + 1e-12:
        return SMembership(status="inside", rate=rate, dist_upper=0.0)
    # certificate: disjoint increments whose 2eps-shrunk slopes still exceed rate 1
    full_grid = grid if grid[0] == 0 else np.concatenate([[0.0], grid])
    full_vals = values if grid[0] == 0 else np.concatenate([[0.0], values])
    shrunk = np.maximum(np.abs(np.diff(full_vals)) - 2.0 * eps, 0.0)
    cell_rates = shrunk**2 / np.diff(full_grid)
    if cell_rates.sum() > 1.0:
        keep = np.nonzero(cell_rates > 0)[0]
        cert = tuple(
            (float(full_grid[i]), float(full_grid[i + 1])) for i in keep
        )
        return SMembership(
            status="outside", rate=rate, dist_upper=float("inf"), certificate=cert
        )
    dist = float(np.max(np.abs(values)) * (1.0 - rate**-0.5))
    return SMembership(status="near", rate=rate, dist_upper=dist)


def holder_check(f, delta: float) -> list[tuple[float, float, float]]:
    """All grid pairs violating |f(x) - f(y)| <= 8 sqrt|x - y| + delta."""
    grid, values = _grid_values(f)
    violations = []
    for i in range(len(grid)):
        gap = np.abs(values - values[i]) - 8.0 * np.sqrt(np.abs(grid - grid[i])) - delta
        bad = np.nonzero(gap > 0)[0]
        for j in bad:
            if j > i:
                violations.append((float(grid[i]), float(grid[j]), float(gap[j])))
    return violations


# ---------------------------------------------------------------------------
# multipoint events
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultiPointSpec:
    """Level/time lists for the multipoint increment events."""

    a: tuple          # a_1..a_k in (0, 1]
    t: tuple          # 0 < t_1 <= ... <= t_k <= 1
    delta: float      # band width for the coordinate event
    delta_tilde: float  # band width for the capacity event

    def __post_init__(self):
        if len(self.a) != len(self.t) or not self.a:
            raise DomainError("a and t must be equal-length nonempty lists")
        if any(not (0 < ai <= 1) for ai in self.a):
            raise DomainError("levels a_i must lie in (0, 1]")
        ts = (0.0,) + tuple(self.t)
        if any(t1 > t2 for t1, t2 in zip(ts, ts[1:])) or ts[-1] > 1:
            raise DomainError("times must satisfy 0 < t_1 <= ... <= t_k <= 1")
        if self.delta < 0 or self.delta_tilde < 0:
            raise DomainError("band widths must be nonnegative")


def check_multipoint_E(traj: Trajectory, spec: MultiPointSpec) -> list[bool]:
    """Capacity-increment bands: per i, is R_{t_i n} - R_{t_{i-1} n} within
    a_i (1 +- delta_tilde) h3((t_i - t_{i-1}) n)?"""
    if traj.kind != "f":
        raise DomainError("multipoint E needs an f-trajectory")
    norm = normalizers(traj.n)
    interp = np.interp(np.concatenate([[0.0], np.asarray(spec.t)]), traj.grid, traj.values)
    caps = interp * norm.h3
    out = []
    prev_t = 0.0
    for i, (a, t) in enumerate(zip(spec.a, spec.t)):
        seg = (t - prev_t) * traj.n
        band = h3_of(seg) if seg >= MIN_N else float("nan")
        inc = caps[i + 1] - caps[i]
        ok = (
            seg >= MIN_N
            and a * (1 - spec.delta_tilde) * band <= inc <= a * (1 + spec.delta_tilde) * band
        )
        out.append(bool(ok))
        prev_t = t
    return out


def check_multipoint_F(path: WalkPath, spec: MultiPointSpec) -> list[bool]:
    """First-coordinate increment bands a_i (1 +- delta) phi(n (t_i - t_{i-1}))."""
    n = path.n
    out = []
    prev_t = 0.0
    for a, t in zip(spec.a, spec.t):
        seg = (t - prev_t) * n
        if seg < MIN_N:
            out.append(False)
            prev_t = t
            continue
        band = phi_of(seg)
        inc = float(
            path.positions[int(np.floor(n * t)), 0]
            - path.positions[int(np.floor(n * prev_t)), 0]
        )
        out.append(bool(a * (1 - spec.delta) * band <= inc <= a * (1 + spec.delta) * band))
        prev_t = t
    return out


# ---------------------------------------------------------------------------
# corridor events
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorridorSpec:
    """Linear-envelope and transverse-fluctuation event parameters."""

    a: float
    delta: float
    kappa: float
    theta: float
    anchor: int         # the index j the events are centered at
    chi: float = 1.0    # cutoff exponent (kept for reporting)

    def __post_init__(self):
        if not (0 < self.delta <= self.kappa < 1):
            raise DomainError("need 0 < delta <= kappa < 1")
        if self.theta <= 0 or self.a <= 0:
            raise DomainError("theta and a must be positive")


def corridor_r(n: int) -> int:
    """r(n) = n (log_3 n)^{3/2} / log_2 n, the envelope's inner cutoff."""
    norm = normalizers(n)
    return int(np.ceil(n * norm.log3**1.5 / norm.log2))


@dataclass
class CorridorReport:
    upper_forward: bool   # S^1_{j+l} - S^1_j <= U(l),  l in [r(n), n-j]
    lower_forward: bool   # S^1_{j+l} - S^1_j >= L(l)
    upper_backward: bool  # S^1_{j+l} - S^1_j <= L(l),  l in [-j, -r(n)]
    lower_backward: bool  # S^1_{j+l} - S^1_j >= U(l)
    transverse: bool      # |S^i_{j+l} - S^i_j| <= theta |l| phi(n)/n, i = 2, 3
    all_events: bool
    r_n: int


def check_corridor(path: WalkPath, spec: CorridorSpec) -> CorridorReport:
    """Evaluate the envelope events literally over the index ranges |l| >= r(n)."""
    n = path.n
    if n < MIN_N:
        raise DomainError(f"corridor events need n >= {MIN_N}")
    r_n = corridor_r(n)
    if r_n >= n:
        raise DomainError(f"degenerate spec: r(n) = {r_n} >= n = {n}")
    j = spec.anchor
    if not (0 <= j <= n):
        raise DomainError("anchor index outside the path")
    norm = normalizers(n)
    slope_hi = spec.a * (1 + spec.delta) * norm.phi / ((1 - spec.kappa) * n)
    slope_lo = spec.a * norm.phi / ((1 + spec.kappa) * n)

    x = path.positions[:, 0].astype(np.float64)
    uf = lf = ub = lb = True
    ls = np.arange(r_n, n - j + 1)
    if len(ls):
        inc = x[j + ls] - x[j]
        uf = bool((inc <= slope_hi * ls).all())
        lf = bool((inc >= slope_lo * ls).all())
    ls_back = np.arange(-j, -r_n + 1)
    if len(ls_back):
        inc = x[j + ls_back] - x[j]
        ub = bool((inc <= slope_lo * ls_back).all())
        lb = bool((inc >= slope_hi * ls_back).all())

    trans = True
    for axis in (1, 2):
        y = path.positions[:, axis].astype(np.float64)
        for ls_seg in (ls, ls_back):
            if len(ls_seg):
                inc = np.abs(y[j + ls_seg] - y[j])
                bound = spec.theta * np.abs(ls_seg) * norm.phi / n
                trans = trans and bool((inc <= bound).all())

    return CorridorReport(
        upper_forward=uf,
        lower_forward=lf,
        upper_backward=ub,
        lower_backward=lb,
        transverse=trans,
        all_events=uf and lf and ub and lb and trans,
        r_n=r_n,
    )
