"""Cube-wrapping and sphere m-gon path constructions with event checkers.

A blueprint is the ideal vertex/time schedule of a path that wraps the
surface of a cube (or sphere) of radius ~ j3(n, k_n) while moving at the
capacity-optimal speed sqrt(2 log_2 n / (3 n)) (slowed by 1/(1 - kappa)):

* cube: square cross-sections at heights h_k = k * 4 jt3^2 / phi(n) for
  k = -L..L, L = floor(phi(n) / (8 jt3)), jt3 = (2/sqrt(3)) j3 so the cube
  corners lie exactly on the sphere of radius j3.  Each level is traversed
  p0 -> p1 -> p2 -> p3 -> p0 along axis-aligned edges of length jt3, then a
  vertical hop leads to the next level.
* sphere: an m-gon on each horizontal circle of the sphere at heights
  h_l = l * j3 / (log_3(n) t(n)), |l| <= (1 - eps) log_3(n) t(n), traversed
  bottom to top with inter-level hops at vertex a = 0.

Realizations are either deterministic staircases (each edge's moves spread
evenly in time, slack absorbed by unit back-and-forth oscillation) or
exact-bridge samples targeting balls around the vertices.

Event checkers evaluate, per edge, the endpoint/transverse events (TE/BE,
jointly FE) and, per cross-section edge, the Green-sum bound (GF), the
linear-growth bands (GL), and the small-bad-fraction event (SG).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .asymptotics import normalizers
from .errors import DomainError
from .estimator import green_sum_profile
from .green import GreenTable, default_table
from .rng import substream
from .walk import WalkPath, from_steps, simulate_bridge, concat

CUBE_SPHERE_RATIO = 2.0 / math.sqrt(3.0)  # cube side over j3: corners on the sphere


@dataclass
class PathBlueprint:
    kind: str                 # "cube" | "sphere"
    n: int
    k_n: float
    vertices: np.ndarray      # (f+1, 3) ideal real-valued vertices
    times: np.ndarray         # (f+1,) scheduled arrival times (parity-fixed)
    distances: np.ndarray     # (f+1,) cumulative ideal perimeter
    edge_kinds: list          # per edge: "xy" (cross-section) | "z" (vertical)
    params: dict = field(default_factory=dict)
    fixups: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def edge_count(self) -> int:
        return len(self.vertices) - 1

    @property
    def t_final(self) -> int:
        return int(self.times[-1])

    def rounded_vertices(self) -> np.ndarray:
        return np.rint(self.vertices).astype(np.int64)

    def to_text(self) -> str:
        lines = [f"kind {self.kind}", f"n {self.n}", f"k_n {self.k_n!r}"]
        for key in sorted(self.params):
            lines.append(f"param {key} {self.params[key]!r}")
        for v, t, d in zip(self.vertices, self.times, self.distances):
            lines.append(f"vertex {v[0]!r} {v[1]!r} {v[2]!r} {int(t)} {d!r}")
        return "\n".join(lines) + "\n"


def _schedule_times(vertices: np.ndarray, speed_inv: float) -> tuple[np.ndarray, np.ndarray, list]:
    """Arrival times from cumulative perimeter, with feasibility/parity fixups."""
    diffs = np.diff(vertices, axis=0)
    seg_len = np.sqrt((diffs * diffs).sum(axis=1))
    dist = np.concatenate([[0.0], np.cumsum(seg_len)])
    raw = np.rint(dist * speed_inv).astype(np.int64)
    rounded = np.rint(vertices).astype(np.int64)
    times = np.zeros(len(vertices), dtype=np.int64)
    fixups = []
    for i in range(len(vertices) - 1):
        l1 = int(np.abs(rounded[i + 1] - rounded[i]).sum())
        dt = int(raw[i + 1] - times[i])
        dt = max(dt, max(l1, 1))
        if (dt - l1) % 2:
            dt += 1
        times[i + 1] = times[i] + dt
        if times[i + 1] != raw[i + 1]:
            fixups.append((i, int(raw[i + 1]), int(times[i + 1])))
    return times, dist, fixups


def cube_blueprint(n: int, k_n: float, kappa: float = 0.1, delta: float = 0.05) -> PathBlueprint:
    """Square cross-sections of the cube inscribed in the sphere of radius j3."""
    if not (0 < kappa < 1) or not (0 < delta < 1):
        raise DomainError("need 0 < kappa, delta < 1")
    if k_n <= 0:
        raise DomainError("k_n must be positive")
    norm = normalizers(n)
    j3 = norm.j3(k_n)
    jt3 = CUBE_SPHERE_RATIO * j3
    if jt3 < 4:
        raise DomainError(f"degenerate cube: side {jt3:.2f} < 4 lattice units")
    ell_real = norm.phi / (8.0 * jt3)
    levels = int(math.floor(ell_real))
    warnings = []
    window_low = math.sqrt(n / norm.log2) * norm.log3**2
    if not (window_low < j3 <= norm.phi):
        warnings.append(
            f"j3 = {j3:.4g} outside the asymptotic window ({window_low:.4g}, {norm.phi:.4g}]"
        )
    if ell_real < 1:
        warnings.append(
            f"ell = {ell_real:.4g} < 1: single equatorial cross-section (k_n too large for n)"
        )
    spacing = 4.0 * jt3 * jt3 / norm.phi
    half = jt3 / math.sqrt(2.0)
    vertices = []
    edge_kinds = []
    square = [
        (half * math.cos(math.pi / 4 + a * math.pi / 2),
         half * math.sin(math.pi / 4 + a * math.pi / 2))
        for a in range(4)
    ]
    for idx, k in enumerate(range(-levels, levels + 1)):
        h = k * spacing
        cycle = [(x, y, h) for (x, y) in square] + [(square[0][0], square[0][1], h)]
        if idx > 0:
            vertices.append(cycle[0])  # vertical hop target
            edge_kinds.append("z")
        vertices.extend(cycle if idx == 0 else cycle[1:])
        edge_kinds.extend(["xy"] * 4)
    vertices = np.array(vertices, dtype=np.float64)
    speed_inv = math.sqrt(3.0 * n / (2.0 * norm.log2)) / (1.0 - kappa)
    times, dist, fixups = _schedule_times(vertices, speed_inv)
    return PathBlueprint(
        kind="cube",
        n=int(n),
        k_n=float(k_n),
        vertices=vertices,
        times=times,
        distances=dist,
        edge_kinds=edge_kinds,
        params={
            "kappa": kappa,
            "delta": delta,
            "K": CUBE_SPHERE_RATIO,
            "j3": j3,
            "jt3": jt3,
            "ell_real": ell_real,
            "levels": levels,
            "spacing": spacing,
            "speed_inv": speed_inv,
        },
        fixups=fixups,
        warnings=warnings,
    )


def _slow_default(norm) -> float:
    try:
        return max(2.0, norm.log4)
    except Exception:
        return 2.0


def sphere_blueprint(
    n: int,
    k_n: float,
    m: int,
    t_slow: float | None = None,
    g_slow: float | None = None,
    eps: float = 0.1,
    kappa: float = 0.1,
    delta: float = 0.05,
) -> PathBlueprint:
    """m-gons on horizontal circles of the sphere of radius j3, bottom to top."""
    if m < 3:
        raise DomainError("m-gon order must be >= 3")
    if not (0 < eps < 1):
        raise DomainError("eps must lie in (0, 1)")
    norm = normalizers(n)
    t_slow = float(t_slow) if t_slow is not None else _slow_default(norm)
    g_slow = float(g_slow) if g_slow is not None else _slow_default(norm)
    if t_slow < 2 or g_slow < 2:
        raise DomainError("slow functions must be >= 2")
    j3 = norm.j3(k_n)
    if j3 < 8:
        raise DomainError(f"degenerate sphere: radius {j3:.2f} < 8 lattice units")
    level_scale = norm.log3 * t_slow
    levels = int(math.floor((1.0 - eps) * level_scale))
    if levels < 0:
        raise DomainError("height count < 1")
    spacing = j3 / level_scale
    vertices = []
    edge_kinds = []
    for idx, l in enumerate(range(-levels, levels + 1)):
        h = l * spacing
        radius = math.sqrt(max(j3 * j3 - h * h, 0.0))
        gon = [
            (radius * math.cos(2 * math.pi * a / m),
             radius * math.sin(2 * math.pi * a / m), h)
            for a in range(m)
        ]
        cycle = gon + [gon[0]]
        if idx > 0:
            vertices.append(cycle[0])
            edge_kinds.append("z")
        vertices.extend(cycle if idx == 0 else cycle[1:])
        edge_kinds.extend(["xy"] * m)
    vertices = np.array(vertices, dtype=np.float64)
    speed_inv = math.sqrt(3.0 * n / (2.0 * norm.log2)) / (1.0 - kappa)
    times, dist, fixups = _schedule_times(vertices, speed_inv)
    return PathBlueprint(
        kind="sphere",
        n=int(n),
        k_n=float(k_n),
        vertices=vertices,
        times=times,
        distances=dist,
        edge_kinds=edge_kinds,
        params={
            "kappa": kappa,
            "delta": delta,
            "m": m,
            "j3": j3,
            "eps": eps,
            "t_slow": t_slow,
            "g_slow": g_slow,
            "levels": levels,
            "spacing": spacing,
            "speed_inv": speed_inv,
        },
        fixups=fixups,
        warnings=[],
    )


# ---------------------------------------------------------------------------
# realizations
# ---------------------------------------------------------------------------

def _staircase_codes(start: np.ndarray, target: np.ndarray, dt: int, edge_index: int) -> np.ndarray:
    """Monotone staircase from start to target in exactly dt steps.

    Moves along each axis are spread evenly over the edge; the remaining
    slack is filled with alternating +/- oscillations along the edge's
    dominant axis, interleaved evenly.
    """
    d = target - start
    l1 = int(np.abs(d).sum())
    if l1 > dt:
        raise DomainError(
            f"infeasible edge {edge_index}: |displacement|_1 = {l1} > dt = {dt}"
        )
    if (dt - l1) % 2:
        raise DomainError(f"parity mismatch on edge {edge_index}")
    keys = []
    codes = []
    for axis in range(3):
        mk = int(abs(d[axis]))
        if mk == 0:
            continue
        code = 2 * axis + (0 if d[axis] > 0 else 1)
        keys.append((np.arange(mk) + 0.5) / mk)
        codes.append(np.full(mk, code, dtype=np.int64))
    idle = dt - l1
    if idle:
        osc_axis = int(np.argmax(np.abs(d))) if l1 else 0
        osc = np.empty(idle, dtype=np.int64)
        osc[0::2] = 2 * osc_axis
        osc[1::2] = 2 * osc_axis + 1
        keys.append((np.arange(idle) + 0.5) / idle)
        codes.append(osc)
    if not keys:
        return np.zeros(0, dtype=np.int64)
    all_keys = np.concatenate(keys)
    all_codes = np.concatenate(codes)
    order = np.argsort(all_keys, kind="stable")
    return all_codes[order]


def realize_deterministic(bp: PathBlueprint) -> WalkPath:
    """Lattice staircase visiting each rounded vertex exactly on schedule."""
    rounded = bp.rounded_vertices()
    chunks = []
    for i in range(bp.edge_count):
        dt = int(bp.times[i + 1] - bp.times[i])
        chunks.append(_staircase_codes(rounded[i], rounded[i + 1], dt, i))
    codes = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    path = from_steps(rounded[0], codes)
    assert (path.positions[bp.times[-1]] == rounded[-1]).all()
    return path


def realize_bridges(bp: PathBlueprint, ball_frac: float = 0.0, seed: int = 0) -> WalkPath:
    """Exact-bridge realization hitting a target in each vertex ball on schedule.

    ``ball_frac`` scales the target balls: radius ball_frac * j3 (cube: jt3)
    around each ideal vertex; 0 pins the rounded vertices themselves.
    """
    if ball_frac < 0:
        raise DomainError("ball_frac must be >= 0")
    rounded = bp.rounded_vertices()
    scale = bp.params.get("jt3", bp.params.get("j3", 1.0))
    radius = ball_frac * scale
    rng = substream(seed, "realize-bridges")
    targets = [rounded[0]]
    for i in range(1, len(rounded)):
        if radius < 1.0:
            targets.append(rounded[i])
            continue
        dt = int(bp.times[i] - bp.times[i - 1])
        prev = targets[-1]
        for _ in range(1000):
            offset = np.rint(rng.uniform(-radius, radius, size=3)).astype(np.int64)
            if (offset.astype(np.float64) ** 2).sum() > radius * radius:
                continue
            cand = rounded[i] + offset
            l1 = int(np.abs(cand - prev).sum())
            if l1 <= dt and (dt - l1) % 2 == 0:
                targets.append(cand)
                break
        else:
            raise DomainError(f"no parity-feasible target in ball {i}")
    path = None
    for i in range(1, len(targets)):
        dt = int(bp.times[i] - bp.times[i - 1])
        seg = simulate_bridge(targets[i - 1], targets[i], dt, substream(seed, "bridge", i))
        path = seg if path is None else concat(path, seg)
    if path is None:
        path = WalkPath(positions=rounded[:1].copy())
    return path


# ---------------------------------------------------------------------------
# event checks
# ---------------------------------------------------------------------------

@dataclass
class EventReport:
    te: np.ndarray            # per-edge endpoint events
    be: np.ndarray            # per-edge transverse events
    fe: np.ndarray            # te & be
    gf_fraction: np.ndarray   # per cross-section edge: good-time fraction (GF)
    gl_fraction: np.ndarray   # per cross-section edge: good-time fraction (GL)
    sg: np.ndarray            # per cross-section edge: bad fraction <= threshold
    sg_threshold: float
    gf_bound: float
    summary: dict = field(default_factory=dict)


def _edge_bands(bp: PathBlueprint) -> tuple[float, float, float, float]:
    """(TE band xy, TE band z, BE band xy, BE band z) for the blueprint kind."""
    norm = normalizers(bp.n)
    delta = bp.params["delta"]
    sqrt_scale = math.sqrt(2.0 * bp.n / (3.0 * norm.log2))
    if bp.kind == "cube":
        jt3 = bp.params["jt3"]
        spacing = bp.params["spacing"]
        fluct = norm.log4 if norm.log3 > 1.0 else max(2.0, norm.log4 + 1.0)
        te_xy = delta * jt3
        te_z = delta * spacing
        be_xy = math.sqrt(jt3 * sqrt_scale) * fluct
        be_z = math.sqrt(spacing * sqrt_scale) * fluct
    else:
        j3 = bp.params["j3"]
        spacing = bp.params["spacing"]
        fluct = bp.params["g_slow"]
        te_xy = delta * j3
        te_z = delta * spacing
        be_xy = math.sqrt(j3 * sqrt_scale) * fluct
        be_z = math.sqrt(spacing * sqrt_scale) * fluct
    return te_xy, te_z, be_xy, be_z


def check_construction_events(
    path: WalkPath,
    bp: PathBlueprint,
    sg_threshold: float | None = None,
    zeta: float | None = None,
    table: GreenTable | None = None,
    profile_method: str = "tree",
    gl_exclusion: float | None = None,
) -> EventReport:
    """Evaluate TE/BE/FE per edge and GF/GL/SG per cross-section edge."""
    if path.n < bp.t_final:
        raise DomainError("path shorter than the blueprint schedule")
    table = table or default_table()
    norm = normalizers(bp.n)
    delta = bp.params["delta"]
    kappa = bp.params["kappa"]
    if sg_threshold is None:
        if bp.kind == "sphere" and zeta is not None:
            sg_threshold = math.sqrt(zeta)
        else:
            sg_threshold = delta
    gf_bound = (1.0 + 20.0 * delta) / (1.0 - kappa) * bp.n / norm.h3

    te_xy, te_z, be_xy, be_z = _edge_bands(bp)
    pos = path.positions
    n_edges = bp.edge_count
    te = np.zeros(n_edges, dtype=bool)
    be = np.zeros(n_edges, dtype=bool)
    gf_fracs = []
    gl_fracs = []
    sg_flags = []

    for i in range(n_edges):
        t0, t1 = int(bp.times[i]), int(bp.times[i + 1])
        v1 = bp.vertices[i + 1]
        seg = pos[t0 : t1 + 1].astype(np.float64)
        kind = bp.edge_kinds[i]
        direction = bp.vertices[i + 1] - bp.vertices[i]
        if kind == "z":
            te[i] = abs(seg[-1, 2] - v1[2]) <= te_z
            be[i] = bool(
                np.max(np.abs(seg[:, :2] - seg[0, :2])) <= be_z
            )
        else:
            if bp.kind == "cube":
                axis = int(np.argmax(np.abs(direction[:2])))
                te[i] = abs(seg[-1, axis] - v1[axis]) <= te_xy
                others = [k for k in range(3) if k != axis]
                be[i] = bool(
                    max(np.max(np.abs(seg[:, k] - seg[0, k])) for k in others) <= be_xy
                )
            else:
                te[i] = bool(np.all(np.abs(seg[-1, :2] - v1[:2]) <= te_xy))
                e_vec = direction / np.linalg.norm(direction)
                o_vec = np.array([-e_vec[1], e_vec[0], 0.0])
                rel = seg - seg[0]
                be[i] = bool(
                    np.max(np.abs(rel[:, 2])) <= be_z
                    and np.max(np.abs(rel @ o_vec)) <= be_xy
                )
            # GF: Green sums within the segment
            sub = WalkPath(positions=pos[t0 : t1 + 1].copy())
            method = "exact" if sub.n <= 1500 else profile_method
            prof = green_sum_profile(sub, method=method, table=table)
            gf_ok = prof.sums <= gf_bound
            # GL: two-sided slope bands around every interior time
            width = (t1 - t0) / norm.log2 if gl_exclusion is None else gl_exclusion * (t1 - t0)
            gl_ok = _gl_flags(seg, direction, delta, max(1, int(math.ceil(width))))
            good = gf_ok & gl_ok
            frac_bad = 1.0 - good.mean()
            gf_fracs.append(float(gf_ok.mean()))
            gl_fracs.append(float(gl_ok.mean()))
            sg_flags.append(bool(frac_bad <= sg_threshold))

    fe = te & be
    return EventReport(
        te=te,
        be=be,
        fe=fe,
        gf_fraction=np.array(gf_fracs),
        gl_fraction=np.array(gl_fracs),
        sg=np.array(sg_flags, dtype=bool),
        sg_threshold=float(sg_threshold),
        gf_bound=float(gf_bound),
        summary={
            "fe_all": bool(fe.all()),
            "fe_rate": float(fe.mean()) if n_edges else 1.0,
            "te_rate": float(te.mean()) if n_edges else 1.0,
            "be_rate": float(be.mean()) if n_edges else 1.0,
            "sg_rate": float(np.mean(sg_flags)) if sg_flags else 1.0,
        },
    )


def _gl_flags(seg: np.ndarray, direction: np.ndarray, delta: float, width: int) -> np.ndarray:
    """Per-time flags of the two-sided slope-band event along a segment.

    For l in the segment the event holds when every t with |t - l| > width
    satisfies (1 - 10 delta) s <= <S_t - S_l, e>/(t - l) <= (1 + 10 delta) s,
    with s = |<S_end - S_start, e>| / seg_length.  Evaluated with prefix and
    suffix extrema of x_t - s_hi t and x_t - s_lo t in O(seg_length).
    """
    e_vec = direction / np.linalg.norm(direction)
    x = seg @ e_vec
    length = len(x) - 1
    if length <= 0:
        return np.ones(1, dtype=bool)
    s_mean = abs(x[-1] - x[0]) / length
    s_hi = (1.0 + 10.0 * delta) * s_mean
    s_lo = (1.0 - 10.0 * delta) * s_mean
    sgn = 1.0 if (x[-1] - x[0]) >= 0 else -1.0
    xs = sgn * x
    t = np.arange(len(x), dtype=np.float64)
    u = xs - s_hi * t
    v = xs - s_lo * t
    # forward: all t >= l + width :  u_t <= u_l  and  v_t >= v_l
    suf_max_u = np.maximum.accumulate(u[::-1])[::-1]
    suf_min_v = np.minimum.accumulate(v[::-1])[::-1]
    pre_min_u = np.minimum.accumulate(u)
    pre_max_v = np.maximum.accumulate(v)
    ok = np.ones(len(x), dtype=bool)
    idx = np.arange(len(x))
    fwd = idx + width < len(x)
    ok[fwd] &= suf_max_u[idx[fwd] + width] <= u[fwd] + 1e-9
    ok[fwd] &= suf_min_v[idx[fwd] + width] >= v[fwd] - 1e-9
    bwd = idx - width >= 0
    ok[bwd] &= pre_min_u[idx[bwd] - width] >= u[bwd] - 1e-9
    ok[bwd] &= pre_max_v[idx[bwd] - width] <= v[bwd] + 1e-9
    return ok
