"""Seeded experiment suites with reproducible JSONL/CSV records.

Every record carries the config hash, the master seed and derived seed
index, and the code version; numeric outputs are bit-for-bit reproducible
for a fixed config regardless of the worker-thread count (each task draws
from its own counter-based substream and records are written in a fixed
sort order).

Suites
------
identity-suite   randomized exact-identity trials (incremental capacity,
                 sandwich and union bounds, monotonicity, subadditivity)
limsup-sweep     f_n(1) and D_n across an n-grid and seeds
strassen-cloud   f-trajectories with rate and Hoelder diagnostics
liminf-cloud     g-trajectories with the inverse-square rate functional
phase-m2         cube constructions across a k_n grid with capacity ratios
                 and the diameter-regime predicates
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._version import __version__
from .asymptotics import normalizers, rate_K, rate_S, holder_check, trajectory
from .capacity import (
    ball_capacity,
    capacity_bounds,
    capacity_exact,
    incremental_capacity,
    point_set,
    union_capacity_upper,
)
from .constructions import cube_blueprint, realize_deterministic
from .errors import ConfigError
from .estimator import capacity_mc, capacity_mc_subsampled
from .rng import substream
from .walk import simulate_srw

CSV_COLUMNS = [
    "suite",
    "n",
    "seed",
    "seed_index",
    "k_n",
    "trial",
    "quantities",
    "config_hash",
    "code_version",
    "timestamp",
    "error",
]


@dataclass
class ExperimentConfig:
    suite: str
    n_grid: list = field(default_factory=lambda: [10_000])
    master_seed: int = 0
    seed_count: int = 1
    seeds: list | None = None
    trials: int = 500
    estimator: dict = field(default_factory=dict)
    construction: dict = field(default_factory=dict)
    epsilon: float = 0.1
    out_path: str | None = None
    threads: int | None = None
    grid: list = field(default_factory=lambda: [round(0.1 * i, 2) for i in range(11)])

    def resolved_seeds(self) -> list[tuple[int, int]]:
        """(seed_index, seed) pairs, explicit list or master-seed derived."""
        if self.seeds is not None:
            return list(enumerate(int(s) for s in self.seeds))
        return [(i, int(self.master_seed) + i) for i in range(self.seed_count)]

    def config_hash(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if k not in ("out_path", "threads")}
        blob = json.dumps(payload, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def thread_budget(self) -> int:
        if self.threads is not None:
            return max(1, int(self.threads))
        return max(1, int(os.environ.get("CAPWALK_THREADS", "1")))


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: line {exc.lineno}, {exc.msg}") from exc
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    if "suite" not in data:
        raise ConfigError("config needs a 'suite' field")
    return ExperimentConfig(**data)


def save_config(cfg: ExperimentConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


@dataclass
class ResultRecord:
    suite: str
    n: int
    seed: int
    seed_index: int
    k_n: float | None
    trial: int
    quantities: dict
    config_hash: str
    code_version: str = __version__
    timestamp: float = 0.0
    error: str | None = None

    def sort_key(self):
        return (self.n, self.seed_index, -1.0 if self.k_n is None else self.k_n, self.trial)

    def to_row(self) -> dict:
        row = asdict(self)
        row["quantities"] = json.dumps(self.quantities, sort_keys=True)
        return row


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def _random_set_in_ball(rng, radius: int, max_size: int) -> np.ndarray:
    size = int(rng.integers(1, max_size + 1))
    pts = rng.integers(-radius, radius + 1, size=(4 * size, 3))
    keep = (pts.astype(float) ** 2).sum(axis=1) <= radius * radius
    pts = pts[keep][:size]
    if len(pts) == 0:
        pts = np.zeros((1, 3), dtype=np.int64)
    return pts


def _identity_trial(cfg: ExperimentConfig, seed_index: int, seed: int, trial: int) -> dict:
    rng = substream(seed, "identity", trial)
    a_pts = _random_set_in_ball(rng, 10, 40)
    b_pts = _random_set_in_ball(rng, 10, 40)
    A = point_set(a_pts)
    keys_a = set(map(tuple, A.points.tolist()))
    b_pts = np.array([p for p in b_pts.tolist() if tuple(p) not in keys_a], dtype=np.int64)
    if len(b_pts) == 0:
        b_pts = np.array([[11, 0, 0]], dtype=np.int64)
    B = point_set(b_pts)
    union = point_set(np.concatenate([A.points, B.points]))

    cap_a = capacity_exact(A)
    cap_b = capacity_exact(B)
    cap_u = capacity_exact(union)
    inc = incremental_capacity(A, B)
    lo, hi = capacity_bounds(union)
    upper = union_capacity_upper(A, B)
    shifted = point_set(A.points + np.array([3, -2, 5]))
    return {
        "identity_residual": abs(inc - (cap_u - cap_a)) / max(cap_u, 1e-12),
        "sandwich_ok": bool(lo <= cap_u + 1e-12 and cap_u <= hi + 1e-12),
        "union_bound_ok": bool(upper >= cap_u - 1e-12),
        "monotone_ok": bool(cap_a <= cap_u + 1e-12 and cap_b <= cap_u + 1e-12),
        "subadditive_ok": bool(cap_u <= cap_a + cap_b + 1e-12),
        "translation_residual": abs(capacity_exact(shifted) - cap_a),
        "cap_union": cap_u,
    }


def _identity_suite(cfg: ExperimentConfig, emit) -> None:
    for seed_index, seed in cfg.resolved_seeds():
        for trial in range(cfg.trials):
            emit(
                n=0,
                seed=seed,
                seed_index=seed_index,
                k_n=None,
                trial=trial,
                work=lambda s=seed, si=seed_index, t=trial: _identity_trial(cfg, si, s, t),
            )


def _range_capacity(path, cfg: ExperimentConfig, seed: int) -> tuple[float, float, str]:
    est_cfg = dict(cfg.estimator)
    exact_budget = int(est_cfg.pop("exact_budget", 3000))
    rset = path.range_set
    if rset.size <= exact_budget:
        return capacity_exact(rset), 0.0, "exact"
    est = capacity_mc_subsampled(
        rset,
        fraction=float(est_cfg.pop("fraction", 0.2)),
        samples_per_point=int(est_cfg.pop("samples_per_point", 400)),
        kill_radius_factor=float(est_cfg.pop("kill_radius_factor", 25.0)),
        seed=seed,
    )
    return est.value, est.stderr, "mc"


def _limsup_point(cfg, n, seed, seed_index) -> dict:
    path = simulate_srw(n, substream(seed, "limsup", n))
    norm = normalizers(n)
    value, err, method = _range_capacity(path, cfg, seed)
    return {
        "R_hat": value,
        "stderr": err,
        "method": method,
        "f1": value / norm.h3,
        "g1": value / norm.hhat3,
        "D_n": path.diameter,
        "fresh": int(path.fresh.sum()),
    }


def _limsup_suite(cfg: ExperimentConfig, emit) -> None:
    for n in cfg.n_grid:
        for seed_index, seed in cfg.resolved_seeds():
            emit(
                n=n,
                seed=seed,
                seed_index=seed_index,
                k_n=None,
                trial=0,
                work=lambda nn=n, s=seed, si=seed_index: _limsup_point(cfg, nn, s, si),
            )


def _cloud_point(cfg, n, seed, kind) -> dict:
    path = simulate_srw(n, substream(seed, "cloud", n, kind))
    grid = np.asarray([t for t in cfg.grid if t > 0], dtype=float)
    est = dict(cfg.estimator)
    traj = trajectory(
        path,
        grid,
        kind=kind,
        exact_budget=int(est.get("exact_budget", 2000)),
        mc_fraction=float(est.get("fraction", 0.2)),
        mc_samples=int(est.get("samples_per_point", 300)),
        kill_radius_factor=float(est.get("kill_radius_factor", 25.0)),
        seed=seed,
    )
    out = {
        "grid": list(map(float, traj.grid)),
        "values": list(map(float, traj.values)),
        "isotonic_applied": traj.meta["isotonic_applied"],
    }
    if kind == "f":
        out["rate_S"] = rate_S(traj)
        out["holder_violations"] = len(holder_check(traj, 0.5))
    else:
        out["rate_K"] = rate_K(traj)
    return out


def _strassen_suite(cfg: ExperimentConfig, emit) -> None:
    for n in cfg.n_grid:
        for seed_index, seed in cfg.resolved_seeds():
            emit(
                n=n, seed=seed, seed_index=seed_index, k_n=None, trial=0,
                work=lambda nn=n, s=seed: _cloud_point(cfg, nn, s, "f"),
            )


def _liminf_suite(cfg: ExperimentConfig, emit) -> None:
    for n in cfg.n_grid:
        for seed_index, seed in cfg.resolved_seeds():
            emit(
                n=n, seed=seed, seed_index=seed_index, k_n=None, trial=0,
                work=lambda nn=n, s=seed: _cloud_point(cfg, nn, s, "g"),
            )


def regime_predicates(record_quantities: dict, n: int, k_n: float, epsilon: float) -> dict:
    """The diameter-regime events evaluated literally on a record.

    A1 = {h3(n) - R < eps R}, A2 = {Cap(B_j3) - R < eps R},
    B = {j3 < D_n < (1 + eps) j3}; Cap(B_j3) uses the asymptotic value for
    large radii (flagged).
    """
    norm = normalizers(n)
    j3 = norm.j3(k_n)
    ball = ball_capacity(j3)
    r_hat = float(record_quantities["R_hat"])
    d_n = float(record_quantities["D_n"])
    return {
        "A1": bool(norm.h3 - r_hat < epsilon * r_hat),
        "A2": bool(ball.value - r_hat < epsilon * r_hat),
        "B": bool(j3 < d_n < (1 + epsilon) * j3),
        "ball_capacity": ball.value,
        "ball_capacity_mode": ball.mode,
    }


def _phase_point(cfg, n, seed, k_n) -> dict:
    cons = dict(cfg.construction)
    bp = cube_blueprint(
        n,
        k_n,
        kappa=float(cons.get("kappa", 0.1)),
        delta=float(cons.get("delta", 0.05)),
    )
    path = realize_deterministic(bp)
    est = dict(cfg.estimator)
    rset = path.range_set
    target_points = int(est.get("target_points", 2500))
    fraction = min(1.0, target_points / rset.size)
    cap = capacity_mc_subsampled(
        rset,
        fraction=fraction,
        samples_per_point=int(est.get("samples_per_point", 300)),
        kill_radius_factor=float(est.get("kill_radius_factor", 25.0)),
        seed=seed,
    )
    norm = normalizers(n)
    quantities = {
        "R_hat": cap.value,
        "stderr": cap.stderr,
        "D_n": path.diameter,
        "t_final": bp.t_final,
        "ratio_h3": cap.value / norm.h3,
        "blueprint_warnings": list(bp.warnings),
    }
    preds = regime_predicates(quantities, n, k_n, cfg.epsilon)
    quantities.update(preds)
    quantities["ratio_ball"] = cap.value / preds["ball_capacity"]
    return quantities


def _phase_suite(cfg: ExperimentConfig, emit) -> None:
    k_grid = cfg.construction.get("k_n_grid", [0.2, 1.0, 5.0])
    for n in cfg.n_grid:
        for seed_index, seed in cfg.resolved_seeds():
            for k_n in k_grid:
                emit(
                    n=n, seed=seed, seed_index=seed_index, k_n=float(k_n), trial=0,
                    work=lambda nn=n, s=seed, k=float(k_n): _phase_point(cfg, nn, s, k),
                )


_SUITES = {
    "identity-suite": _identity_suite,
    "limsup-sweep": _limsup_suite,
    "strassen-cloud": _strassen_suite,
    "liminf-cloud": _liminf_suite,
    "phase-m2": _phase_suite,
}


def run_suite(cfg: ExperimentConfig) -> list[ResultRecord]:
    """Run all tasks of a suite; deterministic record set for a fixed config."""
    if cfg.suite not in _SUITES:
        raise ConfigError(
            f"unknown suite {cfg.suite!r}; available: {', '.join(sorted(_SUITES))}"
        )
    config_hash = cfg.config_hash()
    tasks = []

    def emit(n, seed, seed_index, k_n, trial, work):
        tasks.append((n, seed, seed_index, k_n, trial, work))

    _SUITES[cfg.suite](cfg, emit)

    def run_task(task):
        n, seed, seed_index, k_n, trial, work = task
        try:
            quantities = work()
            error = None
        except Exception as exc:  # failures become records, the suite continues
            quantities = {}
            error = f"{type(exc).__name__}: {exc}"
        return ResultRecord(
            suite=cfg.suite,
            n=n,
            seed=seed,
            seed_index=seed_index,
            k_n=k_n,
            trial=trial,
            quantities=quantities,
            config_hash=config_hash,
            timestamp=time.time(),
            error=error,
        )

    workers = cfg.thread_budget()
    if workers == 1:
        records = [run_task(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_task, tasks))
    records.sort(key=ResultRecord.sort_key)
    return records


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def records_to_jsonl(records: list[ResultRecord]) -> str:
    out = io.StringIO()
    for rec in records:
        out.write(json.dumps(asdict(rec), sort_keys=True))
        out.write("\n")
    return out.getvalue()


def records_to_csv(records: list[ResultRecord]) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS)
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.to_row())
    return out.getvalue()


def write_records(records: list[ResultRecord], path: str, fmt: str = "jsonl") -> None:
    if fmt == "jsonl":
        text = records_to_jsonl(records)
    elif fmt == "csv":
        text = records_to_csv(records)
    else:
        raise ConfigError(f"unknown format {fmt!r} (jsonl or csv)")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_records(path: str) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
