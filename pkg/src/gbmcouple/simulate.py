"""Monte Carlo engine for the coupling time under correlation controls.

The reduced state z = log(X/Y) starts at z0 >= 0 and is absorbed at 0.
Per step the control is frozen, so the increment is drawn from the exact
Gaussian law; an interior barrier crossing is recovered with the
Brownian-bridge probability.  Discretization error therefore enters only
through control freezing and is absent for constant policies.

Reproducibility contract: identical (constants, policy, config) produce
bit-identical per-path outcomes for any worker count, scheduling, or
segmentation of the time axis, because every draw is addressed by
(master seed, path index, step index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from . import rng
from ._kernel import simulate_segment
from .params import DerivedConstants
from .policies import KIND_CONSTANT, CouplingPolicy, PolicyEncoding
from .policies import (
    KIND_GRID,
    KIND_MIRROR,
    KIND_SWITCHING,
    KIND_SYNCHRONOUS,
)

__all__ = [
    "SimConfig",
    "SimResult",
    "Estimate",
    "LaplaceBracket",
    "ErgodicEstimate",
    "TailRateFit",
    "simulate_tau",
    "estimate_survival",
    "estimate_laplace",
    "estimate_ergodic",
    "tail_rate_regression",
    "set_workers",
]


def set_workers(n: int) -> int:
    """Bound the path-simulation worker count; returns the effective value.

    Results never depend on this; it only controls parallelism.
    """
    limit = numba.config.NUMBA_NUM_THREADS
    eff = max(1, min(int(n), limit))
    numba.set_num_threads(eff)
    return eff


@dataclass(frozen=True)
class SimConfig:
    """Path count, step size, horizon, master seed, and bridge toggle.

    The horizon must be an integer number of steps (within rounding).
    """

    n_paths: int
    dt: float
    horizon: float
    master_seed: int
    bridge_correction: bool = True

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError("horizon must be positive and finite")
        if self.n_steps < 1 or abs(self.n_steps * self.dt - self.horizon) > 1e-9 * max(1.0, self.horizon):
            raise ValueError("horizon must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class SimResult:
    """Per-path coupling times; +inf encodes censored at the horizon."""

    hit_times: np.ndarray
    horizon: float
    dt: float
    policy_name: str

    @property
    def n(self) -> int:
        return int(self.hit_times.shape[0])


def _policy_args(enc: PolicyEncoding):
    return (
        enc.kind,
        enc.const_c,
        np.ascontiguousarray(enc.box, dtype=np.float64),
        enc.c_in,
        enc.c_out,
        np.ascontiguousarray(enc.grid_ctrl, dtype=np.int8),
        enc.grid_z0,
        enc.grid_dz,
        enc.grid_s0,
        enc.grid_ds,
        enc.grid_horizon,
    )


def _run_segment_kernel(d, enc, cfg, z, phase, path0, step0, n_steps):
    hit = np.empty(z.shape[0], dtype=np.float64)
    k0, k1 = rng.split_seed(cfg.master_seed)
    simulate_segment(
        z,
        phase,
        hit,
        np.int64(path0),
        np.int64(step0),
        np.int64(n_steps),
        cfg.dt,
        d.mu,
        d.sigma_plus**2,
        d.sigma_minus**2,
        k0,
        k1,
        np.int64(rng.DOMAIN_PATH),
        cfg.bridge_correction,
        *_policy_args(enc),
    )
    return hit


def _controls_numpy(enc: PolicyEncoding, z, t, phase):
    """Reference-engine control dispatch; mirrors the kernel branch for branch."""
    if enc.kind == KIND_MIRROR:
        return np.full_like(z, -1.0), phase
    if enc.kind == KIND_SYNCHRONOUS:
        return np.full_like(z, 1.0), phase
    if enc.kind == KIND_CONSTANT:
        return np.full_like(z, enc.const_c), phase
    if enc.kind == KIND_SWITCHING:
        b = enc.box
        inside_entry = (b[0] <= z) & (z <= b[1]) & (b[2] <= t) & (t <= b[3])
        phase = np.where((phase == 0) & inside_entry, 1, phase).astype(np.uint8)
        inside_exit = (b[4] <= z) & (z <= b[5]) & (b[6] <= t) & (t <= b[7])
        phase = np.where((phase == 1) & ~inside_exit, 2, phase).astype(np.uint8)
        c = np.where(phase == 1, enc.c_in, enc.c_out)
        return c, phase
    if enc.kind == KIND_GRID:
        s_rem = enc.grid_horizon - t
        js = np.floor((s_rem - enc.grid_s0) / enc.grid_ds + 0.5).astype(np.int64)
        js = np.clip(js, 0, enc.grid_ctrl.shape[0] - 1)
        iz = np.floor((z - enc.grid_z0) / enc.grid_dz + 0.5).astype(np.int64)
        iz = np.clip(iz, 0, enc.grid_ctrl.shape[1] - 1)
        return np.where(enc.grid_ctrl[js, iz] > 0, 1.0, -1.0), phase
    raise ValueError(f"unknown policy kind {enc.kind}")


def _run_segment_numpy(d, enc, cfg, z, phase, path0, step0, n_steps):
    """Pure-NumPy twin of the compiled kernel, used for cross-validation."""
    n = z.shape[0]
    hit = np.full(n, np.inf)
    vp2 = d.sigma_plus**2
    vm2 = d.sigma_minus**2
    mu = d.mu
    dt = cfg.dt
    hit[z <= 0.0] = step0 * dt
    active = np.flatnonzero(z > 0.0)
    const_kind = enc.kind <= KIND_CONSTANT
    for j in range(n_steps):
        if active.size == 0:
            break
        t = (step0 + j) * dt
        za = z[active]
        c, phase[active] = _controls_numpy(enc, za, t, phase[active])
        v2 = np.where(
            c == 1.0,
            vm2,
            np.where(c == -1.0, vp2, np.maximum(0.5 * (vp2 + vm2) - 0.5 * (vp2 - vm2) * c, 0.0)),
        )
        det = v2 == 0.0
        zn = za.copy()
        censored_now = np.zeros(za.shape, dtype=bool)
        if np.any(det):
            if mu > 0.0:
                det_idx = np.flatnonzero(det)
                zd = za[det_idx] - mu * dt
                crossed_det = zd <= 0.0
                hit[active[det_idx[crossed_det]]] = t + za[det_idx[crossed_det]] / mu
                zn[det_idx] = np.where(crossed_det, 0.0, zd)
            elif const_kind:
                censored_now = det  # control can never change: stop stepping
            else:
                zn[det] = za[det] - mu * dt
        sto = np.flatnonzero(~det)
        if sto.size:
            idx = active[sto]
            ua, ub = rng.step_uniforms(
                cfg.master_seed, (path0 + idx).astype(np.uint64), np.uint64(step0 + j), rng.DOMAIN_PATH
            )
            xi = rng.normal_inverse(ua)
            zs = za[sto] - mu * dt + np.sqrt(v2[sto] * dt) * xi
            crossed = zs <= 0.0
            hit[idx[crossed]] = t + 0.5 * dt
            if cfg.bridge_correction:
                pb = np.exp(-2.0 * za[sto] * zs / (v2[sto] * dt))
                bridged = ~crossed & (ub < pb)
                hit[idx[bridged]] = t + 0.5 * dt
                zs = np.where(bridged, 0.0, zs)
            zn[sto] = zs
        z[active] = zn
        keep = np.isinf(hit[active]) & ~censored_now
        active = active[keep]
    return hit


def _run_segment(d, policy, cfg, z, phase, path0, step0, n_steps, engine="kernel"):
    enc = policy.encode()
    if engine == "kernel":
        return _run_segment_kernel(d, enc, cfg, z, phase, path0, step0, n_steps)
    if engine == "numpy":
        return _run_segment_numpy(d, enc, cfg, z, phase, path0, step0, n_steps)
    raise ValueError(f"unknown engine {engine!r}")


def simulate_tau(
    d: DerivedConstants, policy: CouplingPolicy, cfg: SimConfig, engine: str = "kernel"
) -> SimResult:
    """Simulate the coupling time for every path.

    Starts all paths at z0; a start on the diagonal gives hit time 0 for
    every path.  Censored paths carry +inf.
    """
    if d.z0 <= 0.0:
        return SimResult(np.zeros(cfg.n_paths), cfg.horizon, cfg.dt, policy.name)
    z = np.full(cfg.n_paths, d.z0, dtype=np.float64)
    phase = policy.initial_phase(cfg.n_paths)
    hit = _run_segment(d, policy, cfg, z, phase, 0, 0, cfg.n_steps, engine=engine)
    return SimResult(hit, cfg.horizon, cfg.dt, policy.name)


# ------------------------------- estimators ------------------------------- #


def _survivors(hit: np.ndarray, T: float, dt: float) -> np.ndarray:
    # Hit times are step multiples of dt; the slack keeps a hit recorded
    # exactly at a report time (up to rounding) from counting as survival.
    return hit > T + 1e-6 * dt


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo point estimate with standard error and path count.

    Carries its raw sums so that merging partial estimates is exact up
    to float-addition round-off.
    """

    mean: float
    std_error: float
    n: int
    kind: str
    sum_: float
    sumsq: float

    @classmethod
    def from_indicators(cls, successes: int, n: int, kind: str = "survival") -> "Estimate":
        if n < 1:
            raise ValueError("empty outcome set")
        return cls._from_sums(float(successes), float(successes), n, kind)

    @classmethod
    def from_samples(cls, values: np.ndarray, kind: str) -> "Estimate":
        values = np.asarray(values, dtype=np.float64)
        if values.size < 1:
            raise ValueError("empty outcome set")
        return cls._from_sums(float(values.sum()), float(np.square(values).sum()), values.size, kind)

    @classmethod
    def _from_sums(cls, s: float, ss: float, n: int, kind: str) -> "Estimate":
        mean = s / n
        if kind in ("survival", "ergodic"):
            se = math.sqrt(max(mean * (1.0 - mean), 0.0) / n)
        elif n > 1:
            var = max(ss - s * s / n, 0.0) / (n - 1)
            se = math.sqrt(var / n)
        else:
            se = float("nan")
        return cls(mean, se, n, kind, s, ss)

    def merge(self, other: "Estimate") -> "Estimate":
        if self.kind != other.kind:
            raise ValueError(f"cannot merge estimates of kinds {self.kind} and {other.kind}")
        return Estimate._from_sums(
            self.sum_ + other.sum_, self.sumsq + other.sumsq, self.n + other.n, self.kind
        )


def estimate_survival(outcomes: SimResult, T: float) -> Estimate:
    """Fraction of paths surviving past T, with binomial standard error."""
    if outcomes.n < 1:
        raise ValueError("empty outcome set")
    if T > outcomes.horizon * (1 + 1e-12):
        raise ValueError("T exceeds the simulated horizon")
    alive = int(np.count_nonzero(_survivors(outcomes.hit_times, T, outcomes.dt)))
    return Estimate.from_indicators(alive, outcomes.n)


@dataclass(frozen=True)
class LaplaceBracket:
    """Two-sided bound on E[exp(-q tau)] under horizon censoring.

    A censored path contributes 0 to the lower estimate and
    exp(-q * horizon) to the upper; the true transform lies between the
    two in expectation.
    """

    q: float
    low: Estimate
    high: Estimate

    @property
    def width(self) -> float:
        return self.high.mean - self.low.mean


def estimate_laplace(outcomes: SimResult, q: float, width_tol: float | None = None) -> LaplaceBracket:
    if q <= 0:
        raise ValueError("q must be positive")
    if outcomes.n < 1:
        raise ValueError("empty outcome set")
    hit = outcomes.hit_times
    finite = np.isfinite(hit)
    w = np.where(finite, np.exp(-q * np.where(finite, hit, 0.0)), 0.0)
    low = Estimate.from_samples(w, "laplace")
    high = Estimate.from_samples(np.where(finite, w, math.exp(-q * outcomes.horizon)), "laplace")
    bracket = LaplaceBracket(q, low, high)
    if width_tol is not None and bracket.width > width_tol:
        raise ValueError(
            f"horizon too short: censoring bracket width {bracket.width:.3g} exceeds {width_tol:.3g}"
        )
    return bracket


@dataclass(frozen=True)
class ErgodicEstimate:
    """Estimate of P(tau = infinity) from the horizon-censored fraction,
    with the time average of survival as a convergence diagnostic."""

    tail: Estimate
    time_average: float
    grid: np.ndarray
    grid_survival: np.ndarray


def estimate_ergodic(outcomes: SimResult, t_grid) -> ErgodicEstimate:
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be increasing with at least two points")
    if t_grid[-1] > outcomes.horizon * (1 + 1e-12):
        raise ValueError("t_grid exceeds the simulated horizon")
    hit = outcomes.hit_times
    surv = np.array(
        [np.count_nonzero(_survivors(hit, t, outcomes.dt)) / outcomes.n for t in t_grid]
    )
    tail = Estimate.from_indicators(int(np.count_nonzero(np.isinf(hit))), outcomes.n, kind="ergodic")
    grid, vals = t_grid, surv
    if t_grid[0] > 0:
        # survival at time zero is 1 unless every path starts absorbed
        start = 1.0 if np.any(hit > 0) else 0.0
        grid = np.concatenate(([0.0], t_grid))
        vals = np.concatenate(([start], surv))
    time_avg = float(np.trapezoid(vals, grid) / grid[-1])
    return ErgodicEstimate(tail, time_avg, t_grid, surv)


# --------------------------- tail-rate regression -------------------------- #


@dataclass(frozen=True)
class TailRateFit:
    """Fitted exponential decay rate of log survival against time.

    ``insufficient`` (with rate -inf) flags fewer than three usable grid
    points, e.g. a deterministic coupling-time cutoff killing every path
    before the grid starts.
    """

    rate: float
    std_error: float
    band: tuple[float, float]
    n_points: int
    insufficient: bool
    times: np.ndarray
    log_survival: np.ndarray
    log_variance: np.ndarray


def tail_rate_regression(
    d: DerivedConstants,
    policy: CouplingPolicy,
    t_grid,
    cfg: SimConfig,
    max_level_gap: float | None = None,
    engine: str = "kernel",
) -> TailRateFit:
    """Exponential tail rate via least squares on log survival.

    Survival at the grid times is estimated with fixed-population
    splitting: at a ladder of intermediate levels the population is
    resampled from the survivors, so conditional survival per level
    stays estimable even when the product is far below 1/n_paths.  The
    slope is generalized least squares on the independent log-survival
    increments, each weighted by its delta-method binomial variance;
    grid points that no path reaches are dropped.
    """
    if d.z0 <= 0.0:
        raise ValueError("tail regression requires z0 > 0")
    t_grid = np.asarray(t_grid, dtype=np.float64)
    if t_grid.ndim != 1 or t_grid.size < 3:
        raise ValueError("need at least three grid times")
    if np.any(np.diff(t_grid) <= 0) or t_grid[0] <= 0:
        raise ValueError("grid times must be positive and increasing")
    grid_steps = np.round(t_grid / cfg.dt).astype(np.int64)
    if np.any(np.abs(grid_steps * cfg.dt - t_grid) > 1e-9 * np.maximum(1.0, t_grid)):
        raise ValueError("grid times must be integer multiples of dt")
    if max_level_gap is None:
        max_level_gap = t_grid[-1] / 40.0
    gap_steps = max(1, int(round(max_level_gap / cfg.dt)))
    levels = set(range(gap_steps, int(grid_steps[-1]) + 1, gap_steps))
    levels.update(int(s) for s in grid_steps)
    level_list = sorted(levels)

    n = cfg.n_paths
    z = np.full(n, d.z0, dtype=np.float64)
    phase = policy.initial_phase(n)
    log_s = 0.0
    var_s = 0.0
    recorded: dict[int, tuple[float, float]] = {}
    path_counter = 0
    prev = 0
    for ordinal, level in enumerate(level_list):
        hit = _run_segment(d, policy, cfg, z, phase, path_counter, prev, level - prev, engine=engine)
        path_counter += n
        alive = np.isinf(hit)
        s_count = int(np.count_nonzero(alive))
        if s_count == 0:
            break
        p_hat = s_count / n
        log_s += math.log(p_hat)
        var_s += (1.0 - p_hat) / s_count
        if level in grid_steps:
            recorded[level] = (log_s, var_s)
        z_surv = z[alive]
        phase_surv = phase[alive]
        u = rng.resample_uniforms(cfg.master_seed, ordinal, n)
        pick = np.minimum((u * s_count).astype(np.int64), s_count - 1)
        z = z_surv[pick].copy()
        phase = phase_surv[pick].copy()
        prev = level

    used = [int(s) for s in grid_steps if int(s) in recorded]
    times = np.array([s * cfg.dt for s in used])
    ys = np.array([recorded[s][0] for s in used])
    vs = np.array([recorded[s][1] for s in used])
    if len(used) < 3:
        return TailRateFit(-math.inf, math.nan, (-math.inf, -math.inf), len(used), True, times, ys, vs)
    dt_inc = np.diff(times)
    dy = np.diff(ys)
    dv = np.maximum(np.diff(vs), 1e-18)
    wsum = float(np.sum(dt_inc * dt_inc / dv))
    rate = float(np.sum(dy * dt_inc / dv) / wsum)
    se = math.sqrt(1.0 / wsum)
    return TailRateFit(rate, se, (rate - 2 * se, rate + 2 * se), len(used), False, times, ys, vs)
