"""Reproducible batch experiments over the numerical modules.

Each experiment consumes a validated run file, writes CSV/JSON artifacts
plus a manifest into its output directory, and reports consistency
failures (claims the numerics were expected to reproduce but did not).
Artifacts are byte-reproducible: rerunning the same run file with any
worker count yields identical CSVs.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__, analytic, hjb, rng
from .params import ProblemSpec, classify_finite_horizon, classify_stationary, derive
from .policies import Constant, CouplingPolicy, Mirror, Switching, Synchronous, policy_from_json, switching_policy
from .runfile import RunFile, RunFileError
from .simulate import (
    SimConfig,
    estimate_ergodic,
    estimate_laplace,
    estimate_survival,
    set_workers,
    simulate_tau,
    tail_rate_regression,
)

__all__ = ["run", "ExperimentResult"]


def _fmt(v) -> str:
    """Full round-trip decimal formatting so CSV diffs are exact."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else _fmt(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


class _Output:
    """Artifact writer rooted at the experiment's output directory."""

    def __init__(self, directory: Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.artifacts: dict[str, str] = {}

    def _record(self, name: str, data: bytes) -> None:
        self.artifacts[name] = hashlib.sha256(data).hexdigest()

    def write_csv(self, name: str, header: list[str], rows) -> Path:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        data = ("\n".join(lines) + "\n").encode()
        path = self.dir / name
        path.write_bytes(data)
        self._record(name, data)
        return path

    def write_json(self, name: str, obj) -> Path:
        data = (json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n").encode()
        path = self.dir / name
        path.write_bytes(data)
        self._record(name, data)
        return path

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.dir / name
        path.write_bytes(data)
        self._record(name, data)
        return path


@dataclass
class ExperimentResult:
    summary: dict = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)


# --------------------------------- derive --------------------------------- #


def _exp_derive(spec: ProblemSpec, params: dict, out: _Output) -> ExperimentResult:
    d = derive(spec)
    T = float(params.get("T", 1.0))
    stationary = classify_stationary(d)
    doc = {
        "constants": {
            "mu": d.mu,
            "sigma_plus": d.sigma_plus,
            "sigma_minus": d.sigma_minus,
            "z0": d.z0,
            "swapped": d.swapped,
        },
        "stationary": {
            "inf": vars(stationary.inf).copy(),
            "sup": vars(stationary.sup).copy(),
        },
    }
    summary = dict(doc["constants"])
    if d.z0 > 0:
        vp = classify_finite_horizon(d, "plus", T)
        vm = classify_finite_horizon(d, "minus", T)
        rates = analytic.tail_rates(d)
        doc["finite_horizon"] = {"T": T, "plus": vars(vp).copy(), "minus": vars(vm).copy()}
        doc["tail_rates"] = {
            "mirror": rates.rate_mirror,
            "synchronous": rates.rate_sync,
            "efficient_plus": rates.efficient_plus,
            "conjectured_efficient_plus": rates.conjectured_efficient_plus,
            "conjectured_efficient_minus": rates.conjectured_efficient_minus,
        }
        summary["verdict_plus"] = vp.verdict
        summary["verdict_minus"] = vm.verdict
    else:
        doc["finite_horizon"] = None
        doc["tail_rates"] = None
        summary["verdict_plus"] = "n/a"
        summary["verdict_minus"] = "n/a"
    out.write_json("derived.json", doc)
    return ExperimentResult(summary=summary)


# ------------------------------ analytic table ----------------------------- #


def _axis(raw, name: str) -> np.ndarray:
    if isinstance(raw, dict):
        unknown = set(raw) - {"min", "max", "count", "spacing"}
        if unknown:
            raise RunFileError(f"unknown {name} range keys: {sorted(unknown)}")
        lo, hi, count = float(raw["min"]), float(raw["max"]), int(raw["count"])
        spacing = raw.get("spacing", "linear")
        if spacing == "linear":
            return np.linspace(lo, hi, count)
        if spacing == "log":
            return np.geomspace(lo, hi, count)
        raise RunFileError("spacing must be 'linear' or 'log'")
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise RunFileError(f"{name} must be a non-empty array")
    return arr


def _exp_analytic_table(spec: ProblemSpec, params: dict, out: _Output) -> ExperimentResult:
    d = derive(spec)
    z = _axis(params["z"], "z")
    t = _axis(params["t"], "t")
    if params.get("grid", False):
        zz, tt = np.meshgrid(z, t, indexing="ij")
        z, t = zz.ravel(), tt.ravel()
    elif z.size != t.size:
        raise RunFileError("aligned mode needs z and t of equal length; set grid=true for a product")
    cols = analytic.batch_table(d, z, t)
    header = list(cols)
    rows = zip(*(cols[h] for h in header))
    out.write_csv("analytic.csv", header, rows)
    return ExperimentResult(summary={"points": int(np.size(z))})


# -------------------------------- simulate --------------------------------- #


def _sim_config(params: dict) -> SimConfig:
    return SimConfig(
        n_paths=int(params["n_paths"]),
        dt=float(params["dt"]),
        horizon=float(params["horizon"]),
        master_seed=int(params["master_seed"]),
        bridge_correction=bool(params.get("bridge_correction", True)),
    )


def _candidate_sign(policy: CouplingPolicy) -> str | None:
    if isinstance(policy, Mirror):
        return "plus"
    if isinstance(policy, Synchronous):
        return "minus"
    return None


def _exp_simulate(spec: ProblemSpec, params: dict, out: _Output) -> ExperimentResult:
    d = derive(spec)
    policy = policy_from_json(params["policy"])
    cfg = _sim_config(params)
    res = simulate_tau(d, policy, cfg)
    sign = _candidate_sign(policy)

    times = params.get("survival_times")
    if times is None:
        times = [cfg.horizon / 4, cfg.horizon / 2, cfg.horizon]
    rows = []
    last = None
    for T in times:
        est = estimate_survival(res, float(T))
        ref = float(analytic.phi(d, float(T), sign)) if sign and d.z0 > 0 else math.nan
        rows.append((T, est.mean, est.std_error, ref))
        last = est
    out.write_csv("survival.csv", ["T", "survival", "std_error", "analytic"], rows)

    summary = {"policy": policy.name, "survival_at_horizon": last.mean if last else math.nan}
    qs = params.get("laplace_qs", [])
    if qs:
        rows = []
        for q in qs:
            br = estimate_laplace(res, float(q))
            ref = analytic.psi(d, float(q), sign).value if sign else math.nan
            rows.append((q, br.low.mean, br.low.std_error, br.high.mean, br.high.std_error, ref))
        out.write_csv(
            "laplace.csv", ["q", "low", "low_se", "high", "high_se", "analytic"], rows
        )
    grid = params.get("ergodic_grid")
    if grid:
        erg = estimate_ergodic(res, np.asarray(grid, dtype=float))
        out.write_csv(
            "ergodic.csv",
            ["t", "survival"],
            zip(erg.grid, erg.grid_survival),
        )
        summary["ergodic_tail"] = erg.tail.mean
        summary["ergodic_time_average"] = erg.time_average
    tail_grid = params.get("tail_grid")
    if tail_grid:
        fit = tail_rate_regression(d, policy, np.asarray(tail_grid, dtype=float), cfg)
        out.write_csv(
            "tail.csv",
            ["t", "log_survival", "log_variance"],
            zip(fit.times, fit.log_survival, fit.log_variance),
        )
        summary["tail_rate"] = fit.rate
        summary["tail_rate_se"] = fit.std_error
    if params.get("dump_hits", False):
        out.write_bytes("hits.bin", res.hit_times.astype("<f8").tobytes())
    return ExperimentResult(summary=summary)


# ----------------------------------- hjb ----------------------------------- #


def _exp_hjb(spec: ProblemSpec, params: dict, out: _Output) -> ExperimentResult:
    d = derive(spec)
    sign = params["sign"]
    T = float(params["T"])
    grid = hjb.GridSpec(
        n_z=int(params["n_z"]),
        n_t=int(params["n_t"]),
        z_max=float(params["z_max"]) if "z_max" in params else None,
        boundary_mode=params.get("boundary_mode", "analytic-mirror"),
    )
    surf = hjb.solve(d, sign, T, grid)
    rows = (
        (surf.z_axis[i], surf.s_axis[j], surf.values[j, i], int(surf.controls[j, i]))
        for j in range(surf.s_axis.size)
        for i in range(surf.z_axis.size)
    )
    out.write_csv("surface.csv", ["z", "t", "F", "c"], rows)
    failures = []
    summary = {"sign": sign, "T": T, "F_at_start": surf.value_at(d.z0) if d.z0 > 0 else 0.0}
    if params.get("gap", True) and d.z0 > 0:
        rep = hjb.gap_report(d, sign, T, grid)
        out.write_json("gap.json", vars(rep).copy())
        summary.update(gap=rep.gap, gap_error=rep.error_estimate, verdict=rep.classifier_verdict)
        if not rep.consistent:
            failures.append(
                f"gap report inconsistent: classifier={rep.classifier_verdict} "
                f"gap={rep.gap:.3g} error={rep.error_estimate:.3g}"
            )
    return ExperimentResult(summary=summary, failures=failures)


# ------------------------- reproduce: discounted --------------------------- #


def _random_switching_policies(d, sign, horizon, count, master_seed) -> list[Switching]:
    sig = abs(d.sigma_plus)
    z_hi = d.z0 + sig * math.sqrt(horizon)
    policies = []
    for i in range(count):
        u, v = rng.step_uniforms(master_seed, np.arange(2, dtype=np.uint64), np.uint64(i), rng.DOMAIN_POLICY)
        zc = (0.15 + 0.7 * u[0]) * z_hi
        tc = (0.15 + 0.7 * u[1]) * horizon
        rz = (0.2 + 0.5 * v[0]) * 0.45 * zc
        rt = (0.2 + 0.5 * v[1]) * 0.45 * min(tc, horizon - tc)
        policies.append(switching_policy(d, sign, (zc, tc), (rz, rt)))
    return policies


def _exp_discounted(spec: ProblemSpec, params: dict, out: _Output) -> ExperimentResult:
    d = derive(spec)
    qs = [float(q) for q in params["qs"]]
    cfg = _sim_config(params)
    constants = params.get("constants", [-0.5, 0.0, 0.5])
    n_sw = int(params.get("n_switching", 3))
    policies: list[CouplingPolicy] = [Mirror(), Synchronous()]
    policies += [Constant(float(c)) for c in constants]
    policies += _random_switching_policies(d, "plus", cfg.horizon, n_sw, cfg.master_seed)

    results = {p.name + f"#{i}": simulate_tau(d, p, cfg) for i, p in enumerate(policies)}
    failures = []
    rows = []
    mirror_key = next(iter(results))
    for q in qs:
        psi_val = analytic.psi(d, q, "plus").value
        mirror_br = estimate_laplace(results[mirror_key], q)
        lo_ok = mirror_br.low.mean - 3 * mirror_br.low.std_error <= psi_val
        hi_ok = psi_val <= mirror_br.high.mean + 3 * mirror_br.high.std_error
        if not (lo_ok and hi_ok):
            failures.append(f"mirror bracket misses analytic value at q={q:g}")
        for key, res in results.items():
            br = estimate_laplace(res, q)
            joint = math.hypot(mirror_br.low.std_error, br.high.std_error)
            dominated = mirror_br.low.mean - br.high.mean >= -3.0 * joint
            if not dominated:
                failures.append(f"policy {key} beats mirror at q={q:g}")
            rows.append(
                (key.split("#")[0], q, br.low.mean, br.low.std_error, br.high.mean, br.high.std_error, psi_val, dominated)
            )
    out.write_csv(
        "discounted.csv",
        ["policy", "q", "low", "low_se", "high", "high_se", "psi_mirror", "mirror_dominates"],
        rows,
    )
    return ExperimentResult(summary={"n_policies": len(policies), "qs": len(qs)}, failures=failures)


# ------------------------- reproduce: finite horizon ------------------------ #


def _exp_finite(spec: ProblemSpec, params: dict, out: _Output) -> ExperimentResult:
    d = derive(spec)
    T = float(params["T"])
    cfg = SimConfig(
        n_paths=int(params["n_paths"]),
        dt=float(params["dt"]),
        horizon=T,
        master_seed=int(params["master_seed"]),
    )
    verdict = classify_finite_horizon(d, "plus", T)
    if "box_center" in params:
        box = (tuple(map(float, params["box_center"])), tuple(map(float, params["box_half_widths"])))
    else:
        box = analytic.find_negative_mixed_box(d, "plus", T) if d.sigma_plus != 0 else None

    mirror_res = simulate_tau(d, Mirror(), cfg)
    surv_mirror = estimate_survival(mirror_res, T)
    doc = {
        "T": T,
        "classifier": vars(verdict).copy(),
        "mirror_survival": surv_mirror.mean,
        "mirror_survival_se": surv_mirror.std_error,
        "analytic_phi": float(analytic.phi(d, T, "plus")),
        "box": None,
        "switching": None,
    }
    failures = []
    beats = None
    if box is not None:
        policy = switching_policy(d, "plus", box[0], box[1])
        sw_res = simulate_tau(d, policy, cfg)
        surv_sw = estimate_survival(sw_res, T)
        diff = (mirror_res.hit_times > T).astype(np.float64) - (sw_res.hit_times > T).astype(np.float64)
        gain = float(diff.mean())
        se_paired = float(diff.std(ddof=1) / math.sqrt(diff.size))
        beats = gain > 3.0 * se_paired
        doc["box"] = {"center": list(box[0]), "half_widths": list(box[1])}
        doc["switching"] = {
            "survival": surv_sw.mean,
            "survival_se": surv_sw.std_error,
            "gain_over_mirror": gain,
            "gain_se_paired": se_paired,
            "beats_mirror_3se": beats,
        }
        if verdict.verdict == "suboptimal" and not beats:
            failures.append("classifier says suboptimal but switching does not beat mirror at 3 sigma")
        if verdict.verdict == "optimal" and beats:
            failures.append("classifier says optimal but switching beats mirror at 3 sigma")
    elif verdict.verdict == "suboptimal" and d.sigma_plus != 0:
        failures.append("classifier says suboptimal but no negative mixed-derivative box was found")

    rep = hjb.gap_report(
        d,
        "plus",
        T,
        hjb.GridSpec(
            n_z=int(params.get("hjb_n_z", 512)),
            n_t=int(params.get("hjb_n_t", 8192)),
            z_max=float(params["hjb_z_max"]) if "hjb_z_max" in params else None,
        ),
    )
    doc["gap_report"] = vars(rep).copy()
    if not rep.consistent:
        failures.append("hjb gap report inconsistent with classifier")
    out.write_json("finite.json", doc)
    summary = {
        "verdict": verdict.verdict,
        "gap": rep.gap,
        "gap_error": rep.error_estimate,
        "switching_beats_mirror": "" if beats is None else beats,
    }
    return ExperimentResult(summary=summary, failures=failures)


# --------------------------- reproduce: efficiency -------------------------- #


def _snap_grid(lo: float, hi: float, count: int, dt: float) -> np.ndarray:
    g = np.geomspace(lo, hi, count)
    g = np.unique(np.maximum(np.round(g / dt), 1).astype(np.int64))
    return g.astype(np.float64) * dt


def _exp_efficiency(spec: ProblemSpec, params: dict, out: _Output) -> ExperimentResult:
    d = derive(spec)
    rates = analytic.tail_rates(d)
    n_paths = int(params["n_paths"])
    seed = int(params["master_seed"])
    points = int(params.get("grid_points", 8))
    failures = []
    rows = []
    fits = {}
    for policy, theory in ((Mirror(), rates.rate_mirror), (Synchronous(), rates.rate_sync)):
        if "t_max" in params:
            t_max = float(params["t_max"])
        elif math.isfinite(theory) and theory < 0:
            t_max = 50.0 / abs(theory)
        elif math.isinf(theory):
            t_max = 4.0 * d.z0 / d.mu
        else:
            t_max = 40.0
        dt = float(params.get("dt", t_max / 1600.0))
        grid = _snap_grid(t_max / 4.0, t_max, points, dt)
        cfg = SimConfig(
            n_paths=n_paths,
            dt=dt,
            horizon=float(np.round(grid[-1] / dt) * dt),
            master_seed=seed,
        )
        gap = params.get("max_level_gap")
        fit = tail_rate_regression(d, policy, grid, cfg, max_level_gap=gap)
        fits[policy.name] = fit
        if math.isinf(theory):
            matches = fit.insufficient
        elif theory < 0:
            matches = abs(fit.rate - theory) <= 0.1 * abs(theory)
        else:
            matches = abs(fit.rate) <= max(5 * fit.std_error, 1e-3)
        if not matches:
            failures.append(
                f"{policy.name} tail rate {fit.rate:.5g} does not match theory {theory:.5g} within 10%"
            )
        rows.append((policy.name, fit.rate, fit.std_error, theory, fit.n_points, fit.insufficient))
    out.write_csv(
        "efficiency.csv",
        ["policy", "fitted_rate", "std_error", "theory_rate", "n_points", "insufficient"],
        rows,
    )
    verdict_doc = {
        "mu": d.mu,
        "rate_mirror": rates.rate_mirror,
        "rate_sync": rates.rate_sync,
        "mirror_efficient_for_min": rates.efficient_plus,
        "sync_efficient_for_max": rates.efficient_minus,
        "verdict": "efficient" if rates.efficient_plus else "NOT efficient",
        "conjectured_efficient_min": rates.conjectured_efficient_plus,
        "conjectured_efficient_max": rates.conjectured_efficient_minus,
    }
    out.write_json("efficiency.json", verdict_doc)
    summary = {
        "rate_mirror": fits["mirror"].rate,
        "rate_sync": fits["synchronous"].rate,
        "verdict": verdict_doc["verdict"],
    }
    return ExperimentResult(summary=summary, failures=failures)


# --------------------------- reproduce: stationary -------------------------- #


def _exp_stationary(spec: ProblemSpec, params: dict, out: _Output) -> ExperimentResult:
    d = derive(spec)
    n_paths = int(params["n_paths"])
    seed = int(params["master_seed"])
    horizon = float(params.get("horizon", 50.0 / max(abs(d.mu), 0.2)))
    dt = float(params.get("dt", horizon / 3200.0))
    horizon = round(horizon / dt) * dt
    cfg = SimConfig(n_paths=n_paths, dt=dt, horizon=horizon, master_seed=seed)
    n_extra = int(params.get("n_extra_policies", 3))
    policies: list[CouplingPolicy] = [Mirror(), Synchronous(), Constant(0.0), Constant(-0.5)]
    policies += _random_switching_policies(d, "plus", horizon, max(n_extra - 2, 0), seed)
    policies = policies[: 2 + n_extra]
    grid = np.linspace(horizon / 20.0, horizon, 20)
    failures = []
    rows = []
    tails = {}
    for p in policies:
        res = simulate_tau(d, p, cfg)
        erg = estimate_ergodic(res, grid)
        sign = _candidate_sign(p)
        limit = analytic.phi_limit(d, sign) if sign else math.nan
        rows.append((p.name, erg.tail.mean, erg.tail.std_error, erg.time_average, limit))
        tails[p.name] = erg
        if d.mu > 0 and erg.tail.mean > 1e-3:
            failures.append(f"{p.name}: stationary estimate {erg.tail.mean:.2e} above 1e-3 despite mu > 0")
        if sign is not None and d.z0 > 0:
            # the estimator's exact target is survival at the horizon; the
            # reported limit differs from it only by the residual tail mass
            expected = float(analytic.phi(d, horizon, sign))
            slack = 3.0 * max(erg.tail.std_error, 1e-6)
            if abs(erg.tail.mean - expected) > slack:
                failures.append(
                    f"{p.name}: stationary estimate {erg.tail.mean:.4g} vs survival at horizon {expected:.4g}"
                )
    out.write_csv(
        "stationary.csv",
        ["policy", "tail_estimate", "std_error", "time_average", "analytic_limit"],
        rows,
    )
    summary = {
        "mirror_tail": tails["mirror"].tail.mean,
        "sync_tail": tails["synchronous"].tail.mean,
        "horizon": horizon,
    }
    return ExperimentResult(summary=summary, failures=failures)


# ---------------------------------- sweep ---------------------------------- #


_SWEEP_BASE_COLUMNS = frozenset(
    ("row", "x", "y", "a1", "a2", "sigma1", "sigma2", "mu", "sigma_plus", "sigma_minus", "z0", "swapped", "status")
)

_RUNNERS = {
    "derive": _exp_derive,
    "analytic-table": _exp_analytic_table,
    "simulate": _exp_simulate,
    "hjb": _exp_hjb,
    "reproduce-theorem-discounted": _exp_discounted,
    "reproduce-theorem-finite": _exp_finite,
    "reproduce-efficiency": _exp_efficiency,
    "reproduce-stationary": _exp_stationary,
}


def _exp_sweep(params: dict, out: _Output) -> ExperimentResult:
    inner = params["experiment"]
    inner_params = params.get("params", {})
    runner = _RUNNERS[inner]
    rows = []
    all_failures = []
    summary_keys: list[str] = []
    results = []
    for i, spec_obj in enumerate(params["specs"]):
        spec = ProblemSpec.from_json(spec_obj)
        d = derive(spec)
        sub = _Output(out.dir / f"row_{i:03d}")
        try:
            res = runner(spec, inner_params, sub)
            status = "fail" if res.failures else "ok"
        except Exception as exc:  # row-level input/consistency error
            res = ExperimentResult(failures=[f"error: {exc}"])
            status = "error"
        out.artifacts.update({f"row_{i:03d}/{k}": v for k, v in sub.artifacts.items()})
        for key in res.summary:
            if key not in summary_keys and key not in _SWEEP_BASE_COLUMNS:
                summary_keys.append(key)
        results.append((i, spec, d, status, res))
        all_failures.extend(f"row {i}: {msg}" for msg in res.failures)
    for i, spec, d, status, res in results:
        rows.append(
            (
                i,
                spec.x,
                spec.y,
                spec.a1,
                spec.a2,
                spec.sigma1,
                spec.sigma2,
                d.mu,
                d.sigma_plus,
                d.sigma_minus,
                d.z0,
                d.swapped,
                status,
                *(res.summary.get(k, "") for k in summary_keys),
            )
        )
    header = [
        "row",
        "x",
        "y",
        "a1",
        "a2",
        "sigma1",
        "sigma2",
        "mu",
        "sigma_plus",
        "sigma_minus",
        "z0",
        "swapped",
        "status",
        *summary_keys,
    ]
    out.write_csv("sweep.csv", header, rows)
    return ExperimentResult(summary={"rows": len(rows)}, failures=all_failures)


def run(run_file: RunFile, out_dir: str | Path, threads: int = 1, verbose: bool = False) -> int:
    """Execute a run file; returns the process exit status.

    0: success.  2: the experiment ran but a consistency check failed.
    Input errors raise RunFileError (the CLI maps them to status 1).
    """
    t0 = time.perf_counter()
    eff_threads = set_workers(threads)
    out = _Output(Path(out_dir))
    if run_file.experiment == "sweep":
        result = _exp_sweep(run_file.params, out)
    else:
        runner = _RUNNERS[run_file.experiment]
        result = runner(run_file.spec, run_file.params, out)
    manifest = {
        "run_file": run_file.raw,
        "experiment": run_file.experiment,
        "versions": {
            "gbmcouple": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
        "threads_requested": threads,
        "threads_effective": eff_threads,
        "wall_time_s": time.perf_counter() - t0,
        "failures": result.failures,
        "summary": result.summary,
        "artifacts": out.artifacts,
    }
    out.write_json("manifest.json", manifest)
    if verbose:
        for name in out.artifacts:
            print(f"wrote {out.dir / name}")
        for msg in result.failures:
            print(f"FAIL: {msg}")
    return 2 if result.failures else 0
