"""JSON run-file parsing and validation for the experiment runner.

A run file is a single JSON object:

    {
      "spec": {"x": .., "y": .., "a1": .., "a2": .., "sigma1": .., "sigma2": ..},
      "experiment": "<tag>",
      "params": { ... experiment-specific block ... },
      "output_dir": "out"            // optional; --out overrides
    }

Unknown keys are rejected everywhere, at the top level and inside each
parameter block, so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .params import ProblemSpec

__all__ = ["RunFileError", "RunFile", "load_run_file", "EXPERIMENTS"]

EXPERIMENTS = (
    "derive",
    "analytic-table",
    "simulate",
    "hjb",
    "reproduce-theorem-finite",
    "reproduce-theorem-discounted",
    "reproduce-efficiency",
    "reproduce-stationary",
    "sweep",
)

# Allowed keys per parameter block; values are (required, optional) sets.
_PARAM_KEYS: dict[str, tuple[set[str], set[str]]] = {
    "derive": (set(), {"T"}),
    "analytic-table": ({"z", "t"}, {"grid"}),
    "simulate": (
        {"policy", "n_paths", "dt", "horizon", "master_seed"},
        {"bridge_correction", "survival_times", "laplace_qs", "ergodic_grid", "tail_grid", "dump_hits"},
    ),
    "hjb": ({"sign", "T", "n_z", "n_t"}, {"z_max", "boundary_mode", "gap"}),
    "reproduce-theorem-finite": (
        {"T", "n_paths", "dt", "master_seed"},
        {"hjb_n_z", "hjb_n_t", "hjb_z_max", "box_center", "box_half_widths"},
    ),
    "reproduce-theorem-discounted": (
        {"qs", "n_paths", "dt", "horizon", "master_seed"},
        {"constants", "n_switching"},
    ),
    "reproduce-efficiency": (
        {"n_paths", "master_seed"},
        {"dt", "t_max", "grid_points", "max_level_gap"},
    ),
    "reproduce-stationary": (
        {"n_paths", "master_seed"},
        {"dt", "horizon", "n_extra_policies"},
    ),
    "sweep": ({"experiment", "specs", "params"}, set()),
}


class RunFileError(ValueError):
    """Malformed run file (maps to exit status 1)."""


@dataclass
class RunFile:
    spec: ProblemSpec | None
    experiment: str
    params: dict
    output_dir: str | None
    raw: dict = field(repr=False, default_factory=dict)


def _check_params(experiment: str, params: dict) -> None:
    required, optional = _PARAM_KEYS[experiment]
    unknown = set(params) - required - optional
    if unknown:
        raise RunFileError(f"unknown parameter keys for {experiment!r}: {sorted(unknown)}")
    missing = required - set(params)
    if missing:
        raise RunFileError(f"missing parameter keys for {experiment!r}: {sorted(missing)}")


def parse_run_file(obj: dict) -> RunFile:
    if not isinstance(obj, dict):
        raise RunFileError("run file must be a JSON object")
    allowed = {"spec", "experiment", "params", "output_dir"}
    unknown = set(obj) - allowed
    if unknown:
        raise RunFileError(f"unknown run-file keys: {sorted(unknown)}")
    experiment = obj.get("experiment")
    if experiment not in EXPERIMENTS:
        raise RunFileError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise RunFileError("params must be an object")
    _check_params(experiment, params)

    spec = None
    if experiment == "sweep":
        if "spec" in obj:
            raise RunFileError("sweep takes its specs inside params.specs, not a top-level spec")
        inner = params["experiment"]
        if inner not in EXPERIMENTS or inner == "sweep":
            raise RunFileError(f"sweep inner experiment must be a non-sweep tag, got {inner!r}")
        if not isinstance(params["specs"], list) or not params["specs"]:
            raise RunFileError("sweep needs a non-empty list of specs")
        inner_params = params.get("params", {})
        if not isinstance(inner_params, dict):
            raise RunFileError("sweep inner params must be an object")
        _check_params(inner, inner_params)
        for entry in params["specs"]:
            try:
                ProblemSpec.from_json(entry)
            except Exception as exc:
                raise RunFileError(f"invalid sweep spec {entry!r}: {exc}") from exc
    else:
        if "spec" not in obj:
            raise RunFileError("run file needs a spec")
        try:
            spec = ProblemSpec.from_json(obj["spec"])
        except Exception as exc:
            raise RunFileError(f"invalid spec: {exc}") from exc

    output_dir = obj.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise RunFileError("output_dir must be a string")
    return RunFile(spec=spec, experiment=experiment, params=params, output_dir=output_dir, raw=obj)


def load_run_file(path: str | Path) -> RunFile:
    p = Path(path)
    if not p.exists():
        raise RunFileError(f"run file not found: {p}")
    try:
        obj = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise RunFileError(f"run file is not valid JSON: {exc}") from exc
    return parse_run_file(obj)
