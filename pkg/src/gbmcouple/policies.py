"""Correlation-control policies for the coupling simulation.

A policy chooses, at each instant, the correlation c in [-1, 1] between
the two driving Brownian motions.  The reduced state z = log(X/Y) then
diffuses with variance rate sigma1^2 + sigma2^2 - 2 sigma1 sigma2 c:
c = -1 (mirror) maximizes it, c = +1 (synchronous) minimizes it.

Policies are small declarative objects; the simulation engine consumes a
flat numeric encoding of them so the compiled kernel and the NumPy
reference engine dispatch on identical data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import DerivedConstants, check_sign

__all__ = [
    "KIND_MIRROR",
    "KIND_SYNCHRONOUS",
    "KIND_CONSTANT",
    "KIND_SWITCHING",
    "KIND_GRID",
    "CouplingPolicy",
    "Mirror",
    "Synchronous",
    "Constant",
    "Switching",
    "GridFeedback",
    "switching_policy",
]

KIND_MIRROR = 0
KIND_SYNCHRONOUS = 1
KIND_CONSTANT = 2
KIND_SWITCHING = 3
KIND_GRID = 4

_DUMMY_BOX = np.zeros(8)
_DUMMY_GRID = np.zeros((1, 1), dtype=np.int8)


@dataclass(frozen=True)
class PolicyEncoding:
    """Flat numeric form consumed by the simulation engines."""

    kind: int
    const_c: float = 0.0
    box: np.ndarray = field(default_factory=lambda: _DUMMY_BOX)
    c_in: float = 0.0
    c_out: float = 0.0
    grid_ctrl: np.ndarray = field(default_factory=lambda: _DUMMY_GRID)
    grid_z0: float = 0.0
    grid_dz: float = 1.0
    grid_s0: float = 0.0
    grid_ds: float = 1.0
    grid_horizon: float = 0.0


class CouplingPolicy:
    """Base class; subclasses must provide ``encode`` and a ``name``."""

    stateful = False

    def encode(self) -> PolicyEncoding:
        raise NotImplementedError

    @property
    def name(self) -> str:
        raise NotImplementedError

    def initial_phase(self, n: int) -> np.ndarray:
        return np.zeros(n, dtype=np.uint8)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Mirror(CouplingPolicy):
    """c = -1 throughout: fastest diffusion of the log gap."""

    def encode(self):
        return PolicyEncoding(KIND_MIRROR)

    @property
    def name(self):
        return "mirror"

    def to_json(self):
        return {"variant": "mirror"}


@dataclass(frozen=True)
class Synchronous(CouplingPolicy):
    """c = +1 throughout: slowest diffusion of the log gap."""

    def encode(self):
        return PolicyEncoding(KIND_SYNCHRONOUS)

    @property
    def name(self):
        return "synchronous"

    def to_json(self):
        return {"variant": "synchronous"}


@dataclass(frozen=True)
class Constant(CouplingPolicy):
    c: float

    def __post_init__(self):
        if not (-1.0 <= self.c <= 1.0):
            raise ValueError("constant control must lie in [-1, 1]")

    def encode(self):
        return PolicyEncoding(KIND_CONSTANT, const_c=float(self.c))

    @property
    def name(self):
        return f"constant({self.c:g})"

    def to_json(self):
        return {"variant": "constant", "c": self.c}


@dataclass(frozen=True)
class Switching(CouplingPolicy):
    """Flip the control inside a space-time window.

    Runs ``c_out`` until the path first enters the entry box in (z, t),
    then ``c_in`` until it first leaves the exit box, then ``c_out`` for
    good.  Boxes are (z_lo, z_hi, t_lo, t_hi) with entry contained in
    exit.
    """

    entry_box: tuple[float, float, float, float]
    exit_box: tuple[float, float, float, float]
    c_in: float
    c_out: float

    stateful = True

    def __post_init__(self):
        e, x = self.entry_box, self.exit_box
        if len(e) != 4 or len(x) != 4:
            raise ValueError("boxes must be (z_lo, z_hi, t_lo, t_hi)")
        if not all(math.isfinite(v) for v in (*e, *x)):
            raise ValueError("box coordinates must be finite")
        if e[0] > e[1] or e[2] > e[3] or x[0] > x[1] or x[2] > x[3]:
            raise ValueError("box bounds out of order")
        if not (x[0] <= e[0] and e[1] <= x[1] and x[2] <= e[2] and e[3] <= x[3]):
            raise ValueError("entry box must be contained in the exit box")
        for c in (self.c_in, self.c_out):
            if not (-1.0 <= c <= 1.0):
                raise ValueError("controls must lie in [-1, 1]")

    def encode(self):
        box = np.array([*self.entry_box, *self.exit_box], dtype=np.float64)
        return PolicyEncoding(KIND_SWITCHING, box=box, c_in=float(self.c_in), c_out=float(self.c_out))

    @property
    def name(self):
        return "switching"

    def to_json(self):
        return {
            "variant": "switching",
            "entry_box": list(self.entry_box),
            "exit_box": list(self.exit_box),
            "c_in": self.c_in,
            "c_out": self.c_out,
        }


def switching_policy(
    d: DerivedConstants,
    sign: str,
    center: tuple[float, float],
    half_widths: tuple[float, float],
) -> Switching:
    """Candidate-beating perturbation around a space-time box.

    Outside the window the control is the candidate for the given
    problem sign (mirror for "plus", synchronous for "minus"); between
    first entry into the box of the given half-widths and first exit
    from the doubled box, the opposite control runs.  A zero-width box
    degenerates to the plain candidate policy.
    """
    check_sign(sign)
    zc, tc = float(center[0]), float(center[1])
    rz, rt = float(half_widths[0]), float(half_widths[1])
    if rz < 0 or rt < 0 or not all(map(math.isfinite, (zc, tc, rz, rt))):
        raise ValueError("box center and half-widths must be finite with nonnegative widths")
    if zc <= 0 or tc <= 0:
        raise ValueError("box center must have z > 0 and t > 0")
    c_out, c_in = (-1.0, 1.0) if sign == "plus" else (1.0, -1.0)
    entry = (zc - rz, zc + rz, tc - rt, tc + rt)
    exit_ = (zc - 2 * rz, zc + 2 * rz, tc - 2 * rt, tc + 2 * rt)
    return Switching(entry_box=entry, exit_box=exit_, c_in=c_in, c_out=c_out)


@dataclass(frozen=True)
class GridFeedback(CouplingPolicy):
    """Bang-bang feedback control read off a value-surface grid.

    ``controls[j, i]`` is the control at z_axis[i] with remaining time
    s_axis[j]; lookups use nearest-node semantics with s = horizon - t.
    Both axes must be uniform.
    """

    z_axis: np.ndarray
    s_axis: np.ndarray
    controls: np.ndarray
    horizon: float

    stateful = False

    def __post_init__(self):
        z = np.asarray(self.z_axis, dtype=np.float64)
        s = np.asarray(self.s_axis, dtype=np.float64)
        ctrl = np.asarray(self.controls)
        if z.ndim != 1 or s.ndim != 1 or ctrl.shape != (s.size, z.size):
            raise ValueError("controls must have shape (len(s_axis), len(z_axis))")
        for axis, name in ((z, "z_axis"), (s, "s_axis")):
            if axis.size < 2:
                raise ValueError(f"{name} needs at least two nodes")
            steps = np.diff(axis)
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
                raise ValueError(f"{name} must be uniform")
        if not np.all(np.isin(ctrl, (-1, 1))):
            raise ValueError("grid controls must be -1 or +1")
        object.__setattr__(self, "z_axis", z)
        object.__setattr__(self, "s_axis", s)
        object.__setattr__(self, "controls", ctrl.astype(np.int8))

    def encode(self):
        return PolicyEncoding(
            KIND_GRID,
            grid_ctrl=self.controls,
            grid_z0=float(self.z_axis[0]),
            grid_dz=float(self.z_axis[1] - self.z_axis[0]),
            grid_s0=float(self.s_axis[0]),
            grid_ds=float(self.s_axis[1] - self.s_axis[0]),
            grid_horizon=float(self.horizon),
        )

    @property
    def name(self):
        return "grid-feedback"

    def to_json(self):
        return {
            "variant": "grid-feedback",
            "n_z": int(self.z_axis.size),
            "n_s": int(self.s_axis.size),
            "horizon": self.horizon,
        }


def policy_from_json(obj: dict) -> CouplingPolicy:
    """Build a value policy from its JSON run-file form."""
    if not isinstance(obj, dict) or "variant" not in obj:
        raise ValueError("policy must be an object with a 'variant' field")
    variant = obj["variant"]
    rest = {k: v for k, v in obj.items() if k != "variant"}
    if variant == "mirror":
        _reject_extra(rest)
        return Mirror()
    if variant == "synchronous":
        _reject_extra(rest)
        return Synchronous()
    if variant == "constant":
        _reject_extra(rest, {"c"})
        return Constant(float(rest["c"]))
    if variant == "switching":
        _reject_extra(rest, {"entry_box", "exit_box", "c_in", "c_out"})
        return Switching(
            entry_box=tuple(map(float, rest["entry_box"])),
            exit_box=tuple(map(float, rest["exit_box"])),
            c_in=float(rest["c_in"]),
            c_out=float(rest["c_out"]),
        )
    raise ValueError(f"unknown policy variant {variant!r}")


def _reject_extra(obj: dict, allowed: set[str] = frozenset()):
    extra = set(obj) - set(allowed)
    if extra:
        raise ValueError(f"unknown policy fields: {sorted(extra)}")
    missing = set(allowed) - set(obj)
    if missing:
        raise ValueError(f"missing policy fields: {sorted(missing)}")
