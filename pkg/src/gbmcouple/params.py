"""Problem definition, derived constants, and optimality classifiers.

Two geometric Brownian motions

    dX = X (sigma1 dB + a1 dt),   X_0 = x > 0,
    dY = Y (sigma2 dV + a2 dt),   Y_0 = y > 0,     sigma1 * sigma2 > 0,

are coupled through the choice of the driving Brownian motion V.  All
downstream numerics work on the reduced state z = log(X/Y), a Brownian
motion with drift -mu and controllable variance rate, absorbed at 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

__all__ = [
    "SpecError",
    "ProblemSpec",
    "DerivedConstants",
    "OptimalityVerdict",
    "StationaryVerdicts",
    "derive",
    "classify_finite_horizon",
    "classify_stationary",
    "Z0_EPS",
]

# Below this the start is treated as exactly on the diagonal.
Z0_EPS = 1e-12

_SPEC_FIELDS = ("x", "y", "a1", "a2", "sigma1", "sigma2")


class SpecError(ValueError):
    """Invalid problem parameters or malformed spec JSON."""


@dataclass(frozen=True)
class ProblemSpec:
    """The six parameters of the pair of geometric Brownian motions."""

    x: float
    y: float
    a1: float
    a2: float
    sigma1: float
    sigma2: float

    def __post_init__(self):
        for name in _SPEC_FIELDS:
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise SpecError(f"{name} must be a finite real number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.x <= 0 or self.y <= 0:
            raise SpecError("starting points x, y must be positive")
        if self.sigma1 * self.sigma2 <= 0:
            raise SpecError("sigma1 * sigma2 must be positive")

    def swapped(self) -> "ProblemSpec":
        """Exchange the roles of the two processes."""
        return ProblemSpec(self.y, self.x, self.a2, self.a1, self.sigma2, self.sigma1)

    def to_json(self) -> dict:
        return {name: getattr(self, name) for name in _SPEC_FIELDS}

    @classmethod
    def from_json(cls, obj) -> "ProblemSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if not isinstance(obj, dict):
            raise SpecError("spec must be a JSON object")
        unknown = set(obj) - set(_SPEC_FIELDS)
        if unknown:
            raise SpecError(f"unknown spec fields: {sorted(unknown)}")
        missing = set(_SPEC_FIELDS) - set(obj)
        if missing:
            raise SpecError(f"missing spec fields: {sorted(missing)}")
        return cls(**{k: obj[k] for k in _SPEC_FIELDS})


@dataclass(frozen=True)
class DerivedConstants:
    """Constants of the reduced problem, after the symmetry reduction.

    When x < y the two processes are exchanged before anything is
    computed (recorded in ``swapped``), so z0 = log(x/y) >= 0 always and
    the absorbing barrier sits below the start.

    mu          drift gap a2 - a1 + sigma1^2/2 - sigma2^2/2 (reduced state
                drifts at -mu)
    sigma_plus  sigma2 + sigma1 (mirror-coupling volatility of z)
    sigma_minus sigma2 - sigma1 (synchronous-coupling volatility of z)
    spec        the reduced (post-swap) parameter set
    """

    mu: float
    sigma_plus: float
    sigma_minus: float
    z0: float
    swapped: bool
    spec: ProblemSpec

    def sigma(self, sign: str) -> float:
        """Combined volatility for the requested problem sign."""
        return self.sigma_plus if check_sign(sign) == "plus" else self.sigma_minus

    def variance_rate(self, c) -> float:
        """Instantaneous variance of z under correlation control c."""
        vp2 = self.sigma_plus**2
        vm2 = self.sigma_minus**2
        return 0.5 * (vp2 + vm2) - 0.5 * (vp2 - vm2) * c

    @property
    def bad_case(self) -> bool:
        """True when the synchronous coupling never couples: sigma_minus = 0
        with mu <= 0 freezes or raises z, so the hitting time is a.s. infinite."""
        return self.sigma_minus == 0.0 and self.mu <= 0.0


def check_sign(sign: str) -> str:
    if sign not in ("plus", "minus"):
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    return sign


def derive(spec: ProblemSpec) -> DerivedConstants:
    """Reduce a problem spec to the constants every other module consumes.

    Examples: (x=2, y=1, a1=0, a2=1, sigma1=sigma2=1) gives mu = 1,
    sigma_plus = 2, sigma_minus = 0, z0 = log 2.
    """
    swapped = spec.x < spec.y
    s = spec.swapped() if swapped else spec
    mu = s.a2 - s.a1 + s.sigma1**2 / 2 - s.sigma2**2 / 2
    z0 = math.log(s.x / s.y)
    if z0 < Z0_EPS:
        z0 = 0.0
    return DerivedConstants(
        mu=mu,
        sigma_plus=s.sigma2 + s.sigma1,
        sigma_minus=s.sigma2 - s.sigma1,
        z0=z0,
        swapped=swapped,
        spec=s,
    )


@dataclass(frozen=True)
class OptimalityVerdict:
    """Machine-checkable classification of a candidate coupling.

    problem    one of "T+", "T-", "q+", "q-", "S inf", "S sup"
    candidate  "mirror" or "synchronous"
    verdict    "optimal" | "suboptimal" | "degenerate-deterministic"
    reason     tag naming the deciding condition
    value      optional attached value (stationary problems)
    """

    problem: str
    candidate: str
    verdict: str
    reason: str
    value: float | None = None


def _candidate(sign: str) -> str:
    return "mirror" if sign == "plus" else "synchronous"


def classify_finite_horizon(d: DerivedConstants, sign: str, T: float) -> OptimalityVerdict:
    """Is the mirror (sign="plus") or synchronous (sign="minus") coupling
    optimal for the survival probability at horizon T?

    mu <= 0: optimal.  mu > 0 with nonzero combined volatility:
    suboptimal for every horizon.  The synchronous coupling with
    sigma_minus = 0 and mu > 0 hits deterministically at z0/mu, so it is
    suboptimal exactly when T >= z0/mu.
    """
    check_sign(sign)
    if T <= 0:
        raise ValueError("horizon T must be positive")
    if d.z0 <= 0:
        raise ValueError("classification requires distinct starting points (z0 > 0)")
    problem = "T+" if sign == "plus" else "T-"
    cand = _candidate(sign)
    sig = d.sigma(sign)
    if sig == 0.0:
        if d.mu <= 0:
            return OptimalityVerdict(problem, cand, "degenerate-deterministic", "bad_case_tau_infinite")
        verdict = "suboptimal" if T >= d.z0 / d.mu else "optimal"
        return OptimalityVerdict(problem, cand, verdict, "sigma_pm_zero_threshold")
    if d.mu <= 0:
        return OptimalityVerdict(problem, cand, "optimal", "mu_le_zero")
    return OptimalityVerdict(problem, cand, "suboptimal", "mu_pos_sigma_nonzero")


@dataclass(frozen=True)
class StationaryVerdicts:
    inf: OptimalityVerdict
    sup: OptimalityVerdict


def classify_stationary(d: DerivedConstants) -> StationaryVerdicts:
    """Long-run time-average verdicts; always optimal for both candidates.

    The attached value is P(coupling never happens) under the candidate:
    0 whenever mu > 0 (every coupling succeeds eventually), and the
    t -> infinity survival limit otherwise.
    """
    from . import analytic  # late import; analytic depends on params

    v_inf = analytic.phi_limit(d, "plus")
    v_sup = analytic.phi_limit(d, "minus")
    reason = "mu_positive_always_couples" if d.mu > 0 else "survival_limit"
    if d.z0 == 0.0:
        reason = "zero_start_gap"
    return StationaryVerdicts(
        inf=OptimalityVerdict("S inf", "mirror", "optimal", reason, value=v_inf),
        sup=OptimalityVerdict("S sup", "synchronous", "optimal", reason, value=v_sup),
    )


def spec_with(spec: ProblemSpec, **kwargs) -> ProblemSpec:
    """Copy of a spec with some fields replaced."""
    return replace(spec, **kwargs)
