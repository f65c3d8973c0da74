"""Closed-form values, survival probabilities, and their derivatives.

Everything here reduces to the first-passage problem of a Brownian motion
with drift.  Write z = log(x/y) >= 0, sigma = |sigma2 -+ sigma1| for the
candidate coupling, and mu for the drift gap.  The survival probability
of the coupling time is the reflection formula

    h(z, s) = N((z - mu s)/(sigma sqrt(s)))
              - exp(2 mu z / sigma^2) N((-z - mu s)/(sigma sqrt(s))),

and the discounted value is exp(-k z) with k the positive root of
(sigma^2/2) k^2 + mu k = q.  The product exp(.) * N(.) is always formed
in log space so the far-tail regime neither overflows nor underflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import log_ndtr, ndtr

from .params import DerivedConstants, check_sign

__all__ = [
    "DiscountedValue",
    "TailFunction",
    "TailRate",
    "k_exponent",
    "psi",
    "phi",
    "phi_xy",
    "tail_function",
    "pde_residual_L",
    "pde_residual_A",
    "tail_rates",
    "normal_bounds_check",
    "phi_limit",
    "laplace_consistency_residual",
    "find_negative_mixed_box",
    "batch_table",
]

_SQRT2PI = math.sqrt(2.0 * math.pi)


def _npdf(w):
    return np.exp(-0.5 * np.square(w)) / _SQRT2PI


def k_exponent(d: DerivedConstants, q: float, sign: str) -> float:
    """Decay exponent of the discounted value in z.

    Positive root of (sigma^2/2) k^2 + mu k - q = 0 when sigma != 0,
    written to avoid cancellation for large positive mu/sigma^2; q/mu in
    the zero-volatility case (which requires mu > 0); +inf when the
    coupling never happens.
    """
    if q <= 0:
        raise ValueError("discount rate q must be positive")
    sig = d.sigma(sign)
    if sig == 0.0:
        if d.mu > 0:
            return q / d.mu
        return math.inf
    s2 = sig * sig
    m = d.mu / s2
    disc = math.sqrt(m * m + 2.0 * q / s2)
    if m > 0:
        return (2.0 * q / s2) / (disc + m)
    return disc - m


@dataclass(frozen=True)
class DiscountedValue:
    """Laplace transform E[exp(-q tau)] of the candidate coupling time."""

    q: float
    k_plus: float
    k_minus: float
    value: float
    degenerate: bool = False


def psi(d: DerivedConstants, q: float, sign: str) -> DiscountedValue:
    """Discounted value of the mirror (plus) or synchronous (minus) coupling.

    Equals (y/x)^k = exp(-k z0).  In the degenerate regime (synchronous
    with equal volatilities and mu <= 0) the coupling time is a.s.
    infinite and the value is the indicator of z0 = 0, reported with
    ``degenerate=True`` instead of through the formula.
    """
    check_sign(sign)
    kp = k_exponent(d, q, "plus")
    km = k_exponent(d, q, "minus")
    k = kp if sign == "plus" else km
    if math.isinf(k):
        value = 1.0 if d.z0 == 0.0 else 0.0
        return DiscountedValue(q, kp, km, value, degenerate=True)
    return DiscountedValue(q, kp, km, math.exp(-k * d.z0))


# --------------------- survival probability h and partials ----------------- #


def _h_pieces(d: DerivedConstants, z, t, sign: str):
    """Common sub-expressions: n(w1) and Q = exp(2 mu z / sigma^2) N(w2)."""
    sig = abs(d.sigma(sign))
    mu = d.mu
    rt = np.sqrt(t)
    den = sig * rt
    w1 = (z - mu * t) / den
    w2 = (-z - mu * t) / den
    expo = 2.0 * mu * z / (sig * sig)
    big_q = np.exp(expo + log_ndtr(w2))
    return sig, w1, w2, big_q


def _require_formula_branch(d: DerivedConstants, sign: str) -> float:
    sig = d.sigma(sign)
    if sig == 0.0:
        raise ValueError("combined volatility is zero for this sign; no smooth formula branch")
    return abs(sig)


def _validate_zt(z, t):
    z = np.asarray(z, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t <= 0):
        raise ValueError("time must be positive")
    if np.any(z < 0):
        raise ValueError("z must be nonnegative")
    return z, t


def phi(d: DerivedConstants, t, sign: str, z=None):
    """Survival probability P(coupling time > t) of the candidate coupling.

    Vectorized over ``t`` (and over ``z``, defaulting to the reduced
    start z0).  The synchronous coupling with equal volatilities has no
    diffusion: survival is the indicator of t*mu < z when mu > 0 and is
    identically 1 on z > 0 otherwise.
    """
    check_sign(sign)
    if z is None:
        z = d.z0
    z, t = _validate_zt(z, t)
    z, t = np.broadcast_arrays(z, t)
    sig = d.sigma(sign)
    if sig == 0.0:
        if d.mu > 0:
            out = np.where(t * d.mu < z, 1.0, 0.0)
        else:
            out = np.where(z > 0, 1.0, 0.0)
        out = np.where(z == 0.0, 0.0, out)
        return out if out.ndim else float(out)
    _, w1, _, big_q = _h_pieces(d, z, t, sign)
    out = np.clip(ndtr(w1) - big_q, 0.0, 1.0)
    out = np.where(z == 0.0, 0.0, out)
    return out if out.ndim else float(out)


def _h_z(d, z, t, sign):
    sig, w1, _, big_q = _h_pieces(d, z, t, sign)
    return 2.0 / (sig * np.sqrt(t)) * _npdf(w1) - (2.0 * d.mu / sig**2) * big_q


def _h_zz(d, z, t, sign):
    sig, w1, _, big_q = _h_pieces(d, z, t, sign)
    return (4.0 * t * d.mu - 2.0 * z) / (sig * np.sqrt(t)) ** 3 * _npdf(w1) - (
        4.0 * d.mu**2 / sig**4
    ) * big_q


def _h_s(d, z, t, sign):
    sig, w1, _, _ = _h_pieces(d, z, t, sign)
    return -z / (sig * t**1.5) * _npdf(w1)


@dataclass(frozen=True)
class TailFunction:
    """Survival probability of one candidate coupling in reduced
    coordinates, with its closed-form partial derivatives."""

    d: DerivedConstants
    sign: str

    def value(self, z, t):
        return phi(self.d, t, self.sign, z=z)

    def dz(self, z, t):
        z, t = _validate_zt(z, t)
        _require_formula_branch(self.d, self.sign)
        return _h_z(self.d, z, t, self.sign)

    def dzz(self, z, t):
        z, t = _validate_zt(z, t)
        _require_formula_branch(self.d, self.sign)
        return _h_zz(self.d, z, t, self.sign)

    def ds(self, z, t):
        z, t = _validate_zt(z, t)
        _require_formula_branch(self.d, self.sign)
        return _h_s(self.d, z, t, self.sign)


def tail_function(d: DerivedConstants, sign: str) -> TailFunction:
    check_sign(sign)
    return TailFunction(d, sign)


def phi_xy(d: DerivedConstants, t, sign: str, z=None):
    """Mixed derivative of the survival probability, scaled by x*y.

    Returns -h_zz(z, t), which carries the sign of the mixed (x, y)
    derivative itself; its sign decides whether the candidate coupling is
    optimal at finite horizons.
    """
    check_sign(sign)
    _require_formula_branch(d, sign)
    if z is None:
        z = d.z0
    z, t = _validate_zt(z, t)
    if np.any(z <= 0):
        raise ValueError("z must be positive")
    out = -_h_zz(d, z, t, sign)
    return out if np.ndim(out) else float(out)


# ------------------------------ PDE residuals ------------------------------ #


def pde_residual_L(d: DerivedConstants, q: float, sign: str, x: float, y: float) -> float:
    """Discounted-problem generator applied to the closed-form value.

    Assembles a1 x f_x + a2 y f_y + (sigma1^2/2) x^2 f_xx
    + (sigma2^2/2) y^2 f_yy -+ sigma1 sigma2 x y f_xy - q f from the
    closed-form partials of f = (y/x)^k; vanishes up to rounding.
    Coordinates are those of the reduced (post-swap) spec.
    """
    check_sign(sign)
    if not (x > y > 0):
        raise ValueError("(x, y) must lie in the interior x > y > 0")
    if d.sigma(sign) == 0.0 and d.mu <= 0:
        raise ValueError("degenerate regime: coupling time a.s. infinite")
    k = k_exponent(d, q, sign)
    s = d.spec
    val = (y / x) ** k
    f_x = -(k / x) * val
    f_y = (k / y) * val
    f_xx = k * (k + 1.0) / x**2 * val
    f_yy = k * (k - 1.0) / y**2 * val
    f_xy = -(k * k) / (x * y) * val
    cross = -1.0 if sign == "plus" else 1.0
    return (
        s.a1 * x * f_x
        + s.a2 * y * f_y
        + 0.5 * s.sigma1**2 * x**2 * f_xx
        + 0.5 * s.sigma2**2 * y**2 * f_yy
        + cross * s.sigma1 * s.sigma2 * x * y * f_xy
        - q * val
    )


def pde_residual_A(d: DerivedConstants, sign: str, z, t):
    """Finite-horizon generator applied to the closed-form survival.

    In reduced coordinates the operator is (sigma^2/2) d_zz - mu d_z - d_s;
    each term is evaluated from its own closed form, so the residual
    measures only transcription and rounding error.
    """
    check_sign(sign)
    sig = _require_formula_branch(d, sign)
    z, t = _validate_zt(z, t)
    if np.any(z <= 0):
        raise ValueError("z must be positive")
    res = 0.5 * sig**2 * _h_zz(d, z, t, sign) - d.mu * _h_z(d, z, t, sign) - _h_s(d, z, t, sign)
    return res if np.ndim(res) else float(res)


# ------------------------- tail rates and efficiency ----------------------- #


@dataclass(frozen=True)
class TailRate:
    """Exponential decay rates (1/t) log P(tau > t) of the two candidates.

    A rate of -inf marks a deterministic finite coupling time; 0 marks
    positive probability of never coupling (or sub-exponential decay at
    mu = 0).  ``efficient_*`` says whether the candidate attains the best
    possible decay rate for its problem; when it does not, the
    conjectured efficient policy is the opposite coupling.
    """

    rate_mirror: float
    rate_sync: float
    efficient_plus: bool
    efficient_minus: bool
    conjectured_efficient_plus: str
    conjectured_efficient_minus: str


def _decay_rate(mu: float, sig: float) -> float:
    if mu > 0:
        if sig == 0.0:
            return -math.inf
        return -(mu * mu) / (2.0 * sig * sig)
    return 0.0


def tail_rates(d: DerivedConstants) -> TailRate:
    if d.z0 <= 0:
        raise ValueError("tail rates require distinct starting points (z0 > 0)")
    rm = _decay_rate(d.mu, abs(d.sigma_plus))
    rs = _decay_rate(d.mu, abs(d.sigma_minus))
    not_eff = d.mu > 0
    return TailRate(
        rate_mirror=rm,
        rate_sync=rs,
        efficient_plus=not not_eff,
        efficient_minus=not not_eff,
        conjectured_efficient_plus="synchronous" if not_eff else "mirror",
        conjectured_efficient_minus="mirror" if not_eff else "synchronous",
    )


def normal_bounds_check(alpha: float):
    """Gaussian tail bounds (lower, N(-alpha), upper) for alpha > 0.

    lower = alpha/(1+alpha^2) n(alpha) and upper = n(alpha)/alpha; the
    ordering is strict for every positive alpha.
    """
    alpha = float(alpha)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    dens = math.exp(-0.5 * alpha * alpha) / _SQRT2PI
    lower = alpha / (1.0 + alpha * alpha) * dens
    value = float(ndtr(-alpha))
    upper = dens / alpha
    return lower, value, upper


def phi_limit(d: DerivedConstants, sign: str) -> float:
    """t -> infinity limit of the candidate's survival probability,
    i.e. the probability of never coupling."""
    check_sign(sign)
    if d.z0 == 0.0:
        return 0.0
    sig = d.sigma(sign)
    if sig == 0.0:
        return 0.0 if d.mu > 0 else 1.0
    if d.mu >= 0:
        return 0.0
    return -math.expm1(2.0 * d.mu * d.z0 / (sig * sig))


def laplace_consistency_residual(d: DerivedConstants, q: float, sign: str) -> float:
    """Residual of the identity E[e^{-q tau}] = 1 - q * Int e^{-q t} P(tau > t) dt.

    The integral is truncated where q*t = 40 (integrand below double
    precision beyond) and computed adaptively.
    """
    check_sign(sign)
    if q <= 0:
        raise ValueError("q must be positive")
    t_max = 40.0 / q
    points = None
    sig = d.sigma(sign)
    if sig == 0.0 and d.mu > 0 and d.z0 / d.mu < t_max:
        points = [d.z0 / d.mu]

    def integrand(t):
        return math.exp(-q * t) * phi(d, t, sign)

    integral, _ = quad(integrand, 0.0, t_max, points=points, limit=300, epsabs=1e-13, epsrel=1e-11)
    return psi(d, q, sign).value - (1.0 - q * integral)


def find_negative_mixed_box(
    d: DerivedConstants, sign: str, T: float, n_z: int = 96, n_t: int = 48
) -> tuple[tuple[float, float], tuple[float, float]] | None:
    """Locate a wall-clock box for a beating perturbation at horizon T.

    The mixed derivative phi_xy(z, theta) takes the time-to-go theta; a
    switching perturbation run over wall times t improves on the
    candidate exactly when phi_xy is negative at theta = T - t.  This
    scans (z, theta) over (0, z0 + 2 sigma sqrt(T)) x (0, T), certifies
    the fattest axis-aligned box it can (doubled box interior, phi_xy < 0
    on a verification sample), and returns (center, half_widths) with
    the time coordinate already converted to wall clock, ready for
    ``switching_policy``.  Returns None when the scan finds no negative
    value (the candidate coupling is then optimal at this horizon).
    """
    check_sign(sign)
    sig = _require_formula_branch(d, sign)
    z_top = d.z0 + 2.0 * sig * math.sqrt(T)
    zs = np.linspace(z_top / n_z, z_top, n_z)
    thetas = np.linspace(0.04 * T, 0.96 * T, n_t)
    zz, hh = np.meshgrid(zs, thetas, indexing="ij")
    neg = phi_xy(d, hh.ravel(), sign, z=zz.ravel()).reshape(zz.shape) < 0
    if not np.any(neg):
        return None
    # contiguous negative run upward from the barrier, per theta column
    run = np.argmin(np.vstack([neg, np.zeros((1, n_t), dtype=bool)]), axis=0)
    extents = np.where(run > 0, zs[np.maximum(run - 1, 0)], 0.0)
    best = float(np.max(extents))
    if best <= 0:
        return None
    # widest theta window over which the negative reach stays comparable
    good = extents >= 0.9 * best
    j = int(np.argmax(extents))
    j_lo = j
    while j_lo > 0 and good[j_lo - 1]:
        j_lo -= 1
    j_hi = j
    while j_hi < n_t - 1 and good[j_hi + 1]:
        j_hi += 1
    zc = 0.9 * best / 2.0
    th_c = (thetas[j_lo] + thetas[j_hi]) / 2.0
    rz = 0.45 * zc
    rt = min(0.45 * (thetas[j_hi] - thetas[j_lo]) / 2.0, 0.45 * th_c, 0.45 * (T - th_c))
    for _ in range(14):
        ok = zc - 2 * rz > 0 and th_c - 2 * rt > 0 and th_c + 2 * rt < T and rz > 0 and rt > 0
        if ok:
            z_probe = np.linspace(zc - 2 * rz, zc + 2 * rz, 7)
            th_probe = np.linspace(th_c - 2 * rt, th_c + 2 * rt, 7)
            zp, hp = np.meshgrid(z_probe, th_probe, indexing="ij")
            if np.all(phi_xy(d, hp.ravel(), sign, z=zp.ravel()) < 0):
                return (zc, T - th_c), (rz, rt)
        zc *= 0.75
        rz *= 0.7
        rt *= 0.8
    return None


def batch_table(d: DerivedConstants, z, t) -> dict[str, np.ndarray]:
    """Aligned closed-form columns over arrays of (z, t) points.

    Columns without a formula branch (zero combined volatility, or the
    mixed derivative at z = 0) are filled with NaN.
    """
    z = np.asarray(z, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    z, t = np.broadcast_arrays(z, t)
    cols: dict[str, np.ndarray] = {"z": z.astype(float), "t": t.astype(float)}
    for sign in ("plus", "minus"):
        tag = sign
        cols[f"phi_{tag}"] = np.asarray(phi(d, t, sign, z=z), dtype=float)
        sig = d.sigma(sign)
        n = z.shape[0] if z.ndim else 1
        pxy = np.full(n, np.nan)
        res = np.full(n, np.nan)
        if sig != 0.0:
            ok = z > 0
            if np.any(ok):
                pxy[ok] = phi_xy(d, t[ok], sign, z=z[ok])
                res[ok] = pde_residual_A(d, sign, z[ok], t[ok])
        cols[f"phi_xy_{tag}"] = pxy
        cols[f"residual_A_{tag}"] = res
    return cols
