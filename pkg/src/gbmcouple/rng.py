"""Counter-based random streams for reproducible parallel Monte Carlo.

Every random number consumed by the simulation engine is addressed by
``(path index, step index, domain)`` under a 64-bit master seed, via the
Philox-4x32 block cipher (10 rounds).  Because draws are looked up rather
than consumed from sequential state, any subset of paths can be advanced
on any number of workers, in any order or segmentation, and the results
are bit-identical.

Two implementations of the same primitives live here and must agree
exactly: vectorized NumPy versions (used by the reference engine and the
tests) and scalar ``@njit`` versions inlined into the compiled path
kernel.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

__all__ = [
    "DOMAIN_PATH",
    "DOMAIN_RESAMPLE",
    "DOMAIN_POLICY",
    "philox4x32",
    "split_seed",
    "step_uniforms",
    "resample_uniforms",
    "normal_inverse",
]

# Draw-purpose tags, kept in counter word 3 so distinct uses of one master
# seed never collide.
DOMAIN_PATH = 0
DOMAIN_RESAMPLE = 1
DOMAIN_POLICY = 2

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_U21 = np.uint64(21)
_U11 = np.uint64(11)
_U32 = np.uint64(32)

# 2^-53 and 2^-54: a 53-bit integer maps to a uniform strictly inside (0, 1).
_TWO_NEG53 = 2.0**-53
_TWO_NEG54 = 2.0**-54


def split_seed(master_seed: int) -> tuple[np.uint64, np.uint64]:
    """Split a 64-bit master seed into the two 32-bit Philox key words."""
    s = int(master_seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint64(s & 0xFFFFFFFF), np.uint64(s >> 32)


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox-4x32 with 10 rounds, vectorized over the counter words.

    Inputs are uint64 arrays (or scalars) holding 32-bit values; returns
    the four 32-bit output words as uint64 arrays.
    """
    c0 = np.asarray(c0, dtype=np.uint64)
    c1 = np.asarray(c1, dtype=np.uint64)
    c2 = np.asarray(c2, dtype=np.uint64)
    c3 = np.asarray(c3, dtype=np.uint64)
    k0 = np.uint64(k0)
    k1 = np.uint64(k1)
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _U32
        lo0 = p0 & _MASK32
        hi1 = p1 >> _U32
        lo1 = p1 & _MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + _W0) & _MASK32
        k1 = (k1 + _W1) & _MASK32
    return c0, c1, c2, c3


def _to_unit(hi, lo):
    # Combine a 32-bit and a 21-bit word into a 53-bit uniform in (0, 1).
    bits = (hi << _U21) | (lo >> _U11)
    return bits.astype(np.float64) * _TWO_NEG53 + _TWO_NEG54


def step_uniforms(master_seed: int, path, step, domain: int = DOMAIN_PATH):
    """Return the pair of uniforms assigned to each (path, step) address.

    The first drives the Gaussian increment, the second the in-step
    crossing test.  ``path`` may be any integer array; ``step`` is a
    scalar or an array broadcastable against it.
    """
    k0, k1 = split_seed(master_seed)
    path = np.asarray(path, dtype=np.uint64)
    step = np.asarray(step, dtype=np.uint64)
    path, step = np.broadcast_arrays(path, step)
    x0, x1, x2, x3 = philox4x32(
        path & _MASK32,
        path >> _U32,
        step,
        np.full(path.shape, np.uint64(domain), dtype=np.uint64),
        k0,
        k1,
    )
    return _to_unit(x0, x1), _to_unit(x2, x3)


def resample_uniforms(master_seed: int, level: int, count: int) -> np.ndarray:
    """Uniforms used to resample a splitting population at one level."""
    idx = np.arange(count, dtype=np.uint64)
    u, _ = step_uniforms(master_seed, idx, np.uint64(level), DOMAIN_RESAMPLE)
    return u


# --------------------- inverse normal CDF (AS 241) ------------------------ #
# Wichura's PPND16 rational approximations; relative error below 1e-15 over
# the full double range.  The NumPy and scalar versions use the identical
# operation order so they agree bit for bit.

_A = (
    3.3871328727963666080e00,
    1.3314166789178437745e02,
    1.9715909503065514427e03,
    1.3731693765509461125e04,
    4.5921953931549871457e04,
    6.7265770927008700853e04,
    3.3430575583588128105e04,
    2.5090809287301226727e03,
)
_B = (
    1.0,
    4.2313330701600911252e01,
    6.8718700749205790830e02,
    5.3941960214247511077e03,
    2.1213794301586595867e04,
    3.9307895800092710610e04,
    2.8729085735721942674e04,
    5.2264952788528545610e03,
)
_C = (
    1.42343711074968357734e00,
    4.63033784615654529590e00,
    5.76949722146069140550e00,
    3.64784832476320460504e00,
    1.27045825245236838258e00,
    2.41780725177450611770e-01,
    2.27238449892691845833e-02,
    7.74545014278341407640e-04,
)
_D = (
    1.0,
    2.05319162663775882187e00,
    1.67638483018380384940e00,
    6.89767334985100004550e-01,
    1.48103976427480074590e-01,
    1.51986665636164571966e-02,
    5.47593808499534494600e-04,
    1.05075007164441684324e-09,
)
_E = (
    6.65790464350110377720e00,
    5.46378491116411436990e00,
    1.78482653991729133580e00,
    2.96560571828504891230e-01,
    2.65321895265761230930e-02,
    1.24266094738807843860e-03,
    2.71155556874348757815e-05,
    2.01033439929228813265e-07,
)
_F = (
    1.0,
    5.99832206555887937690e-01,
    1.36929880922735805310e-01,
    1.48753612908506148525e-02,
    7.86869131145613259100e-04,
    1.84631831751005468180e-05,
    1.42151175831644588870e-07,
    2.04426310338993978564e-15,
)


def _horner(coefs, r):
    acc = coefs[7]
    for i in range(6, -1, -1):
        acc = acc * r + coefs[i]
    return acc


def normal_inverse(p):
    """Inverse standard normal CDF, vectorized (AS 241)."""
    p = np.asarray(p, dtype=np.float64)
    out = np.empty_like(p)
    q = p - 0.5
    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _horner(_A, r) / _horner(_B, r)
    tails = ~central
    if np.any(tails):
        qt = q[tails]
        pt = p[tails]
        r = np.where(qt < 0.0, pt, 1.0 - pt)
        r = np.sqrt(-np.log(r))
        x = np.empty_like(r)
        near = r <= 5.0
        rn = r[near] - 1.6
        x[near] = _horner(_C, rn) / _horner(_D, rn)
        rf = r[~near] - 5.0
        x[~near] = _horner(_E, rf) / _horner(_F, rf)
        out[tails] = np.where(qt < 0.0, -x, x)
    return out


# ------------------------- scalar njit versions --------------------------- #


@njit(inline="always", cache=True)
def philox_once(path, step, domain, k0, k1):
    """One Philox block for counter (path_lo, path_hi, step, domain).

    Returns two 64-bit words assembled from the four 32-bit outputs.
    """
    c0 = np.uint64(path) & np.uint64(0xFFFFFFFF)
    c1 = np.uint64(path) >> np.uint64(32)
    c2 = np.uint64(step)
    c3 = np.uint64(domain)
    for _ in range(10):
        p0 = np.uint64(0xD2511F53) * c0
        p1 = np.uint64(0xCD9E8D57) * c2
        hi0 = p0 >> np.uint64(32)
        lo0 = p0 & np.uint64(0xFFFFFFFF)
        hi1 = p1 >> np.uint64(32)
        lo1 = p1 & np.uint64(0xFFFFFFFF)
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + np.uint64(0x9E3779B9)) & np.uint64(0xFFFFFFFF)
        k1 = (k1 + np.uint64(0xBB67AE85)) & np.uint64(0xFFFFFFFF)
    wa = (c0 << np.uint64(21)) | (c1 >> np.uint64(11))
    wb = (c2 << np.uint64(21)) | (c3 >> np.uint64(11))
    return wa, wb


@njit(inline="always", cache=True)
def unit_double(word53):
    return float(word53) * _TWO_NEG53 + _TWO_NEG54


@njit(inline="always", cache=True)
def ndtri_scalar(p):
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((_A[7] * r + _A[6]) * r + _A[5]) * r + _A[4]) * r + _A[3]) * r + _A[2]) * r + _A[1]) * r + _A[0])
        den = (((((((_B[7] * r + _B[6]) * r + _B[5]) * r + _B[4]) * r + _B[3]) * r + _B[2]) * r + _B[1]) * r + _B[0])
        return q * num / den
    if q < 0.0:
        r = p
    else:
        r = 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((_C[7] * r + _C[6]) * r + _C[5]) * r + _C[4]) * r + _C[3]) * r + _C[2]) * r + _C[1]) * r + _C[0])
        den = (((((((_D[7] * r + _D[6]) * r + _D[5]) * r + _D[4]) * r + _D[3]) * r + _D[2]) * r + _D[1]) * r + _D[0])
        x = num / den
    else:
        r = r - 5.0
        num = (((((((_E[7] * r + _E[6]) * r + _E[5]) * r + _E[4]) * r + _E[3]) * r + _E[2]) * r + _E[1]) * r + _E[0])
        den = (((((((_F[7] * r + _F[6]) * r + _F[5]) * r + _F[4]) * r + _F[3]) * r + _F[2]) * r + _F[1]) * r + _F[0])
        x = num / den
    if q < 0.0:
        x = -x
    return x
