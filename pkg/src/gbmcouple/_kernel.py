"""Compiled per-path simulation kernel.

One thread advances one path to absorption or to the end of the segment.
Randomness is addressed by (global path index, global step index), never
consumed from shared state, so results are independent of the number of
threads and of how a time interval is split into segments.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from .rng import ndtri_scalar, philox_once, unit_double

__all__ = ["simulate_segment"]


@njit(parallel=True, cache=True)
def simulate_segment(
    z,
    phase,
    hit,
    path0,
    step0,
    n_steps,
    dt,
    mu,
    vp2,
    vm2,
    k0,
    k1,
    domain,
    bridge_on,
    kind,
    const_c,
    box,
    c_in,
    c_out,
    g_ctrl,
    g_z0,
    g_dz,
    g_s0,
    g_ds,
    g_horizon,
):
    """Advance all paths over steps [step0, step0 + n_steps).

    z, phase are updated in place; hit[i] receives the absolute hitting
    time, or +inf if the path is still above the barrier at the end of
    the segment.  Within a step the control is frozen: the increment is
    the exact Gaussian law, a terminal sign change is an observed
    crossing, and an interior crossing is detected with the Brownian
    bridge probability exp(-2 z_a z_b / (v2 dt)).  Either kind of
    crossing is recorded at the step midpoint: the true crossing time
    lies strictly inside the step, and the midpoint convention keeps the
    O(dt) timing error centered instead of one-sided.
    """
    n = z.shape[0]
    g_nz = g_ctrl.shape[1]
    g_ns = g_ctrl.shape[0]
    for i in prange(n):
        zi = z[i]
        ph = phase[i]
        hti = np.inf
        if zi <= 0.0:
            hit[i] = step0 * dt
            continue
        for j in range(n_steps):
            t = (step0 + j) * dt
            # control for this step
            if kind == 0:
                c = -1.0
            elif kind == 1:
                c = 1.0
            elif kind == 2:
                c = const_c
            elif kind == 3:
                if ph == 0 and box[0] <= zi <= box[1] and box[2] <= t <= box[3]:
                    ph = 1
                if ph == 1 and not (box[4] <= zi <= box[5] and box[6] <= t <= box[7]):
                    ph = 2
                c = c_in if ph == 1 else c_out
            else:
                s_rem = g_horizon - t
                js = int(math.floor((s_rem - g_s0) / g_ds + 0.5))
                if js < 0:
                    js = 0
                elif js >= g_ns:
                    js = g_ns - 1
                iz = int(math.floor((zi - g_z0) / g_dz + 0.5))
                if iz < 0:
                    iz = 0
                elif iz >= g_nz:
                    iz = g_nz - 1
                c = 1.0 if g_ctrl[js, iz] > 0 else -1.0
            # variance rate for the frozen control
            if c == 1.0:
                v2 = vm2
            elif c == -1.0:
                v2 = vp2
            else:
                v2 = 0.5 * (vp2 + vm2) - 0.5 * (vp2 - vm2) * c
                if v2 < 0.0:
                    v2 = 0.0
            if v2 == 0.0:
                # no diffusion: purely deterministic motion at rate -mu
                if mu > 0.0:
                    zn = zi - mu * dt
                    if zn <= 0.0:
                        hti = t + zi / mu
                        zi = 0.0
                        break
                    zi = zn
                    continue
                if kind <= 2:
                    break  # control can never change: censored for good
                zi = zi - mu * dt
                continue
            wa, wb = philox_once(path0 + i, step0 + j, domain, k0, k1)
            xi = ndtri_scalar(unit_double(wa))
            zn = zi - mu * dt + math.sqrt(v2 * dt) * xi
            if zn <= 0.0:
                hti = t + 0.5 * dt
                zi = zn
                break
            if bridge_on:
                pb = math.exp(-2.0 * zi * zn / (v2 * dt))
                if unit_double(wb) < pb:
                    hti = t + 0.5 * dt
                    zi = 0.0
                    break
            zi = zn
        z[i] = zi
        phase[i] = ph
        hit[i] = hti
