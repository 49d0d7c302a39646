"""Compiled inner loop of the stochastic integrator.

The update is the semi-implicit stochastic Euler step: coefficients are read
at the current position, the velocity is advanced first and the position is
advanced with the new velocity.  Advancing the position with the old
velocity would inject spurious anti-damping of order omega0^2*dt per unit
time, which at dt=0.01 exceeds the physical damping scale of the reference
device and destabilizes the equilibrium state.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _cubic(c, i, t):
    return ((c[0, i] * t + c[1, i]) * t + c[2, i]) * t + c[3, i]


@njit(cache=True)
def run_chunk(
    state,          # float64[3]: x, v, clamp_count (mutated)
    normals,        # standard-normal draws for this chunk
    start_step,     # global index of the first step in this chunk
    dt,
    omega0_sq,
    force_over_m,
    sqrt_dt_over_m,
    x_lo,
    x_hi,
    inv_h,          # 1 / grid spacing
    c_occ, c_dif, c_gam,   # (4, n-1) spline coefficient arrays
    burn_in,
    stride,
    rec_x, rec_v,   # output buffers
    n_rec,          # samples already recorded
):
    """Advance the state over one chunk of noise; returns (n_rec, bad_step).

    bad_step is -1 on success, else the global index of the first step that
    produced a non-finite state.
    """
    x = state[0]
    v = state[1]
    clamps = state[2]
    n_int = c_occ.shape[1]
    for k in range(normals.shape[0]):
        xc = x
        if xc < x_lo:
            xc = x_lo
            clamps += 1.0
        elif xc > x_hi:
            xc = x_hi
            clamps += 1.0
        i = int((xc - x_lo) * inv_h)
        if i < 0:
            i = 0
        elif i > n_int - 1:
            i = n_int - 1
        t = xc - (x_lo + i / inv_h)
        occ = _cubic(c_occ, i, t)
        dif = _cubic(c_dif, i, t)
        gam = _cubic(c_gam, i, t)
        if dif < 0.0:
            dif = 0.0
        v = v + (-omega0_sq * x - gam * v + force_over_m * occ) * dt \
            + np.sqrt(dif) * sqrt_dt_over_m * normals[k]
        x = x + v * dt
        if not (np.isfinite(x) and np.isfinite(v)):
            state[0] = x
            state[1] = v
            state[2] = clamps
            return n_rec, start_step + k
        step = start_step + k + 1  # steps completed so far
        if step > burn_in and (step - burn_in) % stride == 0:
            rec_x[n_rec] = x
            rec_v[n_rec] = v
            n_rec += 1
    state[0] = x
    state[1] = v
    state[2] = clamps
    return n_rec, -1
