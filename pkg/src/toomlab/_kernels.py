"""Compiled inner loops for the Floquet-Langevin integrator.

Each function advances one unit-length sub-step (``nsteps`` Euler steps) in
place. Forces are always evaluated from the pre-step state (synchronous
update); noise arrays are pre-drawn by the caller so that the consumed random
stream is independent of how the loops are scheduled. Updates run strictly
sequentially, so accumulation order is fixed and runs are reproducible.

The smoothed interaction target is the unique multilinear extension of the
rule's corner table, evaluated from its polynomial coefficients
``coef[mask] = 2^-k * sum_corners out(c) * prod_{j in mask} c_j``; the
three-neighbor case (every shipped rule) is unrolled, other sizes take the
generic subset-enumeration path. ``xn[j]``/``yn[j]`` are precomputed wrapped
neighbor index tables, one row per neighborhood offset.
"""

import numpy as np
from numba import njit

__all__ = ["pin_substep", "interact_substep"]


@njit(cache=True, nogil=True, fastmath=True)
def pin_substep(qA, pA, qB, pB, v_pin, F, gamma, m, dt, nsteps, ramp_steps,
                noise_a, noise_b, amp, trace, do_trace, ty, tx, guard):
    h, w = qA.shape
    has_noise = amp > 0.0
    for i in range(nsteps):
        scale = 1.0
        if ramp_steps > 0 and i + 1 < ramp_steps:
            scale = (i + 1.0) / ramp_steps
        vp = v_pin * scale
        Fs = F * scale
        for y in range(h):
            for x in range(w):
                q = qA[y, x]
                p = pA[y, x]
                f = -4.0 * vp * q * (q * q - 1.0) - Fs
                xi = amp * noise_a[i, y, x] if has_noise else 0.0
                qA[y, x] = q + (p / m) * dt
                pA[y, x] = p + (f - gamma * p) * dt + xi
                q = qB[y, x]
                p = pB[y, x]
                f = -4.0 * vp * q * (q * q - 1.0) - Fs
                xi = amp * noise_b[i, y, x] if has_noise else 0.0
                qB[y, x] = q + (p / m) * dt
                pB[y, x] = p + (f - gamma * p) * dt + xi
        if do_trace:
            trace[i, 0] = qA[ty, tx]
            trace[i, 1] = qB[ty, tx]
    ok = True
    for y in range(h):
        for x in range(w):
            if not (abs(qA[y, x]) < guard and abs(pA[y, x]) < guard
                    and abs(qB[y, x]) < guard and abs(pB[y, x]) < guard):
                ok = False
    return 0 if ok else 1


@njit(cache=True, nogil=True, fastmath=True)
def interact_substep(q_mem, p_mem, q_drv, p_drv, xn, yn, coef,
                     v_pin, F, v_i, gamma, m, dt, nsteps,
                     noise_mem, noise_drv, amp, trace, do_trace, ty, tx, guard):
    """Memory sublattice pinned, driven sublattice pulled toward the rule target.

    The memory oscillators feel the pinning force plus the exact gradient of
    the smoothed interaction; gradients vanish for neighbors clamped outside
    [-1, 1]. Trace column 0 records the memory sublattice.
    """
    h, w = q_mem.shape
    k = xn.shape[0]
    nmask = coef.shape[0]          # 2**k
    f_mem = np.empty((h, w))
    f_drv = np.empty((h, w))
    u = np.empty(k)
    inb = np.empty(k)
    mono = np.empty(nmask)
    lowbit = np.empty(nmask, dtype=np.int64)
    for s in range(1, nmask):
        b = 0
        while (s >> b) & 1 == 0:
            b += 1
        lowbit[s] = b
    has_noise = amp > 0.0
    for i in range(nsteps):
        for y in range(h):
            for x in range(w):
                q = q_mem[y, x]
                f_mem[y, x] = -4.0 * v_pin * q * (q * q - 1.0) - F
        if k == 3:
            c0 = coef[0]
            c1 = coef[1]
            c2 = coef[2]
            c3 = coef[3]
            c4 = coef[4]
            c5 = coef[5]
            c6 = coef[6]
            c7 = coef[7]
            for y in range(h):
                y0 = yn[0, y]
                y1 = yn[1, y]
                y2 = yn[2, y]
                for x in range(w):
                    x0 = xn[0, x]
                    x1 = xn[1, x]
                    x2 = xn[2, x]
                    u0 = q_mem[y0, x0]
                    in0 = 1.0
                    if u0 > 1.0:
                        u0 = 1.0
                        in0 = 0.0
                    elif u0 < -1.0:
                        u0 = -1.0
                        in0 = 0.0
                    u1 = q_mem[y1, x1]
                    in1 = 1.0
                    if u1 > 1.0:
                        u1 = 1.0
                        in1 = 0.0
                    elif u1 < -1.0:
                        u1 = -1.0
                        in1 = 0.0
                    u2 = q_mem[y2, x2]
                    in2 = 1.0
                    if u2 > 1.0:
                        u2 = 1.0
                        in2 = 0.0
                    elif u2 < -1.0:
                        u2 = -1.0
                        in2 = 0.0
                    u01 = u0 * u1
                    u02 = u0 * u2
                    u12 = u1 * u2
                    target = (c0 + c1 * u0 + c2 * u1 + c3 * u01
                              + c4 * u2 + c5 * u02 + c6 * u12 + c7 * u01 * u2)
                    d = target - q_drv[y, x]
                    f_drv[y, x] = v_i * d
                    vd = v_i * d
                    g = (c1 + c3 * u1 + c5 * u2 + c7 * u12) * in0
                    if g != 0.0:
                        f_mem[y0, x0] -= vd * g
                    g = (c2 + c3 * u0 + c6 * u2 + c7 * u02) * in1
                    if g != 0.0:
                        f_mem[y1, x1] -= vd * g
                    g = (c4 + c5 * u0 + c6 * u1 + c7 * u01) * in2
                    if g != 0.0:
                        f_mem[y2, x2] -= vd * g
        else:
            for y in range(h):
                for x in range(w):
                    for j in range(k):
                        val = q_mem[yn[j, y], xn[j, x]]
                        if val > 1.0:
                            u[j] = 1.0
                            inb[j] = 0.0
                        elif val < -1.0:
                            u[j] = -1.0
                            inb[j] = 0.0
                        else:
                            u[j] = val
                            inb[j] = 1.0
                    mono[0] = 1.0
                    for s in range(1, nmask):
                        mono[s] = mono[s & (s - 1)] * u[lowbit[s]]
                    target = 0.0
                    for s in range(nmask):
                        target += coef[s] * mono[s]
                    d = target - q_drv[y, x]
                    f_drv[y, x] = v_i * d
                    for j in range(k):
                        if inb[j] != 0.0:
                            g = 0.0
                            bit = 1 << j
                            for s in range(nmask):
                                if s & bit:
                                    g += coef[s] * mono[s ^ bit]
                            if g != 0.0:
                                f_mem[yn[j, y], xn[j, x]] -= v_i * d * g
        for y in range(h):
            for x in range(w):
                q = q_mem[y, x]
                p = p_mem[y, x]
                xi = amp * noise_mem[i, y, x] if has_noise else 0.0
                q_mem[y, x] = q + (p / m) * dt
                p_mem[y, x] = p + (f_mem[y, x] - gamma * p) * dt + xi
                q = q_drv[y, x]
                p = p_drv[y, x]
                xi = amp * noise_drv[i, y, x] if has_noise else 0.0
                q_drv[y, x] = q + (p / m) * dt
                p_drv[y, x] = p + (f_drv[y, x] - gamma * p) * dt + xi
        if do_trace:
            trace[i, 0] = q_mem[ty, tx]
            trace[i, 1] = q_drv[ty, tx]
    ok = True
    for y in range(h):
        for x in range(w):
            if not (abs(q_mem[y, x]) < guard and abs(p_mem[y, x]) < guard
                    and abs(q_drv[y, x]) < guard and abs(p_drv[y, x]) < guard):
                ok = False
    return 0 if ok else 1
