"""Jitted prediction-model kernels for the receding-horizon layers.

These duplicate the pure-python transitions in :mod:`evtherm.plant` with
the per-stage RK4 substepping fused into one compiled call, which is what
makes batched finite-difference rollouts cheap.  ``plant`` falls back to
the python closures when numba is unavailable, and the test suite pins the
two paths against each other.

Like the simulation integrator, the heat-pump command and the section heat
terms are evaluated at the start of each substep and held constant across
the RK4 stages.  The section heat forecast enters the lower kernel as
per-substep affine coefficients (slope, offset) in the section
temperatures.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is in the standard env
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap


# Upper parameter vector layout (see plant.make_upper_transition):
#  0..3  m_c_node[0..3]
#  4 c_cool  5 gamma_hx  6 gamma_bat  7 c_a  8 m_a
#  9 alpha_cab  10 a_cb  11 alpha_cb  12 m_cb  13 c_cb
# 14 r_eff  15 v_nom  16 m_bat  17 c_bat  18 k_pump  19 cop  20 e_batt
# 21 q_hp_max  22 set_cab  23 set_bat  24 band
# 25 t_amb  26 q_occ  27 q_sol  28 p_trac  29 mdot_a_total


@njit(cache=True)
def _upper_rhs(x, u, pv, q_hp, dx):
    n_b = x.shape[1]
    for b in range(n_b):
        mdot_b = u[0, b]
        mdot_c = u[1, b]
        total = mdot_b + mdot_c
        dx[0, b] = (total * (x[3, b] - x[0, b]) + q_hp[b] / pv[4]) / pv[0]
        dx[1, b] = (mdot_c * (x[0, b] - x[1, b])
                    + pv[5] * (x[4, b] - x[1, b]) / pv[4]) / pv[1]
        dx[2, b] = (mdot_b * (x[0, b] - x[2, b])
                    + pv[6] * (x[7, b] - x[2, b]) / pv[4]) / pv[2]
        dx[3, b] = (mdot_c * (x[1, b] - x[3, b])
                    + mdot_b * (x[2, b] - x[3, b])) / pv[3]
        dx[4, b] = (pv[29] * pv[7] * (x[5, b] - x[4, b])
                    + pv[5] * (x[1, b] - x[4, b])) / (pv[8] * pv[7])
        dx[5, b] = (pv[9] * pv[10] * (x[6, b] - x[5, b])
                    + pv[29] * pv[7] * (x[4, b] - x[5, b])
                    + pv[26]) / (pv[8] * pv[7])
        dx[6, b] = (pv[11] * pv[10] * (x[5, b] - x[6, b])
                    + pv[11] * pv[10] * (pv[25] - x[6, b])
                    + pv[27]) / (pv[12] * pv[13])
        q_loss = pv[14] * (pv[28] / pv[15]) ** 2
        dx[7, b] = (pv[6] * (x[2, b] - x[7, b]) + q_loss) / (pv[16] * pv[17])
        dx[8, b] = -(pv[28] + q_hp[b] / pv[19] + pv[18] * total) / pv[20]


@njit(cache=True)
def upper_stage(x, u, pv, n_sub, dt):
    """Advance (9, B) states by n_sub RK4 substeps with the input held.

    The thermostatic command is re-evaluated from the state at the start of
    every substep and held across its RK4 stages, exactly as the plant
    integrator treats its inputs.
    """
    x = x.copy()
    n_x, n_b = x.shape
    k1 = np.empty((n_x, n_b))
    k2 = np.empty((n_x, n_b))
    k3 = np.empty((n_x, n_b))
    k4 = np.empty((n_x, n_b))
    tmp = np.empty((n_x, n_b))
    q_hp = np.empty(n_b)
    for _ in range(n_sub):
        for b in range(n_b):
            err_c = pv[22] - x[5, b]
            err_b = pv[23] - x[7, b]
            err = err_c if err_c > err_b else err_b
            frac = err / pv[24]
            if frac < 0.0:
                frac = 0.0
            elif frac > 1.0:
                frac = 1.0
            q_hp[b] = pv[21] * frac
        _upper_rhs(x, u, pv, q_hp, k1)
        for i in range(n_x):
            for b in range(n_b):
                tmp[i, b] = x[i, b] + 0.5 * dt * k1[i, b]
        _upper_rhs(tmp, u, pv, q_hp, k2)
        for i in range(n_x):
            for b in range(n_b):
                tmp[i, b] = x[i, b] + 0.5 * dt * k2[i, b]
        _upper_rhs(tmp, u, pv, q_hp, k3)
        for i in range(n_x):
            for b in range(n_b):
                tmp[i, b] = x[i, b] + dt * k3[i, b]
        _upper_rhs(tmp, u, pv, q_hp, k4)
        for i in range(n_x):
            for b in range(n_b):
                x[i, b] = x[i, b] + (dt / 6.0) * (k1[i, b] + 2.0 * k2[i, b]
                                                  + 2.0 * k3[i, b] + k4[i, b])
    for b in range(n_b):
        if x[8, b] < 0.0:
            x[8, b] = 0.0
        elif x[8, b] > 1.0:
            x[8, b] = 1.0
    return x


# Lower parameter vector layout (see plant.make_lower_transition):
#  0..3 alpha_cb * a_cb_sec[0..3]
#  4..7 m_s[0..3] * c_a
#  8 c_a  9 m_a  10 gamma_hx  11 alpha_cb*a_cb  12 m_cb*c_cb
# 13 t_cab  14 t_c2  15 t_amb  16 q_sol


@njit(cache=True)
def _lower_rhs(x, u, pv, q_add, dx):
    n_b = x.shape[1]
    for b in range(n_b):
        mdot_tot = u[0, b] + u[1, b] + u[2, b] + u[3, b]
        for i in range(4):
            dx[i, b] = (pv[i] * (x[5, b] - x[i, b])
                        + u[i, b] * pv[8] * (x[4, b] - x[i, b])
                        + q_add[i, b]) / pv[4 + i]
        dx[4, b] = (mdot_tot * pv[8] * (pv[13] - x[4, b])
                    + pv[10] * (pv[14] - x[4, b])) / (pv[9] * pv[8])
        dx[5, b] = (pv[11] * (pv[13] - x[5, b])
                    + pv[11] * (pv[15] - x[5, b]) + pv[16]) / pv[12]


@njit(cache=True)
def lower_stage(x, u, pv, slopes, offsets, dt):
    """Advance (6, B) states through the substeps encoded in slopes/offsets.

    ``slopes``/``offsets`` are (n_sub, 4): the affine section-heat forecast
    at each substep time, frozen from the state at the substep start.
    """
    x = x.copy()
    n_x, n_b = x.shape
    n_sub = slopes.shape[0]
    k1 = np.empty((n_x, n_b))
    k2 = np.empty((n_x, n_b))
    k3 = np.empty((n_x, n_b))
    k4 = np.empty((n_x, n_b))
    tmp = np.empty((n_x, n_b))
    q_add = np.empty((4, n_b))
    for j in range(n_sub):
        for i in range(4):
            for b in range(n_b):
                q_add[i, b] = slopes[j, i] * x[i, b] + offsets[j, i]
        _lower_rhs(x, u, pv, q_add, k1)
        for i in range(n_x):
            for b in range(n_b):
                tmp[i, b] = x[i, b] + 0.5 * dt * k1[i, b]
        _lower_rhs(tmp, u, pv, q_add, k2)
        for i in range(n_x):
            for b in range(n_b):
                tmp[i, b] = x[i, b] + 0.5 * dt * k2[i, b]
        _lower_rhs(tmp, u, pv, q_add, k3)
        for i in range(n_x):
            for b in range(n_b):
                tmp[i, b] = x[i, b] + dt * k3[i, b]
        _lower_rhs(tmp, u, pv, q_add, k4)
        for i in range(n_x):
            for b in range(n_b):
                x[i, b] = x[i, b] + (dt / 6.0) * (k1[i, b] + 2.0 * k2[i, b]
                                                  + 2.0 * k3[i, b] + k4[i, b])
    return x
