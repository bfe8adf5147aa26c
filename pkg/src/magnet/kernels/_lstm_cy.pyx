# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled LSTM sequence kernels; mirrors _lstm_np exactly.

Input projections stay in BLAS (via numpy) where one large matmul beats a C
loop; the per-timestep recurrence runs in C.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sig(double v) noexcept nogil:
    cdef double e
    if v >= 0.0:
        return 1.0 / (1.0 + exp(-v))
    e = exp(v)
    return e / (1.0 + e)


def lstm_forward(double[:, ::1] x, double[:, ::1] wx, double[:, ::1] wh,
                 double[::1] b, bint reverse=False):
    cdef Py_ssize_t T = x.shape[0]
    cdef Py_ssize_t h = wh.shape[1]
    xp_arr = np.dot(np.asarray(x), np.asarray(wx).T)
    xp_arr += np.asarray(b)
    cdef double[:, ::1] xp = xp_arr
    gi_arr = np.empty((T, h)); gf_arr = np.empty((T, h))
    gg_arr = np.empty((T, h)); go_arr = np.empty((T, h))
    cs_arr = np.empty((T, h)); hs_arr = np.empty((T, h))
    cdef double[:, ::1] gi = gi_arr, gf = gf_arr, gg = gg_arr
    cdef double[:, ::1] go = go_arr, cs = cs_arr, hs = hs_arr
    hprev_arr = np.zeros(h); cprev_arr = np.zeros(h)
    cdef double[::1] h_prev = hprev_arr, c_prev = cprev_arr
    cdef Py_ssize_t j, t, r, k
    cdef double acc
    with nogil:
        for j in range(T):
            t = T - 1 - j if reverse else j
            for r in range(h):
                acc = xp[t, r]
                for k in range(h):
                    acc += wh[r, k] * h_prev[k]
                gi[t, r] = _sig(acc)

                acc = xp[t, h + r]
                for k in range(h):
                    acc += wh[h + r, k] * h_prev[k]
                gf[t, r] = _sig(acc)

                acc = xp[t, 2 * h + r]
                for k in range(h):
                    acc += wh[2 * h + r, k] * h_prev[k]
                gg[t, r] = tanh(acc)

                acc = xp[t, 3 * h + r]
                for k in range(h):
                    acc += wh[3 * h + r, k] * h_prev[k]
                go[t, r] = _sig(acc)
            for r in range(h):
                cs[t, r] = gf[t, r] * c_prev[r] + gi[t, r] * gg[t, r]
                hs[t, r] = go[t, r] * tanh(cs[t, r])
            for r in range(h):
                h_prev[r] = hs[t, r]
                c_prev[r] = cs[t, r]
    cache = (np.asarray(x), np.asarray(wx), np.asarray(wh),
             gi_arr, gf_arr, gg_arr, go_arr, cs_arr, hs_arr, bool(reverse))
    return hs_arr, cache


def lstm_backward(cache, double[:, ::1] dhs):
    x_arr, wx_arr, wh_arr, gi_arr, gf_arr, gg_arr, go_arr, cs_arr, hs_arr, reverse = cache
    cdef double[:, ::1] wh = wh_arr
    cdef double[:, ::1] gi = gi_arr, gf = gf_arr, gg = gg_arr
    cdef double[:, ::1] go = go_arr, cs = cs_arr, hs = hs_arr
    cdef Py_ssize_t T = gi.shape[0]
    cdef Py_ssize_t h = wh.shape[1]
    cdef bint rev = reverse
    dz_arr = np.zeros((T, 4 * h))
    hprev_all_arr = np.zeros((T, h))
    cdef double[:, ::1] dz_all = dz_arr, h_prev_all = hprev_all_arr
    dh_arr = np.zeros(h); dc_arr = np.zeros(h)
    cdef double[::1] dh_carry = dh_arr, dc_carry = dc_arr
    cdef Py_ssize_t j, t, prev, r, k
    cdef double dh, tc, do_, dc, acc
    with nogil:
        for j in range(T - 1, -1, -1):
            if rev:
                t = T - 1 - j
                prev = t + 1 if j > 0 else -1
            else:
                t = j
                prev = t - 1 if j > 0 else -1
            for r in range(h):
                dh = dhs[t, r] + dh_carry[r]
                tc = tanh(cs[t, r])
                do_ = dh * tc
                dc = dc_carry[r] + dh * go[t, r] * (1.0 - tc * tc)
                dz_all[t, r] = dc * gg[t, r] * gi[t, r] * (1.0 - gi[t, r])
                if prev >= 0:
                    dz_all[t, h + r] = dc * cs[prev, r] * gf[t, r] * (1.0 - gf[t, r])
                    h_prev_all[t, r] = hs[prev, r]
                dz_all[t, 2 * h + r] = dc * gi[t, r] * (1.0 - gg[t, r] * gg[t, r])
                dz_all[t, 3 * h + r] = do_ * go[t, r] * (1.0 - go[t, r])
                dc_carry[r] = dc * gf[t, r]
            for r in range(h):
                acc = 0.0
                for k in range(4 * h):
                    acc += wh[k, r] * dz_all[t, k]
                dh_carry[r] = acc
    dx = dz_arr @ wx_arr
    dwx = dz_arr.T @ x_arr
    dwh = dz_arr.T @ hprev_all_arr
    db = dz_arr.sum(axis=0)
    return dx, dwx, dwh, db
