"""Numpy implementation of the LSTM sequence kernels."""

import numpy as np


def _sigmoid(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def lstm_forward(x, wx, wh, b, reverse=False):
    T = x.shape[0]
    h = wh.shape[1]
    xp = x @ wx.T + b  # T x 4h, input projection hoisted out of the loop
    gi = np.empty((T, h))
    gf = np.empty((T, h))
    gg = np.empty((T, h))
    go = np.empty((T, h))
    cs = np.empty((T, h))
    hs = np.empty((T, h))
    order = range(T - 1, -1, -1) if reverse else range(T)
    h_prev = np.zeros(h)
    c_prev = np.zeros(h)
    for t in order:
        z = xp[t] + wh @ h_prev
        gi[t] = _sigmoid(z[:h])
        gf[t] = _sigmoid(z[h : 2 * h])
        gg[t] = np.tanh(z[2 * h : 3 * h])
        go[t] = _sigmoid(z[3 * h :])
        cs[t] = gf[t] * c_prev + gi[t] * gg[t]
        hs[t] = go[t] * np.tanh(cs[t])
        h_prev = hs[t]
        c_prev = cs[t]
    cache = (x, wx, wh, gi, gf, gg, go, cs, hs, bool(reverse))
    return hs, cache


def lstm_backward(cache, dhs):
    x, wx, wh, gi, gf, gg, go, cs, hs, reverse = cache
    T = x.shape[0]
    h = wh.shape[1]
    order = list(range(T - 1, -1, -1)) if reverse else list(range(T))
    dz_all = np.zeros((T, 4 * h))
    h_prev_all = np.zeros((T, h))
    dh_carry = np.zeros(h)
    dc_carry = np.zeros(h)
    zeros = np.zeros(h)
    wht = wh.T.copy()
    for j in range(T - 1, -1, -1):
        t = order[j]
        prev = order[j - 1] if j > 0 else None
        h_prev = hs[prev] if prev is not None else zeros
        c_prev = cs[prev] if prev is not None else zeros
        h_prev_all[t] = h_prev
        dh = dhs[t] + dh_carry
        tc = np.tanh(cs[t])
        do = dh * tc
        dc = dc_carry + dh * go[t] * (1.0 - tc * tc)
        dz = dz_all[t]
        dz[:h] = dc * gg[t] * gi[t] * (1.0 - gi[t])
        dz[h : 2 * h] = dc * c_prev * gf[t] * (1.0 - gf[t])
        dz[2 * h : 3 * h] = dc * gi[t] * (1.0 - gg[t] * gg[t])
        dz[3 * h :] = do * go[t] * (1.0 - go[t])
        dh_carry = wht @ dz
        dc_carry = dc * gf[t]
    dx = dz_all @ wx
    dwx = dz_all.T @ x
    dwh = dz_all.T @ h_prev_all
    db = dz_all.sum(axis=0)
    return dx, dwx, dwh, db
