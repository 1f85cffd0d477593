"""Pure-numpy recurrent kernels; the fallback when the extension is absent.

Contract shared with the compiled version:

``lstm_forward(xs, wx, wh, b, c0, h0) -> (gates, cs, hs)``
    xs (T,E) inputs, wx (E,4H), wh (H,4H), b (4H,).  The 4H axis holds the
    input, forget, candidate and output gates in that order; ``gates``
    stores post-activation values.  cs/hs are the (T,H) cell and hidden
    states after each step.

``lstm_backward(xs, wx, wh, gates, cs, hs, c0, h0, dhs) ->
    (dxs, dwx, dwh, db, dc0, dh0)``
    dhs (T,H) is the gradient flowing into each hidden state from outside
    the recurrence; the returned arrays are the full backpropagation-
    through-time gradients.
"""

import numpy as np


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_forward(xs, wx, wh, b, c0, h0):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    T = xs.shape[0]
    H = wh.shape[0]
    gates = np.empty((T, 4 * H))
    cs = np.empty((T, H))
    hs = np.empty((T, H))
    c, h = c0, h0
    for t in range(T):
        z = xs[t] @ wx + h @ wh + b
        i = _sigmoid(z[:H])
        f = _sigmoid(z[H:2 * H])
        g = np.tanh(z[2 * H:3 * H])
        o = _sigmoid(z[3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t, :H], gates[t, H:2 * H] = i, f
        gates[t, 2 * H:3 * H], gates[t, 3 * H:] = g, o
        cs[t], hs[t] = c, h
    return gates, cs, hs


def lstm_backward(xs, wx, wh, gates, cs, hs, c0, h0, dhs):
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    T = xs.shape[0]
    H = wh.shape[0]
    dxs = np.empty_like(xs)
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros(4 * H)
    dh_rec = np.zeros(H)
    dc_rec = np.zeros(H)
    for t in range(T - 1, -1, -1):
        i = gates[t, :H]
        f = gates[t, H:2 * H]
        g = gates[t, 2 * H:3 * H]
        o = gates[t, 3 * H:]
        c_prev = cs[t - 1] if t > 0 else c0
        h_prev = hs[t - 1] if t > 0 else h0
        tc = np.tanh(cs[t])
        dh = dhs[t] + dh_rec
        do = dh * tc
        dc = dc_rec + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dz = np.concatenate([
            di * i * (1.0 - i),
            df * f * (1.0 - f),
            dg * (1.0 - g * g),
            do * o * (1.0 - o),
        ])
        dxs[t] = dz @ wx.T
        dh_rec = dz @ wh.T
        dwx += np.outer(xs[t], dz)
        dwh += np.outer(h_prev, dz)
        db += dz
        dc_rec = dc * f
    return dxs, dwx, dwh, db, dc_rec, dh_rec
