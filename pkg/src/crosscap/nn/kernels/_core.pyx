# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled recurrent kernels; same contract as ``_ref`` (see its docstring)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sigmoid(double z) nogil:
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    cdef double ez = exp(z)
    return ez / (1.0 + ez)


def lstm_forward(xs, wx, wh, b, c0, h0):
    cdef double[:, ::1] xs_v = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[:, ::1] wx_v = np.ascontiguousarray(wx, dtype=np.float64)
    cdef double[:, ::1] wh_v = np.ascontiguousarray(wh, dtype=np.float64)
    cdef double[::1] b_v = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[::1] c0_v = np.ascontiguousarray(c0, dtype=np.float64)
    cdef double[::1] h0_v = np.ascontiguousarray(h0, dtype=np.float64)

    cdef Py_ssize_t T = xs_v.shape[0]
    cdef Py_ssize_t E = xs_v.shape[1]
    cdef Py_ssize_t H = wh_v.shape[0]
    cdef Py_ssize_t G = 4 * H

    gates_np = np.empty((T, G), dtype=np.float64)
    cs_np = np.empty((T, H), dtype=np.float64)
    hs_np = np.empty((T, H), dtype=np.float64)
    z_np = np.empty(G, dtype=np.float64)
    cdef double[:, ::1] gates = gates_np
    cdef double[:, ::1] cs = cs_np
    cdef double[:, ::1] hs = hs_np
    cdef double[::1] z = z_np

    cdef Py_ssize_t t, j, k
    cdef double acc, i_g, f_g, g_g, o_g, c_new

    with nogil:
        for t in range(T):
            for j in range(G):
                acc = b_v[j]
                for k in range(E):
                    acc += xs_v[t, k] * wx_v[k, j]
                if t == 0:
                    for k in range(H):
                        acc += h0_v[k] * wh_v[k, j]
                else:
                    for k in range(H):
                        acc += hs[t - 1, k] * wh_v[k, j]
                z[j] = acc
            for j in range(H):
                i_g = _sigmoid(z[j])
                f_g = _sigmoid(z[H + j])
                g_g = tanh(z[2 * H + j])
                o_g = _sigmoid(z[3 * H + j])
                if t == 0:
                    c_new = f_g * c0_v[j] + i_g * g_g
                else:
                    c_new = f_g * cs[t - 1, j] + i_g * g_g
                gates[t, j] = i_g
                gates[t, H + j] = f_g
                gates[t, 2 * H + j] = g_g
                gates[t, 3 * H + j] = o_g
                cs[t, j] = c_new
                hs[t, j] = o_g * tanh(c_new)
    return gates_np, cs_np, hs_np


def lstm_backward(xs, wx, wh, gates, cs, hs, c0, h0, dhs):
    cdef double[:, ::1] xs_v = np.ascontiguousarray(xs, dtype=np.float64)
    cdef double[:, ::1] wx_v = np.ascontiguousarray(wx, dtype=np.float64)
    cdef double[:, ::1] wh_v = np.ascontiguousarray(wh, dtype=np.float64)
    cdef double[:, ::1] gates_v = np.ascontiguousarray(gates, dtype=np.float64)
    cdef double[:, ::1] cs_v = np.ascontiguousarray(cs, dtype=np.float64)
    cdef double[:, ::1] hs_v = np.ascontiguousarray(hs, dtype=np.float64)
    cdef double[::1] c0_v = np.ascontiguousarray(c0, dtype=np.float64)
    cdef double[::1] h0_v = np.ascontiguousarray(h0, dtype=np.float64)
    cdef double[:, ::1] dhs_v = np.ascontiguousarray(dhs, dtype=np.float64)

    cdef Py_ssize_t T = xs_v.shape[0]
    cdef Py_ssize_t E = xs_v.shape[1]
    cdef Py_ssize_t H = wh_v.shape[0]
    cdef Py_ssize_t G = 4 * H

    dxs_np = np.empty((T, E), dtype=np.float64)
    dwx_np = np.zeros((E, G), dtype=np.float64)
    dwh_np = np.zeros((H, G), dtype=np.float64)
    db_np = np.zeros(G, dtype=np.float64)
    dc_rec_np = np.zeros(H, dtype=np.float64)
    dh_rec_np = np.zeros(H, dtype=np.float64)
    dz_np = np.empty(G, dtype=np.float64)
    cdef double[:, ::1] dxs = dxs_np
    cdef double[:, ::1] dwx = dwx_np
    cdef double[:, ::1] dwh = dwh_np
    cdef double[::1] db = db_np
    cdef double[::1] dc_rec = dc_rec_np
    cdef double[::1] dh_rec = dh_rec_np
    cdef double[::1] dz = dz_np

    cdef Py_ssize_t t, j, k
    cdef double i_g, f_g, g_g, o_g, c_prev, h_prev, tc, dh, dc, do_, di, dg, df
    cdef double acc

    with nogil:
        for t in range(T - 1, -1, -1):
            for j in range(H):
                i_g = gates_v[t, j]
                f_g = gates_v[t, H + j]
                g_g = gates_v[t, 2 * H + j]
                o_g = gates_v[t, 3 * H + j]
                c_prev = c0_v[j] if t == 0 else cs_v[t - 1, j]
                tc = tanh(cs_v[t, j])
                dh = dhs_v[t, j] + dh_rec[j]
                do_ = dh * tc
                dc = dc_rec[j] + dh * o_g * (1.0 - tc * tc)
                di = dc * g_g
                dg = dc * i_g
                df = dc * c_prev
                dz[j] = di * i_g * (1.0 - i_g)
                dz[H + j] = df * f_g * (1.0 - f_g)
                dz[2 * H + j] = dg * (1.0 - g_g * g_g)
                dz[3 * H + j] = do_ * o_g * (1.0 - o_g)
                dc_rec[j] = dc * f_g
            for k in range(E):
                acc = 0.0
                for j in range(G):
                    acc += dz[j] * wx_v[k, j]
                dxs[t, k] = acc
                for j in range(G):
                    dwx[k, j] += xs_v[t, k] * dz[j]
            for k in range(H):
                acc = 0.0
                for j in range(G):
                    acc += dz[j] * wh_v[k, j]
                dh_rec[k] = acc
                h_prev = h0_v[k] if t == 0 else hs_v[t - 1, k]
                for j in range(G):
                    dwh[k, j] += h_prev * dz[j]
            for j in range(G):
                db[j] += dz[j]
    return dxs_np, dwx_np, dwh_np, db_np, dc_rec_np, dh_rec_np
