# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Cython LSTM recurrence kernels; same contract as ``fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


cdef inline double _sig(double z) noexcept nogil:
    return 1.0 / (1.0 + exp(-z))


cdef inline double _tanh(double z) noexcept nogil:
    # glibc tanh is several times slower than exp; absolute error ~1e-16
    return 1.0 - 2.0 / (exp(2.0 * z) + 1.0)


def recurrence_forward(double[:, :, ::1] zx, U):
    cdef Py_ssize_t B = zx.shape[0], T = zx.shape[1], G = zx.shape[2]
    cdef Py_ssize_t H = G // 4
    cdef double[:, ::1] Ut = np.ascontiguousarray(np.asarray(U, dtype=np.float64).T)
    hs_a = np.zeros((B, T + 1, H))
    cs_a = np.zeros((B, T + 1, H))
    gates_a = np.empty((B, T, G))
    tcs_a = np.empty((B, T, H))
    cdef double[:, :, ::1] hs = hs_a
    cdef double[:, :, ::1] tcs = tcs_a
    cdef double[:, :, ::1] cs = cs_a
    cdef double[:, :, ::1] gates = gates_a
    cdef double[::1] z = np.empty(G)
    cdef Py_ssize_t b, t, r, k
    cdef double hk, c, ig, fg, og, gg
    with nogil:
        for b in range(B):
            for t in range(T):
                for r in range(G):
                    z[r] = zx[b, t, r]
                # row-wise accumulation keeps the G sums independent
                for k in range(H):
                    hk = hs[b, t, k]
                    for r in range(G):
                        z[r] += Ut[k, r] * hk
                for k in range(H):
                    ig = _sig(z[k])
                    fg = _sig(z[H + k])
                    og = _sig(z[2 * H + k])
                    gg = _tanh(z[3 * H + k])
                    gates[b, t, k] = ig
                    gates[b, t, H + k] = fg
                    gates[b, t, 2 * H + k] = og
                    gates[b, t, 3 * H + k] = gg
                    c = fg * cs[b, t, k] + ig * gg
                    cs[b, t + 1, k] = c
                    c = _tanh(c)
                    tcs[b, t, k] = c
                    hs[b, t + 1, k] = og * c
    return hs_a, cs_a, gates_a, tcs_a


def recurrence_backward(U, double[:, :, ::1] cs, double[:, :, ::1] gates,
                        double[:, :, ::1] tcs, dh_last):
    cdef Py_ssize_t B = gates.shape[0], T = gates.shape[1], G = gates.shape[2]
    cdef Py_ssize_t H = G // 4
    cdef double[:, ::1] Uv = np.ascontiguousarray(U, dtype=np.float64)
    cdef double[:, ::1] dhl = np.ascontiguousarray(dh_last, dtype=np.float64)
    dz_a = np.empty((B, T, G))
    cdef double[:, :, ::1] dz = dz_a
    cdef double[::1] dh = np.empty(H)
    cdef double[::1] dc = np.empty(H)
    cdef Py_ssize_t b, t, r, k
    cdef double ig, fg, og, gg, tc, dck, d
    with nogil:
        for b in range(B):
            for k in range(H):
                dh[k] = dhl[b, k]
                dc[k] = 0.0
            for t in range(T - 1, -1, -1):
                for k in range(H):
                    ig = gates[b, t, k]
                    fg = gates[b, t, H + k]
                    og = gates[b, t, 2 * H + k]
                    gg = gates[b, t, 3 * H + k]
                    tc = tcs[b, t, k]
                    dck = dc[k] + dh[k] * og * (1.0 - tc * tc)
                    dz[b, t, k] = dck * gg * ig * (1.0 - ig)
                    dz[b, t, H + k] = dck * cs[b, t, k] * fg * (1.0 - fg)
                    dz[b, t, 2 * H + k] = dh[k] * tc * og * (1.0 - og)
                    dz[b, t, 3 * H + k] = dck * ig * (1.0 - gg * gg)
                    dc[k] = dck * fg
                for k in range(H):
                    dh[k] = 0.0
                for r in range(G):
                    d = dz[b, t, r]
                    for k in range(H):
                        dh[k] += d * Uv[r, k]
    return dz_a
