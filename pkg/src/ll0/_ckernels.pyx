# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled forward/backward sweeps over a compiled plan (see _pykernels)."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

ctypedef cnp.int64_t i64

cdef enum:
    INPUT = 0
    VALUE = 1
    CONCEPT = 2
    OUTPUT = 3


cdef inline double _sigmoid(double s) nogil:
    cdef double e
    if s >= 0:
        return 1.0 / (1.0 + exp(-s))
    e = exp(s)
    return e / (1.0 + e)


cdef void _sweep(const i64[::1] kind, const i64[::1] aux, const double[::1] p1,
                 const double[::1] p2, const i64[::1] in_ptr, const i64[::1] in_src,
                 const double[::1] in_w, const double[::1] x, double[::1] acts) noexcept nogil:
    cdef Py_ssize_t i, j, n = kind.shape[0]
    cdef double s, d
    cdef i64 k
    for i in range(n):
        k = kind[i]
        if k == INPUT:
            acts[i] = x[aux[i]]
            continue
        s = 0.0
        for j in range(in_ptr[i], in_ptr[i + 1]):
            s += in_w[j] * acts[in_src[j]]
        if k == VALUE:
            d = s - p1[i]
            acts[i] = exp(-d * d / (2.0 * p2[i] * p2[i]))
        elif k == CONCEPT:
            acts[i] = _sigmoid(s + p1[i])
        else:
            acts[i] = s


cdef void _softmax(double[::1] acts, const i64[::1] out_pos, double[::1] z) noexcept nogil:
    cdef Py_ssize_t k, m = out_pos.shape[0]
    cdef double mx, tot
    for k in range(m):
        z[k] = acts[out_pos[k]]
    mx = z[0]
    for k in range(1, m):
        if z[k] > mx:
            mx = z[k]
    tot = 0.0
    for k in range(m):
        acts[out_pos[k]] = exp(z[k] - mx)
        tot += acts[out_pos[k]]
    for k in range(m):
        acts[out_pos[k]] = acts[out_pos[k]] / tot


def forward(const i64[::1] kind, const i64[::1] aux, const double[::1] p1,
            const double[::1] p2, const i64[::1] in_ptr, const i64[::1] in_src,
            const double[::1] in_w, const i64[::1] out_pos, const double[::1] x):
    acts_arr = np.zeros(kind.shape[0])
    z_arr = np.empty(out_pos.shape[0])
    cdef double[::1] acts = acts_arr
    cdef double[::1] z = z_arr
    with nogil:
        _sweep(kind, aux, p1, p2, in_ptr, in_src, in_w, x, acts)
        _softmax(acts, out_pos, z)
    return acts_arr, z_arr


def forward_batch(const i64[::1] kind, const i64[::1] aux, const double[::1] p1,
                  const double[::1] p2, const i64[::1] in_ptr, const i64[::1] in_src,
                  const double[::1] in_w, const i64[::1] out_pos, const double[:, ::1] X):
    cdef Py_ssize_t b, k, nb = X.shape[0], m = out_pos.shape[0]
    out_arr = np.empty((nb, m))
    cdef double[:, ::1] out = out_arr
    cdef double[::1] acts = np.zeros(kind.shape[0])
    cdef double[::1] z = np.empty(m)
    with nogil:
        for b in range(nb):
            _sweep(kind, aux, p1, p2, in_ptr, in_src, in_w, X[b], acts)
            _softmax(acts, out_pos, z)
            for k in range(m):
                out[b, k] = acts[out_pos[k]]
    return out_arr


def backward(const i64[::1] kind, const i64[::1] aux, const double[::1] p1,
             const double[::1] p2, const i64[::1] in_ptr, const i64[::1] in_src,
             const double[::1] in_w, const i64[::1] out_pos, const double[::1] a,
             const double[::1] dz):
    cdef Py_ssize_t i, j, n = kind.shape[0]
    cdef i64 k, s
    cdef double g, dpre, u, d, ga, sig
    g1_arr = np.zeros(n)
    g2_arr = np.zeros(n)
    gw_arr = np.zeros(in_w.shape[0])
    gact_arr = np.zeros(n)
    cdef double[::1] g1 = g1_arr
    cdef double[::1] g2 = g2_arr
    cdef double[::1] gw = gw_arr
    cdef double[::1] g_act = gact_arr
    with nogil:
        for j in range(out_pos.shape[0]):
            g_act[out_pos[j]] = dz[j]
        for i in range(n - 1, -1, -1):
            k = kind[i]
            if k == INPUT:
                continue
            g = g_act[i]
            if k == OUTPUT:
                dpre = g
            elif k == CONCEPT:
                dpre = g * a[i] * (1.0 - a[i])
                g1[i] = dpre
            else:
                j = in_ptr[i]
                u = in_w[j] * a[in_src[j]]
                sig = p2[i]
                d = u - p1[i]
                ga = g * a[i]
                g1[i] = ga * d / (sig * sig)
                g2[i] = ga * d * d / (sig * sig * sig)
                dpre = -g1[i]
            if dpre == 0.0:
                continue
            for j in range(in_ptr[i], in_ptr[i + 1]):
                s = in_src[j]
                gw[j] = dpre * a[s]
                g_act[s] += dpre * in_w[j]
    return g1_arr, g2_arr, gw_arr
