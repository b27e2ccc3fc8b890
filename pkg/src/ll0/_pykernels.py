"""Pure-Python forward/backward sweeps over a compiled plan.

Reference twin of ``_ckernels.pyx``; both must return identical results.
Arrays follow the layout of :class:`ll0.graph.Plan`.
"""
import math

import numpy as np

INPUT, VALUE, CONCEPT, OUTPUT = 0, 1, 2, 3


def _sigmoid(s):
    if s >= 0:
        return 1.0 / (1.0 + math.exp(-s))
    e = math.exp(s)
    return e / (1.0 + e)


def _sweep(kind, aux, p1, p2, in_ptr, in_src, in_w, x, acts):
    n = len(kind)
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
            acts[i] = math.exp(-d * d / (2.0 * p2[i] * p2[i]))
        elif k == CONCEPT:
            acts[i] = _sigmoid(s + p1[i])
        else:
            acts[i] = s


def _softmax_outputs(acts, out_pos):
    z = [acts[p] for p in out_pos]
    m = max(z)
    e = [math.exp(v - m) for v in z]
    tot = sum(e)
    for p, v in zip(out_pos, e):
        acts[p] = v / tot
    return z


def forward(kind, aux, p1, p2, in_ptr, in_src, in_w, out_pos, x):
    kind_l, aux_l = kind.tolist(), aux.tolist()
    p1_l, p2_l = p1.tolist(), p2.tolist()
    ptr_l, src_l, w_l = in_ptr.tolist(), in_src.tolist(), in_w.tolist()
    out_l = out_pos.tolist()
    acts = [0.0] * len(kind_l)
    _sweep(kind_l, aux_l, p1_l, p2_l, ptr_l, src_l, w_l, x.tolist(), acts)
    z = _softmax_outputs(acts, out_l)
    return np.asarray(acts, dtype=float), np.asarray(z, dtype=float)


def forward_batch(kind, aux, p1, p2, in_ptr, in_src, in_w, out_pos, X):
    kind_l, aux_l = kind.tolist(), aux.tolist()
    p1_l, p2_l = p1.tolist(), p2.tolist()
    ptr_l, src_l, w_l = in_ptr.tolist(), in_src.tolist(), in_w.tolist()
    out_l = out_pos.tolist()
    acts = [0.0] * len(kind_l)
    out = np.empty((X.shape[0], len(out_l)))
    for b, row in enumerate(X.tolist()):
        _sweep(kind_l, aux_l, p1_l, p2_l, ptr_l, src_l, w_l, row, acts)
        _softmax_outputs(acts, out_l)
        out[b] = [acts[p] for p in out_l]
    return out


def backward(kind, aux, p1, p2, in_ptr, in_src, in_w, out_pos, acts, dz):
    """Reverse sweep; ``dz`` is dE/dz for the output pre-activations.

    Returns (g1, g2, gw): per-position gradients of p1 (theta or mu), p2
    (sigma) and per-slot gradients of the incoming edge weights.
    """
    kind_l = kind.tolist()
    p1_l, p2_l = p1.tolist(), p2.tolist()
    ptr_l, src_l, w_l = in_ptr.tolist(), in_src.tolist(), in_w.tolist()
    a = acts.tolist()
    n = len(kind_l)
    g_act = [0.0] * n
    g1 = [0.0] * n
    g2 = [0.0] * n
    gw = [0.0] * len(w_l)
    for k, p in enumerate(out_pos.tolist()):
        g_act[p] = dz[k]
    for i in range(n - 1, -1, -1):
        k = kind_l[i]
        if k == INPUT:
            continue
        g = g_act[i]
        if k == OUTPUT:
            dpre = g
        elif k == CONCEPT:
            dpre = g * a[i] * (1.0 - a[i])
            g1[i] = dpre
        else:
            j = ptr_l[i]
            u = w_l[j] * a[src_l[j]]
            mu, sig = p1_l[i], p2_l[i]
            d = u - mu
            ga = g * a[i]
            g1[i] = ga * d / (sig * sig)
            g2[i] = ga * d * d / (sig * sig * sig)
            dpre = -g1[i]
        if dpre == 0.0:
            continue
        for j in range(ptr_l[i], ptr_l[i + 1]):
            s = src_l[j]
            gw[j] = dpre * a[s]
            g_act[s] += dpre * w_l[j]
    return np.asarray(g1), np.asarray(g2), np.asarray(gw)
