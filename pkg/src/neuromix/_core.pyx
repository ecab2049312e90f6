# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled integration kernels.

Same contract as ``_core_py`` (which is the readable reference); descriptor
and segment dicts are unpacked into C pointers once per run and the RK4 loop
runs without the GIL so thread pools scale across cases.
"""

from libc.math cimport tanh, exp, floor, fabs
from libc.string cimport memcpy

import numpy as np
cimport numpy as cnp

cnp.import_array()

IMPLEMENTATION = "compiled"


def empty_segments():
    z = np.zeros(0)
    zi = np.zeros(0, dtype=np.int32)
    return {"kind": zi, "node": zi, "table": zi, "idx": zi,
            "t0": z, "t1": z, "p0": z, "p1": z, "p2": z, "p3": z}


cdef double* dptr(cnp.ndarray a):
    return <double*>cnp.PyArray_DATA(a)


cdef int* iptr(cnp.ndarray a):
    return <int*>cnp.PyArray_DATA(a)


cdef struct NetC:
    int n_nodes
    int dim
    int n_el
    int n_syn
    int n_gap
    int n_seg
    int* node_off
    double* c
    double* i_base
    double* pas_lin_g
    double* pas_lin_e
    int* pas_off
    double* pas_a
    double* pas_d
    double* pas_w
    int* el_node
    double* el_sign
    double* el_alpha
    double* el_delta
    double* el_w
    double* el_tau
    int* el_state
    int* syn_pre
    int* syn_post
    double* syn_w
    double* syn_beta
    double* syn_delta
    double* syn_tau
    int* syn_state
    int* gap_a
    int* gap_b
    double* gap_g
    int* sg_kind
    int* sg_node
    int* sg_table
    int* sg_idx
    double* sg_t0
    double* sg_t1
    double* sg_p0
    double* sg_p1
    double* sg_p2
    double* sg_p3
    double* i_acc


cdef inline double _sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline void _apply_params(NetC* d, double t) noexcept nogil:
    cdef int s, tb, ix
    cdef double t0, t1, val
    for s in range(d.n_seg):
        if d.sg_kind[s] != 3:
            continue
        t0 = d.sg_t0[s]
        if t < t0:
            continue
        t1 = d.sg_t1[s]
        if t >= t1 or t1 <= t0:
            val = d.sg_p1[s]
        else:
            val = d.sg_p0[s] + (d.sg_p1[s] - d.sg_p0[s]) * (t - t0) / (t1 - t0)
        tb = d.sg_table[s]
        ix = d.sg_idx[s]
        if tb == 0:
            d.el_alpha[ix] = val
        elif tb == 1:
            d.el_delta[ix] = val
        elif tb == 2:
            d.syn_w[ix] = val
        elif tb == 3:
            d.i_base[ix] = val
        elif tb == 4:
            d.gap_g[ix] = val


cdef inline void _applied_current(NetC* d, double t) noexcept nogil:
    cdef int s, k
    cdef double t0, t1, u, period, j
    for s in range(d.n_seg):
        k = d.sg_kind[s]
        if k == 3:
            continue
        t0 = d.sg_t0[s]
        if k == 0:
            if t0 <= t < d.sg_t1[s]:
                d.i_acc[d.sg_node[s]] += d.sg_p0[s]
        elif k == 1:
            u = t - t0
            period = d.sg_p2[s]
            if u >= 0.0 and period > 0.0:
                j = floor(u / period)
                if j < d.sg_p3[s] and (u - j * period) < d.sg_p1[s]:
                    d.i_acc[d.sg_node[s]] += d.sg_p0[s]
        elif k == 2:
            if t >= t0:
                t1 = d.sg_t1[s]
                if t >= t1 or t1 <= t0:
                    d.i_acc[d.sg_node[s]] += d.sg_p1[s]
                else:
                    d.i_acc[d.sg_node[s]] += d.sg_p0[s] + (d.sg_p1[s] - d.sg_p0[s]) * (t - t0) / (t1 - t0)


cdef void _net_rhs(NetC* d, double t, double* y, double* dy) noexcept nogil:
    cdef int i, e, p, st, a, b
    cdef double v, vx, f, cur, ip

    _apply_params(d, t)
    for i in range(d.n_nodes):
        d.i_acc[i] = d.i_base[i]
    _applied_current(d, t)

    for e in range(d.n_gap):
        a = d.gap_a[e]
        b = d.gap_b[e]
        cur = d.gap_g[e] * (y[d.node_off[b]] - y[d.node_off[a]])
        d.i_acc[a] += cur
        d.i_acc[b] -= cur

    for e in range(d.n_syn):
        st = d.syn_state[e]
        d.i_acc[d.syn_post[e]] += d.syn_w[e] * _sigmoid(d.syn_beta[e] * (y[st] - d.syn_delta[e]))
        dy[st] = (y[d.node_off[d.syn_pre[e]]] - y[st]) / d.syn_tau[e]

    for e in range(d.n_el):
        i = d.el_node[e]
        st = d.el_state[e]
        if st < 0:
            vx = y[d.node_off[i]]
        else:
            vx = y[st]
            dy[st] = (y[d.node_off[i]] - vx) / d.el_tau[e]
        f = d.el_sign[e] * d.el_alpha[e] * tanh((vx - d.el_delta[e]) * d.el_w[e])
        d.i_acc[i] -= f

    for i in range(d.n_nodes):
        v = y[d.node_off[i]]
        ip = d.pas_lin_g[i] * (v - d.pas_lin_e[i])
        for p in range(d.pas_off[i], d.pas_off[i + 1]):
            ip += d.pas_a[p] * tanh((v - d.pas_d[p]) * d.pas_w[p])
        dy[d.node_off[i]] = (d.i_acc[i] - ip) / d.c[i]


cdef class _NetHandle:
    """Owns the coerced arrays backing a NetC struct."""
    cdef NetC d
    cdef list keep

    def __init__(self, desc, seg):
        self.keep = []
        cdef cnp.ndarray a

        def f8(x):
            arr = np.ascontiguousarray(x, dtype=np.float64)
            self.keep.append(arr)
            return arr

        def i4(x):
            arr = np.ascontiguousarray(x, dtype=np.int32)
            self.keep.append(arr)
            return arr

        n = int(desc["n_nodes"])
        self.d.n_nodes = n
        self.d.dim = int(desc["dim"])
        self.d.n_el = len(desc["el_node"])
        self.d.n_syn = len(desc["syn_pre"])
        self.d.n_gap = len(desc["gap_a"])
        self.d.n_seg = len(seg["kind"])

        a = i4(desc["node_off"]); self.d.node_off = iptr(a)
        a = f8(desc["c"]); self.d.c = dptr(a)
        a = f8(np.array(desc["i_base"], dtype=np.float64)); self.d.i_base = dptr(a)
        a = f8(desc["pas_lin_g"]); self.d.pas_lin_g = dptr(a)
        a = f8(desc["pas_lin_e"]); self.d.pas_lin_e = dptr(a)
        a = i4(desc["pas_off"]); self.d.pas_off = iptr(a)
        a = f8(desc["pas_a"]); self.d.pas_a = dptr(a)
        a = f8(desc["pas_d"]); self.d.pas_d = dptr(a)
        a = f8(desc["pas_w"]); self.d.pas_w = dptr(a)
        a = i4(desc["el_node"]); self.d.el_node = iptr(a)
        a = f8(desc["el_sign"]); self.d.el_sign = dptr(a)
        a = f8(np.array(desc["el_alpha"], dtype=np.float64)); self.d.el_alpha = dptr(a)
        a = f8(np.array(desc["el_delta"], dtype=np.float64)); self.d.el_delta = dptr(a)
        a = f8(desc["el_w"]); self.d.el_w = dptr(a)
        a = f8(desc["el_tau"]); self.d.el_tau = dptr(a)
        a = i4(desc["el_state"]); self.d.el_state = iptr(a)
        a = i4(desc["syn_pre"]); self.d.syn_pre = iptr(a)
        a = i4(desc["syn_post"]); self.d.syn_post = iptr(a)
        a = f8(np.array(desc["syn_w"], dtype=np.float64)); self.d.syn_w = dptr(a)
        a = f8(desc["syn_beta"]); self.d.syn_beta = dptr(a)
        a = f8(desc["syn_delta"]); self.d.syn_delta = dptr(a)
        a = f8(desc["syn_tau"]); self.d.syn_tau = dptr(a)
        a = i4(desc["syn_state"]); self.d.syn_state = iptr(a)
        a = i4(desc["gap_a"]); self.d.gap_a = iptr(a)
        a = i4(desc["gap_b"]); self.d.gap_b = iptr(a)
        a = f8(np.array(desc["gap_g"], dtype=np.float64)); self.d.gap_g = dptr(a)
        a = i4(seg["kind"]); self.d.sg_kind = iptr(a)
        a = i4(seg["node"]); self.d.sg_node = iptr(a)
        a = i4(seg["table"]); self.d.sg_table = iptr(a)
        a = i4(seg["idx"]); self.d.sg_idx = iptr(a)
        a = f8(seg["t0"]); self.d.sg_t0 = dptr(a)
        a = f8(seg["t1"]); self.d.sg_t1 = dptr(a)
        a = f8(seg["p0"]); self.d.sg_p0 = dptr(a)
        a = f8(seg["p1"]); self.d.sg_p1 = dptr(a)
        a = f8(seg["p2"]); self.d.sg_p2 = dptr(a)
        a = f8(seg["p3"]); self.d.sg_p3 = dptr(a)
        a = f8(np.zeros(n)); self.d.i_acc = dptr(a)


def net_rhs(desc, seg, t, y):
    """Single right-hand-side evaluation (parameter ramps applied at ``t``)."""
    cdef _NetHandle h = _NetHandle(desc, seg)
    yv = np.ascontiguousarray(y, dtype=np.float64)
    dyv = np.zeros_like(yv)
    _net_rhs(&h.d, t, dptr(yv), dptr(dyv))
    return dyv


def net_run(desc, seg, y0, double t0, double dt, long n_steps, long stride):
    """Fixed-step RK4 over the network descriptor.

    Records rows at steps 0, stride, 2*stride, ...; ``n_steps`` must be a
    multiple of ``stride``.  Returns (times, states, final_state).
    """
    if n_steps % stride:
        raise ValueError("n_steps must be a multiple of stride")
    cdef _NetHandle h = _NetHandle(desc, seg)
    cdef cnp.ndarray yv = np.array(y0, dtype=np.float64)
    cdef int dim = yv.shape[0]
    cdef long rows = n_steps // stride + 1
    out = np.empty((rows, dim))
    times = t0 + dt * stride * np.arange(rows)

    scratch = np.empty((6, dim))
    cdef double* y = dptr(yv)
    cdef double* k1 = dptr(scratch) + 0 * dim
    cdef double* k2 = dptr(scratch) + 1 * dim
    cdef double* k3 = dptr(scratch) + 2 * dim
    cdef double* k4 = dptr(scratch) + 3 * dim
    cdef double* yt = dptr(scratch) + 4 * dim
    cdef double* yn = dptr(scratch) + 5 * dim
    cdef double* po = dptr(out)
    cdef long step, row
    cdef int j
    cdef double t
    cdef NetC* d = &h.d

    memcpy(po, y, dim * sizeof(double))
    with nogil:
        for step in range(n_steps):
            t = t0 + step * dt
            _net_rhs(d, t, y, k1)
            for j in range(dim):
                yt[j] = y[j] + 0.5 * dt * k1[j]
            _net_rhs(d, t + 0.5 * dt, yt, k2)
            for j in range(dim):
                yt[j] = y[j] + 0.5 * dt * k2[j]
            _net_rhs(d, t + 0.5 * dt, yt, k3)
            for j in range(dim):
                yt[j] = y[j] + dt * k3[j]
            _net_rhs(d, t + dt, yt, k4)
            for j in range(dim):
                y[j] = y[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if (step + 1) % stride == 0:
                row = (step + 1) // stride
                memcpy(po + row * dim, y, dim * sizeof(double))
    return times, out, yv


# -- conductance models ------------------------------------------------------

MODEL_HH = 1
MODEL_R15 = 2


cdef inline double _vtrap(double x, double k) noexcept nogil:
    if fabs(x) < 1e-6 * k:
        return k + 0.5 * x
    return x / (1.0 - exp(-x / k))


cdef inline double _qtrap(double x, double k) noexcept nogil:
    if fabs(x) < 1e-6 * k:
        return k - 0.5 * x
    return x / (exp(x / k) - 1.0)


cdef void _hh_rhs(double* p, double t, double* y, double i_app, double* dy) noexcept nogil:
    cdef double v = y[0], m = y[1], h = y[2], n = y[3]
    cdef double am = 0.1 * _vtrap(v + 40.0, 10.0)
    cdef double bm = 4.0 * exp(-(v + 65.0) / 18.0)
    cdef double ah = 0.07 * exp(-(v + 65.0) / 20.0)
    cdef double bh = 1.0 / (1.0 + exp(-(v + 35.0) / 10.0))
    cdef double an = 0.01 * _vtrap(v + 55.0, 10.0)
    cdef double bn = 0.125 * exp(-(v + 65.0) / 80.0)
    cdef double ina = p[1] * m * m * m * h * (v - p[4])
    cdef double ik = p[2] * n * n * n * n * (v - p[5])
    cdef double il = p[3] * (v - p[6])
    dy[0] = (i_app - ina - ik - il) / p[0]
    dy[1] = am * (1.0 - m) - bm * m
    dy[2] = ah * (1.0 - h) - bh * h
    dy[3] = an * (1.0 - n) - bn * n


cdef void _r15_rhs(double* p, double t, double* y, double i_app, double* dy) noexcept nogil:
    cdef double v = y[0], h = y[1], n = y[2], x = y[3], ca = y[4]
    cdef double vs = (127.0 * v + 8265.0) / 105.0
    cdef double am = 0.1 * _qtrap(50.0 - vs, 10.0)
    cdef double bm = 4.0 * exp((25.0 - vs) / 18.0)
    cdef double ah = 0.07 * exp((25.0 - vs) / 20.0)
    cdef double bh = 1.0 / (1.0 + exp((55.0 - vs) / 10.0))
    cdef double an = 0.01 * _qtrap(55.0 - vs, 10.0)
    cdef double bn = 0.125 * exp((45.0 - vs) / 80.0)
    cdef double minf = am / (am + bm)
    cdef double i_fast = p[1] * minf * minf * minf * h * (v - p[6])
    cdef double i_slow = p[2] * x * (v - p[6])
    cdef double i_k = p[3] * n * n * n * n * (v - p[7])
    cdef double i_kca = p[4] * (ca / (0.5 + ca)) * (v - p[7])
    cdef double i_l = p[5] * (v - p[8])
    cdef double xinf = 1.0 / (1.0 + exp(-p[14] * (v - p[15])))
    dy[0] = (i_app - i_fast - i_slow - i_k - i_kca - i_l) / p[0]
    dy[1] = ((ah / (ah + bh)) - h) * (ah + bh) / p[13]
    dy[2] = ((an / (an + bn)) - n) * (an + bn) / p[13]
    dy[3] = (xinf - x) / p[12]
    dy[4] = p[11] * (p[10] * x * (p[9] - v) - ca)


cdef double _seg_current_scalar(NetC* d, double t) noexcept nogil:
    cdef double total = 0.0
    cdef int s, k
    cdef double t0, t1, u, period, j
    for s in range(d.n_seg):
        k = d.sg_kind[s]
        t0 = d.sg_t0[s]
        if k == 0:
            if t0 <= t < d.sg_t1[s]:
                total += d.sg_p0[s]
        elif k == 1:
            u = t - t0
            period = d.sg_p2[s]
            if u >= 0.0 and period > 0.0:
                j = floor(u / period)
                if j < d.sg_p3[s] and (u - j * period) < d.sg_p1[s]:
                    total += d.sg_p0[s]
        elif k == 2:
            if t >= t0:
                t1 = d.sg_t1[s]
                if t >= t1 or t1 <= t0:
                    total += d.sg_p1[s]
                else:
                    total += d.sg_p0[s] + (d.sg_p1[s] - d.sg_p0[s]) * (t - t0) / (t1 - t0)
    return total


cdef int _model_dim(long model_id) except -1:
    if model_id == 1:
        return 4
    if model_id == 2:
        return 5
    raise KeyError(model_id)


def model_rhs(long model_id, params, seg, double t, y, double i_base):
    cdef _NetHandle h = _NetHandle(_dummy_desc(), seg)
    pv = np.ascontiguousarray(params, dtype=np.float64)
    yv = np.ascontiguousarray(y, dtype=np.float64)
    dim = _model_dim(model_id)
    dy = np.zeros(dim)
    cdef double i_app = i_base + _seg_current_scalar(&h.d, t)
    if model_id == 1:
        _hh_rhs(dptr(pv), t, dptr(yv), i_app, dptr(dy))
    else:
        _r15_rhs(dptr(pv), t, dptr(yv), i_app, dptr(dy))
    return dy


def _dummy_desc():
    zi = np.zeros(0, dtype=np.int32)
    z = np.zeros(0)
    return {"n_nodes": 0, "dim": 0, "node_off": np.zeros(1, dtype=np.int32),
            "c": z, "i_base": z, "pas_lin_g": z, "pas_lin_e": z,
            "pas_off": np.zeros(1, dtype=np.int32), "pas_a": z, "pas_d": z, "pas_w": z,
            "el_node": zi, "el_sign": z, "el_alpha": z, "el_delta": z, "el_w": z,
            "el_tau": z, "el_state": zi, "syn_pre": zi, "syn_post": zi, "syn_w": z,
            "syn_beta": z, "syn_delta": z, "syn_tau": z, "syn_state": zi,
            "gap_a": zi, "gap_b": zi, "gap_g": z}


def model_run(long model_id, params, seg, y0, double t0, double dt,
              long n_steps, long stride, double i_base):
    """Fixed-step RK4 over a built-in conductance model."""
    if n_steps % stride:
        raise ValueError("n_steps must be a multiple of stride")
    cdef int dim = _model_dim(model_id)
    cdef cnp.ndarray yv = np.array(y0, dtype=np.float64)
    if yv.shape[0] != dim:
        raise ValueError(f"model {model_id} expects {dim} states")
    cdef _NetHandle h = _NetHandle(_dummy_desc(), seg)
    pv = np.ascontiguousarray(params, dtype=np.float64)
    cdef long rows = n_steps // stride + 1
    out = np.empty((rows, dim))
    times = t0 + dt * stride * np.arange(rows)

    scratch = np.empty((5, dim))
    cdef double* y = dptr(yv)
    cdef double* k1 = dptr(scratch) + 0 * dim
    cdef double* k2 = dptr(scratch) + 1 * dim
    cdef double* k3 = dptr(scratch) + 2 * dim
    cdef double* k4 = dptr(scratch) + 3 * dim
    cdef double* yt = dptr(scratch) + 4 * dim
    cdef double* po = dptr(out)
    cdef double* p = dptr(pv)
    cdef NetC* d = &h.d
    cdef long step, row
    cdef int j
    cdef double t, ia, ib, ic
    cdef bint is_hh = model_id == 1

    memcpy(po, y, dim * sizeof(double))
    with nogil:
        for step in range(n_steps):
            t = t0 + step * dt
            ia = i_base + _seg_current_scalar(d, t)
            ib = i_base + _seg_current_scalar(d, t + 0.5 * dt)
            ic = i_base + _seg_current_scalar(d, t + dt)
            if is_hh:
                _hh_rhs(p, t, y, ia, k1)
                for j in range(dim):
                    yt[j] = y[j] + 0.5 * dt * k1[j]
                _hh_rhs(p, t, yt, ib, k2)
                for j in range(dim):
                    yt[j] = y[j] + 0.5 * dt * k2[j]
                _hh_rhs(p, t, yt, ib, k3)
                for j in range(dim):
                    yt[j] = y[j] + dt * k3[j]
                _hh_rhs(p, t, yt, ic, k4)
            else:
                _r15_rhs(p, t, y, ia, k1)
                for j in range(dim):
                    yt[j] = y[j] + 0.5 * dt * k1[j]
                _r15_rhs(p, t, yt, ib, k2)
                for j in range(dim):
                    yt[j] = y[j] + 0.5 * dt * k2[j]
                _r15_rhs(p, t, yt, ib, k3)
                for j in range(dim):
                    yt[j] = y[j] + dt * k3[j]
                _r15_rhs(p, t, yt, ic, k4)
            for j in range(dim):
                y[j] = y[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if (step + 1) % stride == 0:
                row = (step + 1) // stride
                memcpy(po + row * dim, y, dim * sizeof(double))
    return times, out, yv
