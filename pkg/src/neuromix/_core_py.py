"""Pure-python integration kernels.

Fallback implementation selected by :mod:`neuromix.kernels` when the compiled
extension is unavailable (or when ``NEUROMIX_PURE=1``).  The API and the
arithmetic mirror ``_core.pyx`` exactly; traces are bit-identical across
reruns of the same implementation but only float-close across the two.

Descriptor contract (all arrays preallocated by the caller, see
:func:`neuromix.sim.build_net_desc`):

``desc`` dict
    n_nodes          int
    node_off         int32[n+1]   state index of each node's voltage
    c, i_base        float64[n]
    pas_lin_g/pas_lin_e  float64[n]
    pas_off          int32[n+1]   per-node slice into the tanh-sum terms
    pas_a, pas_d, pas_w  float64[P]
    el_node          int32[m]
    el_sign, el_alpha, el_delta, el_w, el_tau  float64[m]
    el_state         int32[m]     -1 when the element filter is instantaneous
    syn_pre, syn_post, syn_state  int32[k]
    syn_w, syn_beta, syn_delta, syn_tau  float64[k]
    gap_a, gap_b     int32[g]
    gap_g            float64[g]
    dim              int

``seg`` dict (time-dependent drive; all float64/int32 arrays of length s)
    kind   0 = current step, 1 = current pulse train, 2 = current ramp,
           3 = parameter ramp
    node   target node for current kinds (-1 otherwise)
    table  parameter-ramp target: 0 el_alpha, 1 el_delta, 2 syn_w,
           3 i_base, 4 gap_g
    idx    index into the target table
    t0, t1, p0, p1, p2, p3   kind-specific, see _applied_current/_apply_params

Element currents are subtracted from the membrane (outward positive), while
synaptic and resistive currents are added (inward positive).
"""

from __future__ import annotations

import math

import numpy as np

IMPLEMENTATION = "python"

_N_TABLES = 5


def empty_segments() -> dict:
    z = np.zeros(0)
    zi = np.zeros(0, dtype=np.int32)
    return {"kind": zi, "node": zi, "table": zi, "idx": zi,
            "t0": z, "t1": z, "p0": z, "p1": z, "p2": z, "p3": z}


def _live_tables(desc):
    # copies the caller's parameter arrays so ramps never mutate the spec
    return [desc["el_alpha"].copy(), desc["el_delta"].copy(), desc["syn_w"].copy(),
            desc["i_base"].copy(), desc["gap_g"].copy()]


def _apply_params(seg, live, t):
    kind = seg["kind"]
    for s in range(kind.shape[0]):
        if kind[s] != 3:
            continue
        t0 = seg["t0"][s]
        if t < t0:
            continue
        t1 = seg["t1"][s]
        if t >= t1 or t1 <= t0:
            val = seg["p1"][s]
        else:
            val = seg["p0"][s] + (seg["p1"][s] - seg["p0"][s]) * (t - t0) / (t1 - t0)
        live[seg["table"][s]][seg["idx"][s]] = val


def _applied_current(seg, i_acc, t):
    kind = seg["kind"]
    for s in range(kind.shape[0]):
        k = kind[s]
        if k == 3:
            continue
        t0 = seg["t0"][s]
        node = seg["node"][s]
        if k == 0:
            if t0 <= t < seg["t1"][s]:
                i_acc[node] += seg["p0"][s]
        elif k == 1:
            u = t - t0
            period = seg["p2"][s]
            if u >= 0.0 and period > 0.0:
                j = math.floor(u / period)
                if j < seg["p3"][s] and (u - j * period) < seg["p1"][s]:
                    i_acc[node] += seg["p0"][s]
        elif k == 2:
            if t >= t0:
                t1 = seg["t1"][s]
                if t >= t1 or t1 <= t0:
                    i_acc[node] += seg["p1"][s]
                else:
                    i_acc[node] += seg["p0"][s] + (seg["p1"][s] - seg["p0"][s]) * (t - t0) / (t1 - t0)


def _sigmoid(x):
    # logistic, overflow-safe for large negative arguments
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _net_rhs(desc, seg, live, t, y, dy):
    n = desc["n_nodes"]
    node_off = desc["node_off"]
    v = y[node_off[:n]]

    _apply_params(seg, live, t)
    el_alpha, el_delta, syn_w, i_base, gap_g = live

    i_acc = i_base.copy()
    _applied_current(seg, i_acc, t)

    # resistive (gap) edges: diffusive, antisymmetric
    gap_a, gap_b = desc["gap_a"], desc["gap_b"]
    for e in range(gap_a.shape[0]):
        cur = gap_g[e] * (v[gap_b[e]] - v[gap_a[e]])
        i_acc[gap_a[e]] += cur
        i_acc[gap_b[e]] -= cur

    # synaptic edges: filtered presynaptic voltage through a sigmoid
    syn_state = desc["syn_state"]
    if syn_state.shape[0]:
        s_val = y[syn_state]
        i_syn = syn_w * _sigmoid(desc["syn_beta"] * (s_val - desc["syn_delta"]))
        np.add.at(i_acc, desc["syn_post"], i_syn)
        dy[syn_state] = (v[desc["syn_pre"]] - s_val) / desc["syn_tau"]

    # feedback elements
    el_state = desc["el_state"]
    el_node = desc["el_node"]
    inst = el_state < 0
    vx = np.where(inst, v[el_node], y[np.where(inst, 0, el_state)])
    f = desc["el_sign"] * el_alpha * np.tanh((vx - el_delta) * desc["el_w"])
    np.subtract.at(i_acc, el_node, f)
    has_state = ~inst
    if np.any(has_state):
        st = el_state[has_state]
        dy[st] = (v[el_node[has_state]] - y[st]) / desc["el_tau"][has_state]

    # passive element and membrane equation
    ip = desc["pas_lin_g"] * (v - desc["pas_lin_e"])
    pas_off = desc["pas_off"]
    if desc["pas_a"].shape[0]:
        for i in range(n):
            for p in range(pas_off[i], pas_off[i + 1]):
                ip[i] += desc["pas_a"][p] * math.tanh((v[i] - desc["pas_d"][p]) * desc["pas_w"][p])
    dy[node_off[:n]] = (i_acc - ip) / desc["c"]
    return dy


def net_rhs(desc, seg, t, y):
    """Single right-hand-side evaluation (parameter ramps applied at ``t``)."""
    live = _live_tables(desc)
    dy = np.zeros_like(np.asarray(y, dtype=float))
    return _net_rhs(desc, seg, live, t, np.asarray(y, dtype=float), dy).copy()


def net_run(desc, seg, y0, t0, dt, n_steps, stride):
    """Fixed-step RK4 over the network descriptor.

    Records rows at steps 0, stride, 2*stride, ...; ``n_steps`` must be a
    multiple of ``stride``.  Returns (times, states, final_state).
    """
    if n_steps % stride:
        raise ValueError("n_steps must be a multiple of stride")
    y = np.array(y0, dtype=float)
    dim = y.shape[0]
    rows = n_steps // stride + 1
    out = np.empty((rows, dim))
    times = t0 + dt * stride * np.arange(rows)
    out[0] = y
    live = _live_tables(desc)

    k1 = np.zeros(dim)
    k2 = np.zeros(dim)
    k3 = np.zeros(dim)
    k4 = np.zeros(dim)
    for step in range(n_steps):
        t = t0 + step * dt
        _net_rhs(desc, seg, live, t, y, k1)
        _net_rhs(desc, seg, live, t + 0.5 * dt, y + (0.5 * dt) * k1, k2)
        _net_rhs(desc, seg, live, t + 0.5 * dt, y + (0.5 * dt) * k2, k3)
        _net_rhs(desc, seg, live, t + dt, y + dt * k3, k4)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (step + 1) % stride == 0:
            out[(step + 1) // stride] = y
    return times, out, y


# -- conductance models ------------------------------------------------------

MODEL_HH = 1
MODEL_R15 = 2


def _vtrap(x, k):
    # x / (1 - exp(-x/k)) without the 0/0 at x = 0
    if abs(x) < 1e-6 * k:
        return k + 0.5 * x
    return x / (1.0 - math.exp(-x / k))


def _qtrap(x, k):
    # x / (exp(x/k) - 1) without the 0/0 at x = 0
    if abs(x) < 1e-6 * k:
        return k - 0.5 * x
    return x / (math.exp(x / k) - 1.0)


def _hh_rhs(p, t, y, i_app):
    v, m, h, n = y
    c, gna, gk, gl, ena, ek, el = p[:7]
    am = 0.1 * _vtrap(v + 40.0, 10.0)
    bm = 4.0 * math.exp(-(v + 65.0) / 18.0)
    ah = 0.07 * math.exp(-(v + 65.0) / 20.0)
    bh = 1.0 / (1.0 + math.exp(-(v + 35.0) / 10.0))
    an = 0.01 * _vtrap(v + 55.0, 10.0)
    bn = 0.125 * math.exp(-(v + 65.0) / 80.0)
    ina = gna * m * m * m * h * (v - ena)
    ik = gk * n * n * n * n * (v - ek)
    il = gl * (v - el)
    return (
        (i_app - ina - ik - il) / c,
        am * (1.0 - m) - bm * m,
        ah * (1.0 - h) - bh * h,
        an * (1.0 - n) - bn * n,
    )


def _r15_rhs(p, t, y, i_app):
    v, h, n, x, ca = y
    (c, g_i, g_t, g_k, g_kca, g_l, v_i, v_k, v_l, v_ca,
     kc, rho, tau_x, rate_scale, x_slope, x_half) = p[:16]
    vs = (127.0 * v + 8265.0) / 105.0
    am = 0.1 * _qtrap(50.0 - vs, 10.0)
    bm = 4.0 * math.exp((25.0 - vs) / 18.0)
    ah = 0.07 * math.exp((25.0 - vs) / 20.0)
    bh = 1.0 / (1.0 + math.exp((55.0 - vs) / 10.0))
    an = 0.01 * _qtrap(55.0 - vs, 10.0)
    bn = 0.125 * math.exp((45.0 - vs) / 80.0)
    minf = am / (am + bm)
    i_fast = g_i * minf * minf * minf * h * (v - v_i)
    i_slow = g_t * x * (v - v_i)
    i_k = g_k * n * n * n * n * (v - v_k)
    i_kca = g_kca * (ca / (0.5 + ca)) * (v - v_k)
    i_l = g_l * (v - v_l)
    xinf = 1.0 / (1.0 + math.exp(-x_slope * (v - x_half)))
    return (
        (i_app - i_fast - i_slow - i_k - i_kca - i_l) / c,
        ((ah / (ah + bh)) - h) * (ah + bh) / rate_scale,
        ((an / (an + bn)) - n) * (an + bn) / rate_scale,
        (xinf - x) / tau_x,
        rho * (kc * x * (v_ca - v) - ca),
    )


_MODEL_RHS = {MODEL_HH: _hh_rhs, MODEL_R15: _r15_rhs}
_MODEL_DIM = {MODEL_HH: 4, MODEL_R15: 5}


def _seg_current_scalar(seg, t):
    total = 0.0
    kind = seg["kind"]
    for s in range(kind.shape[0]):
        k = kind[s]
        t0 = seg["t0"][s]
        if k == 0:
            if t0 <= t < seg["t1"][s]:
                total += seg["p0"][s]
        elif k == 1:
            u = t - t0
            period = seg["p2"][s]
            if u >= 0.0 and period > 0.0:
                j = math.floor(u / period)
                if j < seg["p3"][s] and (u - j * period) < seg["p1"][s]:
                    total += seg["p0"][s]
        elif k == 2:
            if t >= t0:
                t1 = seg["t1"][s]
                if t >= t1 or t1 <= t0:
                    total += seg["p1"][s]
                else:
                    total += seg["p0"][s] + (seg["p1"][s] - seg["p0"][s]) * (t - t0) / (t1 - t0)
    return total


def model_rhs(model_id, params, seg, t, y, i_base):
    f = _MODEL_RHS[model_id]
    i_app = i_base + _seg_current_scalar(seg, t)
    return np.array(f(params, t, tuple(y), i_app))


def model_run(model_id, params, seg, y0, t0, dt, n_steps, stride, i_base):
    """Fixed-step RK4 over a built-in conductance model (scalar loop)."""
    if n_steps % stride:
        raise ValueError("n_steps must be a multiple of stride")
    f = _MODEL_RHS[model_id]
    dim = _MODEL_DIM[model_id]
    y = tuple(float(val) for val in y0)
    if len(y) != dim:
        raise ValueError(f"model {model_id} expects {dim} states")
    rows = n_steps // stride + 1
    out = np.empty((rows, dim))
    times = t0 + dt * stride * np.arange(rows)
    out[0] = y
    for step in range(n_steps):
        t = t0 + step * dt
        ia = i_base + _seg_current_scalar(seg, t)
        ib = i_base + _seg_current_scalar(seg, t + 0.5 * dt)
        ic = i_base + _seg_current_scalar(seg, t + dt)
        k1 = f(params, t, y, ia)
        k2 = f(params, t, tuple(y[j] + 0.5 * dt * k1[j] for j in range(dim)), ib)
        k3 = f(params, t, tuple(y[j] + 0.5 * dt * k2[j] for j in range(dim)), ib)
        k4 = f(params, t, tuple(y[j] + dt * k3[j] for j in range(dim)), ic)
        y = tuple(y[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                  for j in range(dim))
        if (step + 1) % stride == 0:
            out[(step + 1) // stride] = y
    return times, out, np.array(y)
