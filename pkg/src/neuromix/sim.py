"""Time-domain simulation and firing-pattern analysis.

Integration is fixed-step RK4 through the kernel layer (compiled when
available).  A simulation is described by:

* one spec or a list of specs plus coupling edges,
* a baseline current per node,
* an optional protocol: a sequence of segments that add time-dependent
  drive (current steps, pulse trains, ramps) or ramp a named parameter.

Analysis utilities turn voltage traces into spike times, bursts, and a
behavior label (resting / spiking / bursting / irregular), and build f-I
curves from repeated runs.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import NeuronSpec
from .ivcurve import iv_curve, steady_state_roots

__all__ = [
    "CurrentStep", "PulseTrain", "CurrentRamp", "ParamRamp",
    "Trace", "BehaviorReport", "FICurve", "PulseResponse", "ReboundReport",
    "build_net_desc", "build_protocol", "default_dt", "rest_state",
    "simulate", "simulate_net", "simulate_adaptive",
    "detect_spikes", "segment_bursts", "classify_trace", "classify_behavior",
    "measure_fI_curve", "classify_onset", "pulse_train_response", "rebound_test",
    "AllOrNoneReport", "pulse_response_test", "refine_threshold",
    "BEHAVIORS", "DEFAULT_MIN_SPAN",
]

BEHAVIORS = ("resting", "spiking", "bursting", "irregular")

# voltage excursions smaller than this are treated as subthreshold noise
DEFAULT_MIN_SPAN = 0.5

# burst boundaries: gaps longer than this multiple of the short-ISI median
BURST_GAP_FACTOR = 3.0

# settle for this many slowest time constants before judging a pattern,
# then watch for at least this many
SETTLE_TAU = 3.0
WINDOW_TAU = 10.0


# -- protocol segments --------------------------------------------------------

@dataclass(frozen=True)
class CurrentStep:
    """Adds ``amplitude`` to the node's current on [t0, t1)."""
    amplitude: float
    t0: float
    t1: float
    node: int = 0


@dataclass(frozen=True)
class PulseTrain:
    """``count`` pulses of ``width`` starting at t0, one per ``period``."""
    amplitude: float
    t0: float
    width: float
    period: float
    count: int
    node: int = 0

    @property
    def t_end(self) -> float:
        return self.t0 + (self.count - 1) * self.period + self.width


@dataclass(frozen=True)
class CurrentRamp:
    """Linear sweep from i0 to i1 over [t0, t1]; holds i1 afterwards."""
    i0: float
    i1: float
    t0: float
    t1: float
    node: int = 0


@dataclass(frozen=True)
class ParamRamp:
    """Sweeps a named parameter from v0 to v1 over [t0, t1], holding v1 after.

    Paths: ``node{i}.{label}.alpha``, ``node{i}.{label}.delta``,
    ``node{i}.i_base``, ``syn{k}.weight``, ``gap{k}.g``.
    """
    path: str
    v0: float
    v1: float
    t0: float
    t1: float


_PATH_RE = re.compile(
    r"^(?:node(?P<node>\d+)\.(?:(?P<label>[A-Za-z_][\w]*)\.(?P<field>alpha|delta)|(?P<ibase>i_base))"
    r"|syn(?P<syn>\d+)\.weight|gap(?P<gap>\d+)\.g)$")


def _resolve_path(desc: dict, path: str) -> tuple[int, int]:
    m = _PATH_RE.match(path)
    if not m:
        raise ValueError(f"cannot parse parameter path {path!r}")
    if m["syn"] is not None:
        k = int(m["syn"])
        if k >= len(desc["syn_pre"]):
            raise ValueError(f"synapse index {k} out of range")
        return 2, k
    if m["gap"] is not None:
        k = int(m["gap"])
        if k >= len(desc["gap_a"]):
            raise ValueError(f"gap index {k} out of range")
        return 4, k
    node = int(m["node"])
    if node >= desc["n_nodes"]:
        raise ValueError(f"node index {node} out of range")
    if m["ibase"] is not None:
        return 3, node
    key = (node, m["label"])
    lookup = desc["_el_lookup"]
    if key not in lookup:
        raise ValueError(f"no element {m['label']!r} on node {node}")
    return (0 if m["field"] == "alpha" else 1), lookup[key]


def build_protocol(desc: dict, segments) -> dict:
    """Convert segment objects into the kernel's flat arrays."""
    segs = list(segments)
    n = len(segs)
    seg = {"kind": np.zeros(n, dtype=np.int32), "node": np.zeros(n, dtype=np.int32),
           "table": np.zeros(n, dtype=np.int32), "idx": np.zeros(n, dtype=np.int32),
           "t0": np.zeros(n), "t1": np.zeros(n), "p0": np.zeros(n),
           "p1": np.zeros(n), "p2": np.zeros(n), "p3": np.zeros(n)}
    for j, s in enumerate(segs):
        if isinstance(s, CurrentStep):
            seg["kind"][j] = 0
            seg["node"][j] = s.node
            seg["t0"][j], seg["t1"][j] = s.t0, s.t1
            seg["p0"][j] = s.amplitude
        elif isinstance(s, PulseTrain):
            if s.width > s.period:
                raise ValueError("pulse width exceeds period")
            seg["kind"][j] = 1
            seg["node"][j] = s.node
            seg["t0"][j], seg["t1"][j] = s.t0, s.t_end
            seg["p0"][j], seg["p1"][j] = s.amplitude, s.width
            seg["p2"][j], seg["p3"][j] = s.period, float(s.count)
        elif isinstance(s, CurrentRamp):
            seg["kind"][j] = 2
            seg["node"][j] = s.node
            seg["t0"][j], seg["t1"][j] = s.t0, s.t1
            seg["p0"][j], seg["p1"][j] = s.i0, s.i1
        elif isinstance(s, ParamRamp):
            table, idx = _resolve_path(desc, s.path)
            seg["kind"][j] = 3
            seg["node"][j] = -1
            seg["table"][j], seg["idx"][j] = table, idx
            seg["t0"][j], seg["t1"][j] = s.t0, s.t1
            seg["p0"][j], seg["p1"][j] = s.v0, s.v1
        else:
            raise TypeError(f"unknown protocol segment {type(s).__name__}")
    return seg


# -- descriptor assembly ------------------------------------------------------

def build_net_desc(specs, i_base=None, synapses=(), gaps=()) -> dict:
    """Flatten specs plus coupling edges into the kernel descriptor.

    State layout: per node a block [v, filtered element states...], in spec
    order, followed by one filter state per synapse.
    """
    specs = [specs] if isinstance(specs, NeuronSpec) else list(specs)
    n = len(specs)
    if i_base is None:
        i_base = [0.0] * n
    elif np.isscalar(i_base):
        i_base = [float(i_base)] * n
    if len(i_base) != n:
        raise ValueError("i_base length must match the number of nodes")
    for sp in specs:
        sp.require_valid()

    node_off = np.zeros(n + 1, dtype=np.int32)
    names: list[str] = []
    el_rows = []
    pas_terms = []
    pas_off = np.zeros(n + 1, dtype=np.int32)
    pas_lin_g = np.zeros(n)
    pas_lin_e = np.zeros(n)
    lookup: dict[tuple[int, str], int] = {}
    cursor = 0
    for i, sp in enumerate(specs):
        node_off[i] = cursor
        tag = sp.name if n > 1 else ""
        names.append(f"{tag}.v" if tag else "v")
        cursor += 1
        for el in sp.elements:
            state = -1
            if el.tau > 0.0:
                state = cursor
                names.append(f"{tag}.{el.label}" if tag else el.label)
                cursor += 1
            lookup[(i, el.label)] = len(el_rows)
            el_rows.append((i, float(el.sign), el.alpha, el.delta, 1.0, el.tau, state))
        if sp.passive.kind == "linear":
            pas_lin_g[i] = sp.passive.g
            pas_lin_e[i] = sp.passive.e_rev
        else:
            for a, d in sp.passive.terms:
                pas_terms.append((a, d, 1.0))
        pas_off[i + 1] = len(pas_terms)
    node_off[n] = cursor

    syn_rows = []
    for k, syn in enumerate(synapses):
        if not (0 <= syn.pre < n and 0 <= syn.post < n):
            raise ValueError(f"synapse {k} references a missing node")
        if syn.tau <= 0.0:
            raise ValueError(f"synapse {k} needs a positive filter time constant")
        syn_rows.append((syn.pre, syn.post, syn.weight, syn.beta, syn.delta,
                         syn.tau, cursor))
        names.append(f"syn{k}")
        cursor += 1
    gap_rows = []
    for k, gp in enumerate(gaps):
        if not (0 <= gp.a < n and 0 <= gp.b < n):
            raise ValueError(f"gap edge {k} references a missing node")
        gap_rows.append((gp.a, gp.b, gp.g))

    def col(rows, j, dtype=float):
        return np.array([r[j] for r in rows], dtype=dtype)

    desc = {
        "n_nodes": n, "dim": cursor, "node_off": node_off,
        "c": np.array([sp.c for sp in specs]),
        "i_base": np.array([float(v) for v in i_base]),
        "pas_lin_g": pas_lin_g, "pas_lin_e": pas_lin_e, "pas_off": pas_off,
        "pas_a": col(pas_terms, 0), "pas_d": col(pas_terms, 1), "pas_w": col(pas_terms, 2),
        "el_node": col(el_rows, 0, np.int32), "el_sign": col(el_rows, 1),
        "el_alpha": col(el_rows, 2), "el_delta": col(el_rows, 3),
        "el_w": col(el_rows, 4), "el_tau": col(el_rows, 5),
        "el_state": col(el_rows, 6, np.int32),
        "syn_pre": col(syn_rows, 0, np.int32), "syn_post": col(syn_rows, 1, np.int32),
        "syn_w": col(syn_rows, 2), "syn_beta": col(syn_rows, 3),
        "syn_delta": col(syn_rows, 4), "syn_tau": col(syn_rows, 5),
        "syn_state": col(syn_rows, 6, np.int32),
        "gap_a": col(gap_rows, 0, np.int32), "gap_b": col(gap_rows, 1, np.int32),
        "gap_g": col(gap_rows, 2),
        "_el_lookup": lookup, "_names": names,
    }
    return desc


def default_dt(specs, synapses=()) -> float:
    """Twentieth of the fastest time constant in play."""
    specs = [specs] if isinstance(specs, NeuronSpec) else list(specs)
    taus = [sp.tau_v() for sp in specs]
    taus += [el.tau for sp in specs for el in sp.elements if el.tau > 0]
    taus += [syn.tau for syn in synapses]
    return min(taus) / 20.0


def rest_state(spec: NeuronSpec, i_app: float, kick: float = 0.05) -> np.ndarray:
    """Initial state at (or near) rest: filters converged, voltage nudged.

    When the steady-state curve is non-monotone the lowest intersection is
    used.
    """
    v_rest = steady_state_roots(spec, i_app)[0]
    y = np.full(spec.dim, v_rest)
    y[0] = v_rest + kick
    return y


@dataclass
class Trace:
    """Recorded trajectory plus enough metadata to interpret it."""
    t: np.ndarray
    y: np.ndarray
    names: list[str]
    node_v_index: list[int]
    meta: dict = field(default_factory=dict)

    def v(self, node: int = 0) -> np.ndarray:
        return self.y[:, self.node_v_index[node]]

    def state(self, name: str) -> np.ndarray:
        return self.y[:, self.names.index(name)]

    def window(self, t_from: float, t_to: float | None = None) -> "Trace":
        mask = self.t >= t_from
        if t_to is not None:
            mask &= self.t <= t_to
        return Trace(self.t[mask], self.y[mask], self.names,
                     self.node_v_index, dict(self.meta))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.t).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        h.update(",".join(self.names).encode())
        return h.hexdigest()


def _run(desc, seg, y0, t0, dt, t_end, record_dt) -> Trace:
    stride = max(1, int(round(record_dt / dt))) if record_dt else 1
    n_steps = int(round((t_end - t0) / dt))
    if n_steps % stride:
        n_steps += stride - n_steps % stride
    t, y, _ = kernels.net_run(desc, seg, np.asarray(y0, dtype=float),
                              t0, dt, n_steps, stride)
    n = desc["n_nodes"]
    return Trace(t=t, y=y, names=list(desc["_names"]),
                 node_v_index=[int(desc["node_off"][i]) for i in range(n)],
                 meta={"dt": dt, "stride": stride, "impl": kernels.IMPLEMENTATION})


def simulate(spec: NeuronSpec, i_app: float = 0.0, t_end: float = 1000.0,
             protocol=(), dt: float | None = None, record_dt: float | None = None,
             y0=None, t0: float = 0.0) -> Trace:
    """Integrate a single spec at constant baseline current plus protocol."""
    desc = build_net_desc(spec, [i_app])
    seg = build_protocol(desc, protocol)
    if dt is None:
        dt = default_dt(spec)
    if y0 is None:
        y0 = rest_state(spec, i_app)
    tr = _run(desc, seg, y0, t0, dt, t_end, record_dt)
    tr.meta["i_app"] = i_app
    return tr


def simulate_net(specs, i_base, synapses=(), gaps=(), t_end: float = 1000.0,
                 protocol=(), dt: float | None = None,
                 record_dt: float | None = None, y0=None, t0: float = 0.0) -> Trace:
    """Integrate a coupled set of specs."""
    desc = build_net_desc(specs, i_base, synapses, gaps)
    seg = build_protocol(desc, protocol)
    if dt is None:
        dt = default_dt(specs, synapses)
    if y0 is None:
        specs_l = [specs] if isinstance(specs, NeuronSpec) else list(specs)
        y0 = np.zeros(desc["dim"])
        for i, sp in enumerate(specs_l):
            v_rest = steady_state_roots(sp, desc["i_base"][i])[0]
            y0[desc["node_off"][i]:desc["node_off"][i] + sp.dim] = v_rest
            y0[desc["node_off"][i]] = v_rest + 0.05
        for k in range(len(desc["syn_pre"])):
            y0[desc["syn_state"][k]] = y0[desc["node_off"][desc["syn_pre"][k]]]
    return _run(desc, seg, y0, t0, dt, t_end, record_dt)


def simulate_adaptive(spec: NeuronSpec, i_app: float, t_end: float,
                      protocol=(), y0=None, rtol: float = 1e-8,
                      atol: float = 1e-10, record_dt: float = 0.5) -> Trace:
    """Adaptive-step reference integration (cross-check, not the main path)."""
    from scipy.integrate import solve_ivp

    desc = build_net_desc(spec, [i_app])
    seg = build_protocol(desc, protocol)
    if y0 is None:
        y0 = rest_state(spec, i_app)
    t_eval = np.arange(0.0, t_end + 0.5 * record_dt, record_dt)
    sol = solve_ivp(lambda t, y: kernels.net_rhs(desc, seg, t, y),
                    (0.0, t_end), np.asarray(y0, dtype=float),
                    method="RK45", t_eval=t_eval, rtol=rtol, atol=atol)
    return Trace(t=sol.t, y=sol.y.T, names=list(desc["_names"]),
                 node_v_index=[0], meta={"impl": "scipy-rk45", "i_app": i_app})


# -- spike and burst analysis -------------------------------------------------

def detect_spikes(t, v, theta_hi: float | None = None,
                  theta_lo: float | None = None,
                  min_span: float = DEFAULT_MIN_SPAN) -> np.ndarray:
    """Peak times of suprathreshold excursions.

    Thresholds default to 60% / 40% of the observed voltage span, with a
    hysteresis pair so noise around one level cannot double-count.  A trace
    whose span is below ``min_span`` contains no spikes by definition.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if len(v) < 3:
        return np.zeros(0)
    lo, hi = float(v.min()), float(v.max())
    if hi - lo < min_span:
        return np.zeros(0)
    if theta_hi is None:
        theta_hi = lo + 0.6 * (hi - lo)
    if theta_lo is None:
        theta_lo = lo + 0.4 * (hi - lo)
    spikes = []
    armed = v[0] < theta_lo
    inside = False
    peak_v = -np.inf
    peak_t = 0.0
    for k in range(len(v)):
        x = v[k]
        if inside:
            if x > peak_v:
                peak_v, peak_t = x, t[k]
            if x < theta_lo:
                spikes.append(peak_t)
                inside = False
                armed = True
        elif armed and x >= theta_hi:
            inside = True
            peak_v, peak_t = x, t[k]
        elif x < theta_lo:
            armed = True
    return np.array(spikes)


def segment_bursts(spike_times) -> list[np.ndarray]:
    """Split spikes into bursts at gaps well above the short-interval median.

    The reference gap is the median of the smaller half of the sorted
    inter-spike intervals (the within-burst ones); a gap more than
    ``BURST_GAP_FACTOR`` times that opens a new burst.
    """
    s = np.asarray(spike_times, dtype=float)
    if len(s) == 0:
        return []
    if len(s) == 1:
        return [s]
    isis = np.diff(s)
    fast_half = np.sort(isis)[:max(1, len(isis) // 2)]
    gap = BURST_GAP_FACTOR * float(np.median(fast_half))
    bursts = []
    start = 0
    for k, isi in enumerate(isis):
        if isi > gap:
            bursts.append(s[start:k + 1])
            start = k + 1
    bursts.append(s[start:])
    return bursts


@dataclass
class BehaviorReport:
    kind: str
    n_spikes: int
    n_bursts: int
    spike_times: np.ndarray
    bursts: list
    spike_rate: float = 0.0
    intraburst_rate: float = 0.0
    interburst_rate: float = 0.0
    interburst_cv: float = float("nan")

    def __str__(self):
        return (f"{self.kind} ({self.n_spikes} spikes, {self.n_bursts} bursts)")


def classify_trace(t, v, min_span: float = DEFAULT_MIN_SPAN) -> BehaviorReport:
    """Label a settled voltage window as resting/spiking/bursting/irregular."""
    spikes = detect_spikes(t, v, min_span=min_span)
    n = len(spikes)
    if n == 0:
        return BehaviorReport("resting", 0, 0, spikes, [])
    bursts = segment_bursts(spikes)
    nb = len(bursts)
    rep = BehaviorReport("irregular", n, nb, spikes, bursts)
    if n >= 2:
        rep.spike_rate = (n - 1) / (spikes[-1] - spikes[0])
    full = [b for b in bursts if len(b) >= 2]
    if full:
        rep.intraburst_rate = float(np.mean([(len(b) - 1) / (b[-1] - b[0]) for b in full]))
    if nb >= 2:
        onsets = np.array([b[0] for b in bursts])
        cycles = np.diff(onsets)
        rep.interburst_rate = 1.0 / float(np.mean(cycles))
        if nb >= 3:
            rep.interburst_cv = float(np.std(cycles) / np.mean(cycles))
    interior = bursts[1:-1] if nb >= 3 else bursts
    if (nb >= 3 and rep.interburst_cv < 0.2
            and all(len(b) >= 2 for b in interior)):
        rep.kind = "bursting"
    elif nb == 1 and n >= 5:
        rep.kind = "spiking"
    return rep


def classify_behavior(spec: NeuronSpec, i_app: float, settle: float | None = None,
                      window: float | None = None, dt: float | None = None,
                      min_span: float = DEFAULT_MIN_SPAN, y0=None,
                      record_dt: float | None = None) -> BehaviorReport:
    """Simulate past the transient, then label the steady firing pattern."""
    slowest = spec.slowest_tau()
    if settle is None:
        settle = SETTLE_TAU * slowest
    if window is None:
        window = WINDOW_TAU * slowest
    tr = simulate(spec, i_app, t_end=settle + window, dt=dt, y0=y0,
                  record_dt=record_dt)
    w = tr.window(settle)
    rep = classify_trace(w.t, w.v(), min_span=min_span)
    return rep


@dataclass
class FICurve:
    i: np.ndarray
    f: np.ndarray
    kinds: list

    def spiking_mask(self) -> np.ndarray:
        return np.array([k == "spiking" for k in self.kinds])


def measure_fI_curve(spec: NeuronSpec, i_values, settle: float = 500.0,
                     window: float = 4000.0, dt: float | None = None,
                     min_span: float = DEFAULT_MIN_SPAN) -> FICurve:
    """Steady firing rate at each applied current.

    Requires a fast regenerative window (the spec must be able to spike at
    all); the slow curve may or may not carry its own fold, which is what
    distinguishes the two onset types this measures.
    """
    fast_tps = iv_curve(spec, "fast").turning_points()
    if len(fast_tps) != 2:
        raise ValueError("f-I curve needs an N-shaped fast curve")
    i_values = np.asarray(i_values, dtype=float)
    f = np.zeros(len(i_values))
    kinds = []
    for k, i_app in enumerate(i_values):
        tr = simulate(spec, float(i_app), t_end=settle + window, dt=dt)
        w = tr.window(settle)
        rep = classify_trace(w.t, w.v(), min_span=min_span)
        kinds.append(rep.kind)
        if rep.n_spikes >= 2:
            f[k] = rep.spike_rate
    fi = FICurve(i=i_values, f=f, kinds=kinds)
    if not np.any(fi.spiking_mask() & (f > 0)):
        raise ValueError("no spiking anywhere on the current grid")
    return fi


def classify_onset(fi: FICurve) -> str:
    """Label the rest-to-spiking onset from a measured f-I curve.

    Continuous onsets reach arbitrarily low frequency: the first spiking
    grid point fires far below the curve's mid-range rate.  Discontinuous
    onsets start near full rate.  Decision rule: with f_onset the frequency
    at the first spiking point and f_mid the frequency at the spiking point
    nearest the middle of the spiking current range, the onset is
    "snic-like" when f_onset / f_mid < 0.2, "hopf-like" when > 0.5, and
    "indeterminate" in between (the band is reported, never rounded away).
    """
    spiking = np.flatnonzero(fi.spiking_mask() & (fi.f > 0))
    if len(spiking) == 0:
        raise ValueError("no spiking anywhere on the current grid")
    order = spiking[np.argsort(fi.i[spiking])]
    i_mid = 0.5 * (fi.i[order[0]] + fi.i[order[-1]])
    mid = order[np.argmin(np.abs(fi.i[order] - i_mid))]
    ratio = fi.f[order[0]] / fi.f[mid]
    if ratio < 0.2:
        return "snic-like"
    if ratio > 0.5:
        return "hopf-like"
    return "indeterminate"


@dataclass
class PulseResponse:
    n_added: int
    n_pulses: int
    pulsed_spikes: np.ndarray
    baseline_spikes: np.ndarray


def pulse_train_response(spec: NeuronSpec, i_app: float, amplitude: float,
                         width: float, period: float, count: int,
                         settle: float | None = None, tail: float | None = None,
                         dt: float | None = None,
                         min_span: float = DEFAULT_MIN_SPAN) -> PulseResponse:
    """Count spikes added by a pulse train relative to the unperturbed run."""
    slowest = spec.slowest_tau()
    if settle is None:
        settle = SETTLE_TAU * slowest
    if tail is None:
        tail = period
    t_end = settle + count * period + tail
    train = PulseTrain(amplitude=amplitude, t0=settle, width=width,
                       period=period, count=count)
    base = simulate(spec, i_app, t_end=t_end, dt=dt)
    pulsed = simulate(spec, i_app, t_end=t_end, protocol=[train], dt=dt)
    wb = base.window(settle)
    wp = pulsed.window(settle)
    span_ref = float(wp.v().max() - wp.v().min())
    sb = detect_spikes(wb.t, wb.v(), min_span=min_span) if span_ref >= min_span else np.zeros(0)
    sp = detect_spikes(wp.t, wp.v(), min_span=min_span)
    return PulseResponse(n_added=len(sp) - len(sb), n_pulses=count,
                         pulsed_spikes=sp, baseline_spikes=sb)


@dataclass
class ReboundReport:
    n_spikes: int
    n_baseline: int
    spike_times: np.ndarray
    release_t: float
    behavior: BehaviorReport


def rebound_test(spec: NeuronSpec, i_app: float, amplitude: float, width: float,
                 settle: float | None = None, post: float | None = None,
                 dt: float | None = None,
                 min_span: float = DEFAULT_MIN_SPAN) -> ReboundReport:
    """Hyperpolarize, release, and count spikes fired after release.

    The baseline run (no pulse) must stay quiet over the same window for the
    count to mean anything; its spike count is reported alongside.
    """
    if amplitude >= 0:
        raise ValueError("rebound needs a hyperpolarizing (negative) pulse")
    slowest = spec.slowest_tau()
    if settle is None:
        settle = SETTLE_TAU * slowest
    if post is None:
        post = 4.0 * slowest
    release = settle + width
    t_end = release + post
    pulse = CurrentStep(amplitude=amplitude, t0=settle, t1=release)
    base = simulate(spec, i_app, t_end=t_end, dt=dt)
    pulsed = simulate(spec, i_app, t_end=t_end, protocol=[pulse], dt=dt)
    wb = base.window(release)
    wp = pulsed.window(release)
    sb = detect_spikes(wb.t, wb.v(), min_span=min_span)
    if len(sb):
        raise ValueError("spec oscillates at baseline; a rebound count means nothing")
    sp = detect_spikes(wp.t, wp.v(), min_span=min_span)
    rep = classify_trace(wp.t, wp.v(), min_span=min_span)
    return ReboundReport(n_spikes=len(sp), n_baseline=len(sb),
                         spike_times=sp, release_t=release, behavior=rep)


# -- all-or-none pulse response -------------------------------------------------

def _pulse_run(system, i_app, t_end, protocol, dt):
    """Run either a NeuronSpec or any object with a compatible simulate()."""
    if isinstance(system, NeuronSpec):
        y0 = rest_state(system, i_app, kick=0.0)
        return simulate(system, i_app, t_end=t_end, protocol=protocol,
                        dt=dt, y0=y0)
    kwargs = {} if dt is None else {"dt": dt}
    return system.simulate(t_end, i_app=i_app, protocol=protocol, **kwargs)


@dataclass
class AllOrNoneReport:
    """Peak deflections across a pulse-amplitude sweep, split at the gap."""
    amplitudes: np.ndarray
    peaks: np.ndarray            # peak deflection from rest, per amplitude
    v_rest: float
    bracket: tuple               # (amplitude below, amplitude above) the gap
    gap: tuple                   # (largest sub peak, smallest supra peak)

    def peaks_in_band(self, lo: float, hi: float) -> np.ndarray:
        """Deflections landing inside [lo, hi]; empty for all-or-none sweeps."""
        return self.peaks[(self.peaks >= lo) & (self.peaks <= hi)]


def pulse_response_test(system, amplitudes, width: float, i_app: float = 0.0,
                        t0: float = 5.0, post: float | None = None,
                        dt: float | None = None,
                        min_span: float = DEFAULT_MIN_SPAN) -> AllOrNoneReport:
    """Peak response to brief current pulses of increasing amplitude.

    The system starts at rest; each run applies one pulse of the given
    width at ``t0`` and records the peak voltage deflection within
    ``post`` (default 50 pulse widths) after pulse onset.  The report
    orders amplitudes ascending and splits them at the largest jump
    between consecutive peaks, which for an excitable system is the
    subthreshold/suprathreshold gap.

    Raises if the system is not quiet at the baseline current.
    """
    if post is None:
        post = 50.0 * width
    t_end = t0 + width + post
    base = _pulse_run(system, i_app, t_end, (), dt)
    if float(base.v().max() - base.v().min()) >= min_span:
        raise ValueError("system is not at rest at this baseline current")
    v_rest = float(base.v()[-1])

    amplitudes = np.sort(np.asarray(amplitudes, dtype=float))
    peaks = np.zeros(len(amplitudes))
    for k, amp in enumerate(amplitudes):
        pulse = CurrentStep(amplitude=float(amp), t0=t0, t1=t0 + width)
        tr = _pulse_run(system, i_app, t_end, [pulse], dt)
        peaks[k] = float(tr.v()[tr.t >= t0].max()) - v_rest

    if len(amplitudes) >= 2:
        j = int(np.argmax(np.diff(peaks)))
        bracket = (float(amplitudes[j]), float(amplitudes[j + 1]))
        gap = (float(peaks[j]), float(peaks[j + 1]))
    else:
        bracket = (float(amplitudes[0]), float(amplitudes[0]))
        gap = (float(peaks[0]), float(peaks[0]))
    return AllOrNoneReport(amplitudes=amplitudes, peaks=peaks, v_rest=v_rest,
                           bracket=bracket, gap=gap)


def refine_threshold(system, width: float, lo: float, hi: float, split: float,
                     i_app: float = 0.0, rel: float = 1e-3, t0: float = 5.0,
                     post: float | None = None,
                     dt: float | None = None) -> tuple[float, float]:
    """Bisect the pulse threshold until the bracket is ``rel`` of its midpoint.

    ``lo`` must respond below ``split`` (peak deflection) and ``hi`` above;
    the returned (lo, hi) straddles the threshold amplitude.
    """
    if post is None:
        post = 50.0 * width
    t_end = t0 + width + post
    base = _pulse_run(system, i_app, t_end, (), dt)
    v_rest = float(base.v()[-1])

    def peak(amp):
        pulse = CurrentStep(amplitude=float(amp), t0=t0, t1=t0 + width)
        tr = _pulse_run(system, i_app, t_end, [pulse], dt)
        return float(tr.v()[tr.t >= t0].max()) - v_rest

    if not peak(lo) < split < peak(hi):
        raise ValueError("initial bracket does not straddle the response gap")
    while (hi - lo) > rel * 0.5 * (hi + lo):
        mid = 0.5 * (lo + hi)
        if peak(mid) < split:
            lo = mid
        else:
            hi = mid
    return lo, hi
