"""Coupled circuits: chemical synapses, resistive edges, and the rhythms they make.

The module has three layers.  Edge and network types (`SynapticEdge`,
`ResistiveEdge`, `NetworkSpec`) describe topology and are plain data.
`assemble_network` flattens a validated `NetworkSpec` into the kernel
descriptor and returns an `AssembledNetwork` that owns the state layout,
default initial condition, and simulation entry point.  On top sit the
builders for the two circuits the analysis revolves around (a half-center
pair and a five-cell hub network) and `rhythm_report`, which turns
multi-node traces into burst frequencies, duty cycles, and pairwise phase
locking numbers.

Sign conventions match the integrator: synaptic and resistive currents are
inward positive.  A synapse with negative weight therefore produces an
outward (inhibitory) current into its target, and the resistive current
into node ``a`` from edge (a, b) is ``g * (v_b - v_a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import InvalidSpecError, NeuronSpec, ValidationReport
from .ivcurve import steady_state_roots
from . import kernels
from . import sim

__all__ = [
    "SynapticEdge", "ResistiveEdge", "NetworkNode", "NetworkSpec",
    "sigmoid", "synapse_current", "assemble_network", "AssembledNetwork",
    "build_half_center", "build_stg", "with_node_spec", "STG_NODE_NAMES",
    "NodeRhythm", "PairRhythm", "RhythmReport", "rhythm_report",
    "power_spectrum", "dominant_frequency", "weak_gap_sweep", "GapSweepRow",
]


def sigmoid(x):
    """Logistic sigmoid 1 / (1 + exp(-x)), overflow-safe on both tails."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


# -- edge and network types ---------------------------------------------------

@dataclass(frozen=True)
class SynapticEdge:
    """Directed chemical synapse: filtered presynaptic voltage into a sigmoid.

    The presynaptic voltage is low-pass filtered with time constant ``tau``
    (one extra state per edge) and the current into the postsynaptic node is
    ``weight * S(beta * (v_pre_filtered - delta))``.  Positive weight is
    excitatory, negative inhibitory; the current magnitude never exceeds
    |weight|.
    """

    pre: int
    post: int
    weight: float
    delta: float
    beta: float = 8.0
    tau: float = 50.0

    def problems(self) -> list[str]:
        out = []
        if not self.tau > 0:
            out.append(f"synapse filter time constant must be > 0, got {self.tau}")
        if not self.beta > 0:
            out.append(f"synapse steepness must be > 0, got {self.beta}")
        if not math.isfinite(self.weight):
            out.append("synapse weight must be finite")
        return out


@dataclass(frozen=True)
class ResistiveEdge:
    """Undirected resistive (diffusive) edge between two voltage nodes."""

    a: int
    b: int
    g: float

    def problems(self) -> list[str]:
        out = []
        if not self.g > 0:
            out.append(f"resistive conductance must be > 0, got {self.g}")
        if self.a == self.b:
            out.append(f"resistive edge connects node {self.a} to itself")
        return out


@dataclass(frozen=True)
class NetworkNode:
    """One cell in a network: a name, its spec, and per-node initialization.

    ``i_base`` is the node's constant applied current; ``kick`` is a
    deterministic offset added to the node's rest voltage in the default
    initial state, used to break symmetry in otherwise identical circuits.
    """

    name: str
    spec: NeuronSpec
    i_base: float = 0.0
    kick: float = 0.0

    def problems(self) -> list[str]:
        out = []
        if not self.name:
            out.append("node name must be non-empty")
        if not math.isfinite(self.i_base):
            out.append(f"node {self.name!r}: i_base must be finite")
        if not math.isfinite(self.kick):
            out.append(f"node {self.name!r}: kick must be finite")
        out += [f"node {self.name!r}: {p}" for p in self.spec.validate().problems]
        return out


@dataclass(frozen=True)
class NetworkSpec:
    """Named cells plus synaptic and resistive edges.

    State dimension is the sum of the node dimensions plus one filter state
    per synapse.  Edge endpoints are integer indices into ``nodes``.
    """

    nodes: tuple[NetworkNode, ...]
    synapses: tuple[SynapticEdge, ...] = ()
    gaps: tuple[ResistiveEdge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "synapses", tuple(self.synapses))
        object.__setattr__(self, "gaps", tuple(self.gaps))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes)

    @property
    def dim(self) -> int:
        return sum(n.spec.dim for n in self.nodes) + len(self.synapses)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def validate(self) -> ValidationReport:
        problems: list[str] = []
        if not self.nodes:
            problems.append("network needs at least one node")
        names = self.names
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            problems.append(f"duplicate node names: {dup}")
        for node in self.nodes:
            problems += node.problems()
        n = len(self.nodes)
        for k, syn in enumerate(self.synapses):
            problems += [f"synapse {k}: {p}" for p in syn.problems()]
            if not (0 <= syn.pre < n and 0 <= syn.post < n):
                problems.append(f"synapse {k}: endpoint out of range")
        for k, gp in enumerate(self.gaps):
            problems += [f"gap {k}: {p}" for p in gp.problems()]
            if not (0 <= gp.a < n and 0 <= gp.b < n):
                problems.append(f"gap {k}: endpoint out of range")
        return ValidationReport(not problems, problems)

    def require_valid(self) -> None:
        report = self.validate()
        if not report.ok:
            raise InvalidSpecError("; ".join(report.problems))


def synapse_current(edge: SynapticEdge, v_pre_filtered):
    """Current into the postsynaptic node, inward positive.

    ``weight * S(beta * (v - delta))``: half the weight at ``v == delta``,
    zero far below, the full (signed) weight far above.
    """
    return edge.weight * sigmoid(edge.beta * (np.asarray(v_pre_filtered, dtype=float)
                                              - edge.delta))


# -- assembly -----------------------------------------------------------------

@dataclass
class AssembledNetwork:
    """A validated network flattened into the kernel descriptor.

    State layout: per node a block [v, element filter states...] in
    declaration order, then one filter state per synapse in declaration
    order.  The descriptor is shared with the kernel; treat it as frozen.
    """

    net: NetworkSpec
    specs: list[NeuronSpec]
    desc: dict = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.specs)

    @property
    def dim(self) -> int:
        return int(self.desc["dim"])

    @property
    def state_names(self) -> list[str]:
        return list(self.desc["_names"])

    def v_index(self, node: int) -> int:
        return int(self.desc["node_off"][node])

    def initial_state(self) -> np.ndarray:
        """Rest state per node (filters converged) plus the declared kicks.

        Synapse filter states start at the presynaptic node's initial
        voltage, kick included, so the filter relation holds at t = 0.
        """
        y0 = np.zeros(self.dim)
        off = self.desc["node_off"]
        for i, (node, sp) in enumerate(zip(self.net.nodes, self.specs)):
            v_rest = steady_state_roots(sp, node.i_base)[0]
            y0[off[i]:off[i] + sp.dim] = v_rest
            y0[off[i]] = v_rest + node.kick
        for k in range(len(self.desc["syn_pre"])):
            y0[self.desc["syn_state"][k]] = y0[off[self.desc["syn_pre"][k]]]
        return y0

    def rhs(self, t: float, y, protocol=()) -> np.ndarray:
        seg = sim.build_protocol(self.desc, protocol)
        return kernels.net_rhs(self.desc, seg, t, np.asarray(y, dtype=float))

    def gap_currents(self, y) -> np.ndarray:
        """Per resistive edge, (current into a, current into b) at state y."""
        y = np.asarray(y, dtype=float)
        off = self.desc["node_off"]
        out = np.zeros((len(self.net.gaps), 2))
        for k, gp in enumerate(self.net.gaps):
            cur = gp.g * (y[off[gp.b]] - y[off[gp.a]])
            out[k, 0] = cur
            out[k, 1] = -cur
        return out

    def simulate(self, t_end: float, protocol=(), dt: float | None = None,
                 record_dt: float | None = None, y0=None,
                 t0: float = 0.0) -> sim.Trace:
        seg = sim.build_protocol(self.desc, protocol)
        if dt is None:
            dt = sim.default_dt(self.specs, self.net.synapses)
        if y0 is None:
            y0 = self.initial_state()
        tr = sim._run(self.desc, seg, y0, t0, dt, t_end, record_dt)
        tr.meta["nodes"] = list(self.net.names)
        return tr


def assemble_network(net: NetworkSpec) -> AssembledNetwork:
    """Validate and flatten a network into a simulatable system.

    Node state blocks come first in declaration order, then synapse filter
    states; permuting node declarations permutes the layout but not the
    dynamics.
    """
    net.require_valid()
    specs = []
    for node in net.nodes:
        sp = node.spec.copy()
        sp.name = node.name
        specs.append(sp)
    desc = sim.build_net_desc(specs, [n.i_base for n in net.nodes],
                              net.synapses, net.gaps)
    return AssembledNetwork(net=net, specs=specs, desc=desc)


# -- circuit builders ---------------------------------------------------------

def build_half_center(spec: NeuronSpec, weight: float, delta_syn: float,
                      tau_syn: float = 50.0, beta: float = 8.0,
                      i_base: float = 0.0, kick: float = 0.1,
                      names: tuple[str, str] = ("a", "b")) -> NetworkSpec:
    """Two identical cells with mutual inhibition.

    The first node's initial voltage is nudged by ``kick`` so the pair
    leaves the symmetric manifold deterministically.  Requires an
    inhibitory weight; mutual excitation does not make a half-center.
    """
    if not weight < 0:
        raise ValueError(f"half-center coupling must be inhibitory, got weight {weight}")
    syn = dict(weight=weight, delta=delta_syn, beta=beta, tau=tau_syn)
    return NetworkSpec(
        nodes=(NetworkNode(names[0], spec, i_base, kick),
               NetworkNode(names[1], spec, i_base, 0.0)),
        synapses=(SynapticEdge(pre=0, post=1, **syn),
                  SynapticEdge(pre=1, post=0, **syn)),
    )


STG_NODE_NAMES = ("fast_a", "fast_b", "slow_a", "slow_b", "hub")


def _pair_mismatch(fast: NeuronSpec, slow: NeuronSpec) -> str | None:
    # The two pacemaker specs must be the same circuit except for the
    # ultra-slow positive gain; anything else is a different experiment.
    if fast.c != slow.c or fast.passive != slow.passive:
        return "capacitance or passive element differs"
    if len(fast.elements) != len(slow.elements):
        return "element counts differ"
    for k, (ef, es) in enumerate(zip(fast.elements, slow.elements)):
        same = (ef.sign == es.sign and ef.delta == es.delta and ef.tau == es.tau
                and ef.timescale == es.timescale)
        if not same:
            return f"element {k} differs beyond its gain"
        if ef.alpha != es.alpha and ef.timescale != "ultraslow":
            return f"element {k} ({ef.timescale}) gain differs"
    return None


def build_stg(fast_spec: NeuronSpec, slow_spec: NeuronSpec, hub_spec: NeuronSpec,
              gap_g: float, weight: float, delta_syn: float,
              tau_syn: float = 50.0, beta: float = 8.0,
              i_base=0.0, kick: float = 0.1) -> NetworkSpec:
    """Five cells: two half-center pairs and a resistively coupled hub.

    The pairs share every parameter except the ultra-slow gain, which sets
    their rhythm frequencies apart; that constraint is enforced here.  The
    hub (index 4) couples to all four pacemaker cells through identical
    resistive edges; ``gap_g == 0`` builds the disconnected variant with no
    resistive edges at all.  ``i_base`` is a scalar for all five nodes or a
    sequence of five per-node values.
    """
    bad = _pair_mismatch(fast_spec, slow_spec)
    if bad is not None:
        raise ValueError(f"pair specs must differ only in the ultra-slow gain: {bad}")
    if gap_g < 0:
        raise ValueError(f"resistive conductance must be >= 0, got {gap_g}")
    if np.isscalar(i_base):
        i_base = [float(i_base)] * 5
    if len(i_base) != 5:
        raise ValueError("i_base must be a scalar or five per-node values")
    specs = (fast_spec, fast_spec, slow_spec, slow_spec, hub_spec)
    kicks = (kick, 0.0, kick, 0.0, 0.0)
    nodes = tuple(NetworkNode(name, sp, ib, kc) for name, sp, ib, kc
                  in zip(STG_NODE_NAMES, specs, i_base, kicks))
    syn = dict(weight=weight, delta=delta_syn, beta=beta, tau=tau_syn)
    synapses = (SynapticEdge(pre=0, post=1, **syn), SynapticEdge(pre=1, post=0, **syn),
                SynapticEdge(pre=2, post=3, **syn), SynapticEdge(pre=3, post=2, **syn))
    gaps = ()
    if gap_g > 0:
        gaps = tuple(ResistiveEdge(a=4, b=k, g=gap_g) for k in range(4))
    return NetworkSpec(nodes=nodes, synapses=synapses, gaps=gaps)


def with_node_spec(net: NetworkSpec, name: str, spec: NeuronSpec) -> NetworkSpec:
    """Copy of the network with one node's cell spec replaced.

    This is the neuromodulation entry point: topology, applied currents,
    and initialization stay fixed while a named cell's gains change.
    """
    i = net.index(name)
    nodes = list(net.nodes)
    nodes[i] = NetworkNode(name, spec, nodes[i].i_base, nodes[i].kick)
    return NetworkSpec(nodes=tuple(nodes), synapses=net.synapses, gaps=net.gaps)


# -- rhythm metrics -----------------------------------------------------------

# Largest relative period mismatch still treated as a shared rhythm.
LOCK_PERIOD_TOL = 0.10
# Circular standard deviation of phases drawn uniformly from one cycle.
UNIFORM_PHASE_STD = 1.0 / math.sqrt(12.0)


@dataclass
class NodeRhythm:
    """Cycle statistics for one node, from its settled voltage trace."""
    name: str
    pattern: str                 # resting / spiking / bursting / irregular
    frequency: float             # cycle events per time unit (nan if < 2 events)
    duty: float                  # burst span / period (0 for single-spike events)
    period: float                # median inter-event interval
    events: np.ndarray           # cycle onset times (burst onsets, or spikes)
    n_spikes: int


@dataclass
class PairRhythm:
    """Phase relation between two nodes' cycle event trains."""
    a: str
    b: str
    locked: bool
    phase: float                 # mean phase of b's events in a's cycle, in [0, 1)
    coherence: float             # 1 = rigid locking, 0 = no consistent phase
    period: float                # shared period estimate (nan when unlocked)

    @property
    def label(self) -> str:
        return "locked" if self.locked else "unlocked"


@dataclass
class RhythmReport:
    nodes: dict
    pairs: dict

    def node(self, name: str) -> NodeRhythm:
        return self.nodes[name]

    def pair(self, a: str, b: str) -> PairRhythm:
        if (a, b) in self.pairs:
            return self.pairs[(a, b)]
        return self.pairs[(b, a)]


def _cycle_events(t, v, min_span: float) -> NodeRhythm:
    rep = sim.classify_trace(t, v, min_span=min_span)
    name = ""  # filled by caller
    if rep.n_spikes == 0:
        return NodeRhythm(name, "resting", float("nan"), 0.0, float("nan"),
                          np.zeros(0), 0)
    if rep.n_bursts >= 2:
        events = np.array([b[0] for b in rep.bursts])
        # Duty from interior bursts: last one may be clipped by the window.
        spans = np.array([b[-1] - b[0] for b in rep.bursts[:-1]])
    else:
        events = rep.spike_times
        spans = np.zeros(0)
    if len(events) >= 2:
        period = float(np.median(np.diff(events)))
        frequency = 1.0 / period
        duty = float(np.mean(spans) / period) if len(spans) else 0.0
    else:
        period = float("nan")
        frequency = float("nan")
        duty = 0.0
    return NodeRhythm(name, rep.kind, frequency, duty, period, events,
                      rep.n_spikes)


def _pair_phase(na: NodeRhythm, nb: NodeRhythm) -> PairRhythm:
    unlocked = PairRhythm(na.name, nb.name, False, float("nan"), 0.0, float("nan"))
    if len(na.events) < 2 or len(nb.events) < 2:
        return unlocked
    if not (math.isfinite(na.period) and math.isfinite(nb.period)):
        return unlocked
    mean_per = 0.5 * (na.period + nb.period)
    if abs(na.period - nb.period) > LOCK_PERIOD_TOL * mean_per:
        return unlocked

    # Phase of each b event inside the a cycle that contains it.
    phases = []
    for tb in nb.events:
        k = np.searchsorted(na.events, tb, side="right") - 1
        if k < 0 or k >= len(na.events):
            continue
        phases.append(((tb - na.events[k]) / mean_per) % 1.0)
    if len(phases) < 2:
        return unlocked
    ang = 2.0 * math.pi * np.asarray(phases)
    zr = float(np.mean(np.cos(ang)))
    zi = float(np.mean(np.sin(ang)))
    r = math.hypot(zr, zi)
    phase = (math.atan2(zi, zr) / (2.0 * math.pi)) % 1.0
    if r < 1e-12:
        return unlocked
    # Circular spread in cycle units, scored against the uniform spread.
    circ_std = math.sqrt(max(0.0, -2.0 * math.log(r))) / (2.0 * math.pi)
    coherence = max(0.0, 1.0 - circ_std / UNIFORM_PHASE_STD)
    if coherence == 0.0:
        return unlocked
    return PairRhythm(na.name, nb.name, True, phase, coherence, mean_per)


def rhythm_report(trace: sim.Trace, nodes=None, t_from: float = 0.0,
                  min_span: float = sim.DEFAULT_MIN_SPAN) -> RhythmReport:
    """Per-node cycle statistics and pairwise phase locking for a network trace.

    Definitions:

    * A node's cycle events are its burst-onset times when the settled trace
      segments into two or more bursts, otherwise its spike times.  Period
      is the median inter-event interval; frequency its reciprocal.
    * Duty cycle is mean burst span over period (0 when events are single
      spikes).
    * For a pair, each event of the second node is assigned a phase inside
      the enclosing cycle of the first, using the pair's mean period.  The
      reported phase is the circular mean; coherence is
      ``1 - circular_std / uniform_std``, clipped at 0, so 1 means rigid
      locking and 0 means no consistent phase.
    * A pair whose single-node periods disagree by more than 10% has no
      shared rhythm and is reported unlocked rather than raising.

    ``nodes`` selects node names (default: all); ``t_from`` drops the
    transient before analysis.
    """
    node_names = trace.meta.get("nodes")
    if node_names is None:
        node_names = [f"n{i}" for i in range(len(trace.node_v_index))]
    if nodes is None:
        nodes = list(node_names)
    w = trace.window(t_from)
    per_node: dict[str, NodeRhythm] = {}
    for name in nodes:
        i = node_names.index(name)
        nr = _cycle_events(w.t, w.v(i), min_span)
        nr.name = name
        per_node[name] = nr
    pairs: dict[tuple[str, str], PairRhythm] = {}
    active = [n for n in nodes if per_node[n].pattern != "resting"]
    for ia in range(len(active)):
        for ib in range(ia + 1, len(active)):
            a, b = active[ia], active[ib]
            pairs[(a, b)] = _pair_phase(per_node[a], per_node[b])
    return RhythmReport(nodes=per_node, pairs=pairs)


# -- spectra and the weak-gap sweep -------------------------------------------

def power_spectrum(t, v) -> tuple[np.ndarray, np.ndarray]:
    """One-sided Hann-windowed power spectrum of a uniformly sampled trace."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    dt = float(t[1] - t[0])
    x = (v - v.mean()) * np.hanning(len(v))
    spec = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(len(v), d=dt)
    return freqs, spec


def dominant_frequency(t, v, f_min: float = 0.0) -> float:
    """Frequency of the largest spectral peak at or above ``f_min``."""
    freqs, spec = power_spectrum(t, v)
    mask = freqs >= max(f_min, freqs[1])
    k = int(np.argmax(spec[mask]))
    return float(freqs[mask][k])


@dataclass
class GapSweepRow:
    g: float
    f_fast: float
    f_slow: float
    dev_fast: float              # relative deviation from the uncoupled frequency
    dev_slow: float

    @property
    def weak(self) -> bool:
        return self.dev_fast <= 0.05 and self.dev_slow <= 0.05


def weak_gap_sweep(fast_spec: NeuronSpec, slow_spec: NeuronSpec,
                   hub_spec: NeuronSpec, g_values, *, weight: float,
                   delta_syn: float, i_base, t_end: float, settle: float,
                   tau_syn: float = 50.0, beta: float = 8.0,
                   dt: float | None = None,
                   record_dt: float | None = None) -> tuple[float, list[GapSweepRow]]:
    """Find the strongest hub coupling that leaves both pair rhythms intact.

    Runs the five-cell circuit at each conductance in ``g_values`` plus the
    uncoupled reference (g = 0), measures each pair's burst frequency after
    ``settle``, and calls a conductance weak while both frequencies stay
    within 5% of their uncoupled values.  Returns the largest weak
    conductance and the full table.
    """
    def pair_freqs(g):
        net = build_stg(fast_spec, slow_spec, hub_spec, g, weight, delta_syn,
                        tau_syn=tau_syn, beta=beta, i_base=i_base)
        tr = assemble_network(net).simulate(t_end, dt=dt, record_dt=record_dt)
        rep = rhythm_report(tr, nodes=["fast_a", "slow_a"], t_from=settle)
        return rep.node("fast_a").frequency, rep.node("slow_a").frequency

    f_fast0, f_slow0 = pair_freqs(0.0)
    if not (math.isfinite(f_fast0) and math.isfinite(f_slow0)):
        raise ValueError("uncoupled pairs must both be rhythmic")
    rows = []
    for g in sorted(float(g) for g in g_values):
        if g <= 0:
            continue
        f_fast, f_slow = pair_freqs(g)
        dev_f = abs(f_fast - f_fast0) / f_fast0 if math.isfinite(f_fast) else float("inf")
        dev_s = abs(f_slow - f_slow0) / f_slow0 if math.isfinite(f_slow) else float("inf")
        rows.append(GapSweepRow(g, f_fast, f_slow, dev_f, dev_s))
    weak = [r.g for r in rows if r.weak]
    if not weak:
        raise ValueError("no conductance in the sweep leaves both rhythms within 5%")
    return max(weak), rows
