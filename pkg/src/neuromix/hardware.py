"""Transconductor-level realization of the dimensionless circuits.

The physical building blocks are a differential transconductance amplifier,
whose output current is a hyperbolic tangent of its input voltage difference,
and a follower-integrator, an amplifier feeding its own capacitor that acts
as a first-order filter with an electronically tunable time constant.  One
feedback element is a follower (sets the timescale) driving an amplifier
(sets gain and offset), so the dimensionless parameters map onto bias
currents and offset voltages by pure scaling:

    i_b     = alpha * (2 * G * v_0)         amplifier bias, A
    v_delta = delta * (2 * v_0)             offset, V
    i_app   = I_app * (2 * G * v_0)         applied current, A
    T_v     = C / G                         membrane time constant, s

with G the passive leak conductance, C the membrane capacitance and v_0 the
process- and temperature-dependent thermal voltage scale.  The mapping is an
exact change of variables: an SI-unit simulation of the mapped circuit,
rescaled by (2 v_0, 2 G v_0, C/G), reproduces the dimensionless trajectory
to integrator precision.

Simulation uses the amplifier behavioral equation and the follower in its
small-signal (linear filter) form; the underlying per-transistor exponential
is exposed as :func:`subthreshold_current` for reference but never
integrated at device granularity.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import FeedbackElement, NeuronSpec
from . import sim

__all__ = [
    "DEFAULT_V0",
    "DEFAULT_G",
    "DEFAULT_C",
    "HardwareParams",
    "HardwareRow",
    "HardwareSheet",
    "HardwareScales",
    "amplifier_output",
    "follower_rate",
    "follower_time_constant",
    "hardware_desc",
    "hardware_scales",
    "map_from_hardware",
    "map_to_hardware",
    "map_spec_to_hardware",
    "rescale_trace",
    "sheet_from_csv",
    "simulate_hardware",
    "spec_from_sheet",
    "subthreshold_current",
]

# Room-temperature defaults for a generic subthreshold process: 25 mV thermal
# scale, 1 uS leak, 1 nF membrane, giving a 1 ms membrane time constant.
DEFAULT_V0: float = 25e-3
DEFAULT_G: float = 1e-6
DEFAULT_C: float = 1e-9


def subthreshold_current(i_0: float, v_gate: float, v_0: float) -> float:
    """Saturation current of one transistor below threshold.

    ``i_0 * exp(v_gate / v_0)``.  Documented for reference only: circuit
    behavior is simulated at the amplifier level, not per transistor.
    """
    if not v_0 > 0:
        raise ValueError("thermal voltage scale v_0 must be > 0")
    return i_0 * math.exp(v_gate / v_0)


def amplifier_output(i_b: float, v1, v2, v_0: float):
    """Output current of the transconductance amplifier.

    ``i_b * tanh((v1 - v2) / (2 v_0))``; bounded by the bias, |out| <= i_b.
    """
    if not v_0 > 0:
        raise ValueError("thermal voltage scale v_0 must be > 0")
    if i_b < 0:
        raise ValueError("amplifier bias current must be >= 0")
    out = i_b * np.tanh((np.asarray(v1, dtype=float) - v2) / (2.0 * v_0))
    return float(out) if out.ndim == 0 else out


def follower_rate(i_b: float, v_in, v_out, v_0: float, c: float):
    """Large-signal slew rate of the follower-integrator, dv_out/dt.

    ``(i_b / C) * tanh((v_in - v_out) / (2 v_0))``.  The output cannot slew
    faster than i_b/C; for small inputs this reduces to a linear filter with
    time constant :func:`follower_time_constant`.
    """
    if not c > 0:
        raise ValueError("follower capacitance must be > 0")
    return amplifier_output(i_b, v_in, v_out, v_0) / c


def follower_time_constant(i_b: float, v_0: float, c: float) -> float:
    """Small-signal time constant of the follower, T = 2 v_0 C / i_b."""
    if not i_b > 0:
        raise ValueError("follower bias current must be > 0")
    if not (v_0 > 0 and c > 0):
        raise ValueError("v_0 and C must be > 0")
    return 2.0 * v_0 * c / i_b


@dataclass(frozen=True)
class HardwareParams:
    """Electrical parameters of one feedback element.

    ``i_b`` and ``v_delta`` set the output amplifier's gain and offset; the
    follower shares the same bias and realizes the element's filter with
    capacitance ``C``, so its time constant is 2*v_0*C/i_b.  ``G`` and
    ``v_0`` record the membrane context the element was scaled against.

    Degenerate rows are legal and meaningful: ``i_b == 0`` is a disabled
    element, ``C == 0`` an unfiltered (instantaneous) one.
    """

    i_b: float
    v_delta: float
    v_0: float
    G: float
    C: float

    @property
    def time_constant(self) -> float:
        """Follower time constant in seconds; inf when disabled, 0 when unfiltered."""
        if self.i_b > 0:
            return 2.0 * self.v_0 * self.C / self.i_b
        return math.inf if self.C > 0 else 0.0

    def problems(self) -> list[str]:
        out: list[str] = []
        if not self.v_0 > 0:
            out.append(f"v_0 must be > 0, got {self.v_0}")
        if not self.G > 0:
            out.append(f"G must be > 0, got {self.G}")
        if self.i_b < 0:
            out.append(f"i_b must be >= 0, got {self.i_b}")
        if self.C < 0:
            out.append(f"C must be >= 0, got {self.C}")
        if not all(map(math.isfinite, (self.i_b, self.v_delta, self.v_0, self.G, self.C))):
            out.append("all parameters must be finite")
        return out


def map_to_hardware(elem: FeedbackElement, G: float = DEFAULT_G,
                    v_0: float = DEFAULT_V0,
                    c_membrane: float = DEFAULT_C) -> HardwareParams:
    """Scale one dimensionless element onto amplifier and follower biases.

    The follower capacitor is chosen so that, at the element's own bias,
    the filter time constant equals tau membrane-time-constants:
    C = alpha * tau * c_membrane, making 2*v_0*C/i_b == tau * (c_membrane/G)
    exactly.  A zero-gain element maps to a dead row (i_b = 0, C = 0).
    """
    problems = elem.problems()
    if problems:
        raise ValueError("; ".join(problems))
    if not (G > 0 and v_0 > 0 and c_membrane > 0):
        raise ValueError("G, v_0 and c_membrane must all be > 0")
    return HardwareParams(i_b=elem.alpha * 2.0 * G * v_0,
                          v_delta=elem.delta * 2.0 * v_0,
                          v_0=v_0, G=G,
                          C=elem.alpha * elem.tau * c_membrane)


def map_from_hardware(hw: HardwareParams, sign: int, timescale: str,
                      c_membrane: float = DEFAULT_C,
                      label: str = "") -> FeedbackElement:
    """Invert :func:`map_to_hardware`; exact by construction.

    ``sign`` and ``timescale`` are wiring facts (which amplifier input the
    filter drives, which curve the element contributes to) and are not
    encoded in the electrical parameters, so the caller supplies them.
    """
    problems = hw.problems()
    if problems:
        raise ValueError("; ".join(problems))
    if hw.i_b == 0:
        raise ValueError("bias current is zero: the element is disabled and "
                         "its gain and time constant are not determined")
    if not c_membrane > 0:
        raise ValueError("c_membrane must be > 0")
    alpha = hw.i_b / (2.0 * hw.G * hw.v_0)
    delta = hw.v_delta / (2.0 * hw.v_0)
    tau = hw.time_constant * hw.G / c_membrane
    return FeedbackElement(sign=sign, alpha=alpha, delta=delta, tau=tau,
                           timescale=timescale, label=label)


# -- whole-spec sheets ---------------------------------------------------------

@dataclass(frozen=True)
class HardwareScales:
    """Unit sizes of the change of variables: volts, amps and seconds per
    dimensionless voltage, current and time unit."""
    voltage: float
    current: float
    time: float


def hardware_scales(spec: NeuronSpec, G: float = DEFAULT_G,
                    v_0: float = DEFAULT_V0,
                    c_membrane: float = DEFAULT_C) -> HardwareScales:
    """Scales that carry ``spec`` onto a circuit with leak G and membrane C.

    Only linear passive elements are supported: G is defined as the physical
    leak slope, and a saturating passive has no single slope to scale by.
    Non-unit spec.c or leak slope fold into the current and time units.
    """
    if not (G > 0 and v_0 > 0 and c_membrane > 0):
        raise ValueError("G, v_0 and c_membrane must all be > 0")
    if spec.passive.kind != "linear":
        raise ValueError("hardware mapping needs a linear passive element")
    g = spec.passive.g
    return HardwareScales(voltage=2.0 * v_0,
                          current=2.0 * G * v_0 / g,
                          time=c_membrane * g / (G * spec.c))


@dataclass(frozen=True)
class HardwareRow:
    """One element of a parameter sheet: electrical values plus wiring."""
    label: str
    sign: int
    timescale: str
    params: HardwareParams


@dataclass(frozen=True)
class HardwareSheet:
    """Complete electrical description of one mapped neuron."""
    name: str
    rows: tuple
    G: float
    v_0: float
    c_membrane: float
    e_rev: float          # leak reversal, V
    i_app: float          # applied current, A

    @property
    def t_v(self) -> float:
        """Membrane time constant C/G in seconds."""
        return self.c_membrane / self.G

    def to_csv(self) -> str:
        """Flat one-table export; global columns repeat on every row."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["element", "sign", "timescale", "i_b_A", "v_delta_V",
                    "follower_C_F", "follower_T_s", "G_S", "v_0_V",
                    "membrane_C_F", "membrane_T_v_s", "e_rev_V", "i_app_A",
                    "name"])
        for r in self.rows:
            p = r.params
            w.writerow([r.label, f"{r.sign:+d}", r.timescale,
                        repr(p.i_b), repr(p.v_delta), repr(p.C),
                        repr(p.time_constant), repr(self.G), repr(self.v_0),
                        repr(self.c_membrane), repr(self.t_v),
                        repr(self.e_rev), repr(self.i_app), self.name])
        return buf.getvalue()


def map_spec_to_hardware(spec: NeuronSpec, i_app: float = 0.0,
                         G: float = DEFAULT_G, v_0: float = DEFAULT_V0,
                         c_membrane: float = DEFAULT_C) -> HardwareSheet:
    """Parameter sheet for a whole spec at a given applied current.

    Specs with non-unit membrane constant or leak slope are first normalized
    to the canonical frame (unit slope, unit membrane constant), which is
    what the electrical sheet determines the circuit up to.
    """
    spec.require_valid()
    sc = hardware_scales(spec, G, v_0, c_membrane)
    g, c = spec.passive.g, spec.c
    rows = []
    for el in spec.elements:
        canonical = replace(el, alpha=el.alpha / g, tau=el.tau * g / c)
        rows.append(HardwareRow(label=el.label, sign=el.sign,
                                timescale=el.timescale,
                                params=map_to_hardware(canonical, G, v_0,
                                                       c_membrane)))
    return HardwareSheet(name=spec.name, rows=tuple(rows), G=G, v_0=v_0,
                         c_membrane=c_membrane,
                         e_rev=spec.passive.e_rev * sc.voltage,
                         i_app=i_app * sc.current)


def spec_from_sheet(sheet: HardwareSheet) -> tuple[NeuronSpec, float]:
    """Rebuild the canonical dimensionless spec and applied current.

    Exact inverse of :func:`map_spec_to_hardware` for canonical specs
    (unit leak slope, unit membrane constant); others round-trip to their
    canonical equivalent.
    """
    from .core import PassiveElement

    s_v = 2.0 * sheet.v_0
    s_i = 2.0 * sheet.G * sheet.v_0
    elements = [map_from_hardware(r.params, r.sign, r.timescale,
                                  c_membrane=sheet.c_membrane, label=r.label)
                for r in sheet.rows]
    spec = NeuronSpec(c=1.0,
                      passive=PassiveElement(g=1.0, e_rev=sheet.e_rev / s_v),
                      elements=elements, name=sheet.name)
    return spec, sheet.i_app / s_i


def sheet_from_csv(text: str) -> HardwareSheet:
    """Parse :meth:`HardwareSheet.to_csv` output; floats recover exactly."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][0] != "element":
        raise ValueError("not a hardware sheet: missing header row")
    header = rows[0]
    idx = {k: j for j, k in enumerate(header)}
    out = []
    meta = None
    for rec in rows[1:]:
        if not rec:
            continue
        p = HardwareParams(i_b=float(rec[idx["i_b_A"]]),
                           v_delta=float(rec[idx["v_delta_V"]]),
                           v_0=float(rec[idx["v_0_V"]]),
                           G=float(rec[idx["G_S"]]),
                           C=float(rec[idx["follower_C_F"]]))
        out.append(HardwareRow(label=rec[idx["element"]],
                               sign=int(rec[idx["sign"]]),
                               timescale=rec[idx["timescale"]], params=p))
        meta = rec
    if meta is None:
        raise ValueError("hardware sheet has no element rows")
    return HardwareSheet(name=meta[idx["name"]], rows=tuple(out),
                         G=float(meta[idx["G_S"]]),
                         v_0=float(meta[idx["v_0_V"]]),
                         c_membrane=float(meta[idx["membrane_C_F"]]),
                         e_rev=float(meta[idx["e_rev_V"]]),
                         i_app=float(meta[idx["i_app_A"]]))


# -- SI-unit simulation ---------------------------------------------------------

def hardware_desc(spec: NeuronSpec, i_app: float = 0.0, G: float = DEFAULT_G,
                  v_0: float = DEFAULT_V0,
                  c_membrane: float = DEFAULT_C) -> dict:
    """Kernel descriptor of the mapped circuit in SI units.

    ``i_app`` is in amps.  Element gains become bias currents, offsets become
    offset voltages, the tanh argument is divided by 2*v_0, and filter time
    constants stretch by the time scale; the membrane row becomes (C, G).
    """
    sc = hardware_scales(spec, G, v_0, c_membrane)
    desc = sim.build_net_desc(spec, [i_app])
    desc["c"] = np.array([c_membrane])
    desc["pas_lin_g"] = np.array([G])
    desc["pas_lin_e"] = np.array([spec.passive.e_rev * sc.voltage])
    desc["el_alpha"] = desc["el_alpha"] * sc.current
    desc["el_delta"] = desc["el_delta"] * sc.voltage
    desc["el_w"] = np.full_like(desc["el_w"], 1.0 / sc.voltage)
    desc["el_tau"] = desc["el_tau"] * sc.time
    return desc


def simulate_hardware(spec: NeuronSpec, i_app: float = 0.0,
                      t_end: float = 1.0, protocol=(),
                      dt: float | None = None,
                      record_dt: float | None = None, y0=None,
                      G: float = DEFAULT_G, v_0: float = DEFAULT_V0,
                      c_membrane: float = DEFAULT_C) -> sim.Trace:
    """Integrate the mapped circuit; times in seconds, currents in amps.

    Protocol segments (CurrentStep, ParamRamp, ...) are interpreted in SI
    units too: a ramp on an element's alpha sweeps its bias current.
    """
    sc = hardware_scales(spec, G, v_0, c_membrane)
    desc = hardware_desc(spec, i_app, G, v_0, c_membrane)
    seg = sim.build_protocol(desc, protocol)
    if dt is None:
        dt = sim.default_dt(spec) * sc.time
    if y0 is None:
        y0 = sim.rest_state(spec, i_app / sc.current) * sc.voltage
    tr = sim._run(desc, seg, y0, 0.0, dt, t_end, record_dt)
    tr.meta["units"] = "SI"
    tr.meta["i_app"] = i_app
    tr.meta["hardware_scales"] = sc
    return tr


def rescale_trace(tr: sim.Trace, scales: HardwareScales | None = None) -> sim.Trace:
    """Undo the change of variables: seconds/volts back to dimensionless."""
    if scales is None:
        scales = tr.meta.get("hardware_scales")
        if scales is None:
            raise ValueError("trace carries no hardware scales; pass them explicitly")
    meta = dict(tr.meta)
    meta["units"] = "dimensionless"
    return sim.Trace(t=tr.t / scales.time, y=tr.y / scales.voltage,
                     names=list(tr.names), node_v_index=list(tr.node_v_index),
                     meta=meta)
