"""Reference conductance-based and minimal models.

Two fully specified biophysical models live here: the squid-axon model
(sodium, potassium, leak) and the Aplysia R-15 burster (the same three
currents plus a slowly activating inward current and a calcium-activated
potassium current driven by an intracellular concentration).  Both are
assembled from :class:`GatingVariable` and :class:`IonicCurrent` pieces so
that downstream analysis (small-signal branch circuits, timescale grouping)
can read the structure instead of re-deriving it.

The rate functions in this file are the normative definitions for the whole
package; the integration kernels carry mirrored copies that are tested for
agreement.  Voltages are in mV, times in ms, currents and conductances in
the usual per-area units (uA/cm^2, mS/cm^2).

Also here: four small phase-plane models (`build_minimal_model`) exposed as
plain vector fields for nullcline and rhs-level work.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .sim import ParamRamp, Trace, build_protocol

__all__ = [
    "VOLTAGE_WINDOW", "GatingVariable", "SaturationFactor", "ConcentrationState",
    "IonicCurrent", "ConductanceModel", "VectorField", "load_parameter_fixture",
    "build_hodgkin_huxley", "build_aplysia_r15", "build_minimal_model",
    "gate_steady_state", "MINIMAL_MODEL_IDS",
]

# voltages outside this window are rejected by analysis entry points
VOLTAGE_WINDOW = (-100.0, 60.0)


def load_parameter_fixture(name: str) -> dict:
    """Load a versioned parameter file shipped with the package."""
    text = resources.files("neuromix.fixtures").joinpath(name).read_text()
    data = json.loads(text)
    if "version" not in data:
        raise ValueError(f"parameter fixture {name!r} lacks a version field")
    return data


# -- rate-function helpers -----------------------------------------------------
#
# _ratio_up(x, k)   = x / (1 - exp(-x/k))   (the classic alpha_m, alpha_n form)
# _ratio_down(x, k) = x / (exp(x/k) - 1)
# expm1 keeps both accurate through the removable singularity at x = 0;
# series guards cover the remaining 0/0 and the slope's cancellation zone.

def _ratio_up(x: float, k: float) -> float:
    if abs(x) < 1e-12 * k:
        return k + 0.5 * x
    return x / -math.expm1(-x / k)


def _ratio_up_slope(x: float, k: float) -> float:
    if abs(x) < 1e-4 * k:
        return 0.5 + x / (6.0 * k)
    u = -math.expm1(-x / k)
    return (u - (x / k) * math.exp(-x / k)) / (u * u)


def _ratio_down(x: float, k: float) -> float:
    if abs(x) < 1e-12 * k:
        return k - 0.5 * x
    return x / math.expm1(x / k)


def _ratio_down_slope(x: float, k: float) -> float:
    # d/dx of _ratio_down; equals -_ratio_up_slope(-x, k)
    return -_ratio_up_slope(-x, k)


def _sigmoid(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


# -- structural pieces ---------------------------------------------------------

@dataclass(frozen=True)
class GatingVariable:
    """First-order gate: tau(V) * dw/dt = w_inf(V) - w, entering as w**exponent.

    ``kind`` is "activation" (w_inf increasing) or "inactivation"
    (decreasing).  ``dynamic=False`` marks gates pinned to their
    steady-state value, which then contribute no state variable.
    ``steady_state_slope`` is the exact derivative of ``steady_state``;
    it exists so linearization never needs numeric differentiation.
    """
    name: str
    exponent: int
    kind: str
    steady_state: Callable[[float], float]
    time_constant: Callable[[float], float]
    steady_state_slope: Callable[[float], float]
    dynamic: bool = True

    def __post_init__(self):
        if self.kind not in ("activation", "inactivation"):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.exponent < 1:
            raise ValueError("gate exponent must be a positive integer")

    def factor(self, w: float) -> float:
        return w ** self.exponent

    def factor_slope(self, w: float) -> float:
        if self.exponent == 1:
            return 1.0
        return self.exponent * w ** (self.exponent - 1)


@dataclass(frozen=True)
class SaturationFactor:
    """Concentration-driven conductance factor c / (half + c)."""
    state: str
    half: float

    def value(self, c: float) -> float:
        return c / (self.half + c)

    def slope(self, c: float) -> float:
        return self.half / (self.half + c) ** 2


@dataclass(frozen=True)
class ConcentrationState:
    """Intracellular concentration with first-order relaxation.

    dc/dt = (drive(v, states) - c) / tau.  ``steady_state`` evaluates the
    drive along the voltage steady-state manifold (all gates at w_inf), so
    it is a function of voltage alone; ``steady_state_slope`` is its exact
    derivative.
    """
    name: str
    steady_state: Callable[[float], float]
    steady_state_slope: Callable[[float], float]
    time_constant: Callable[[float], float]
    drive: Callable[[float, Mapping[str, float]], float]


@dataclass(frozen=True)
class IonicCurrent:
    """ohmic current g_max * (product of gate factors) * (v - reversal).

    ``special_form`` multiplies in a concentration-driven saturation
    factor; the gate product stays nonnegative because gates live in
    [0, 1] and concentrations stay >= 0.
    """
    name: str
    max_conductance: float
    reversal: float
    gates: tuple[GatingVariable, ...] = ()
    special_form: SaturationFactor | None = None

    def conductance(self, v: float, values: Mapping[str, float]) -> float:
        g = self.max_conductance
        for gate in self.gates:
            w = values[gate.name] if gate.dynamic else gate.steady_state(v)
            g *= gate.factor(w)
        if self.special_form is not None:
            g *= self.special_form.value(values[self.special_form.state])
        return g

    def value(self, v: float, values: Mapping[str, float]) -> float:
        return self.conductance(v, values) * (v - self.reversal)


@dataclass(frozen=True)
class VectorField:
    """A plain ODE right-hand side with its bookkeeping."""
    dimension: int
    rhs: Callable[[Sequence[float], float, float], np.ndarray]
    state_names: tuple[str, ...]
    default_params: dict
    default_initial_state: np.ndarray


@dataclass(frozen=True)
class ConductanceModel:
    """Membrane equation C dv/dt = -(sum of ionic currents) + i_app.

    State order is voltage first, then the dynamic gates in declaration
    order, then concentration states.  ``kernel_id``/``kernel_params``
    select the matching compiled integrator.
    """
    name: str
    capacitance: float
    currents: tuple[IonicCurrent, ...]
    gates: tuple[GatingVariable, ...]
    concentrations: tuple[ConcentrationState, ...]
    kernel_id: int
    kernel_params: np.ndarray
    default_initial_state: np.ndarray
    parameters: dict = field(default_factory=dict)
    voltage_window: tuple[float, float] = VOLTAGE_WINDOW

    @property
    def dynamic_gates(self) -> tuple[GatingVariable, ...]:
        return tuple(g for g in self.gates if g.dynamic)

    @property
    def state_names(self) -> tuple[str, ...]:
        return ("v",) + tuple(g.name for g in self.dynamic_gates) + tuple(
            c.name for c in self.concentrations)

    @property
    def dimension(self) -> int:
        return 1 + len(self.dynamic_gates) + len(self.concentrations)

    @property
    def default_params(self) -> dict:
        return dict(self.parameters)

    # -- evaluation ------------------------------------------------------------

    def steady_gates(self, v: float) -> dict[str, float]:
        """All gate and concentration values on the steady-state manifold."""
        out = {g.name: g.steady_state(v) for g in self.gates}
        out.update({c.name: c.steady_state(v) for c in self.concentrations})
        return out

    def unpack(self, state: Sequence[float]) -> tuple[float, dict[str, float]]:
        v = float(state[0])
        values: dict[str, float] = {}
        k = 1
        for g in self.dynamic_gates:
            values[g.name] = float(state[k])
            k += 1
        for c in self.concentrations:
            values[c.name] = float(state[k])
            k += 1
        return v, values

    def ionic_current(self, v: float, values: Mapping[str, float]) -> float:
        return sum(cur.value(v, values) for cur in self.currents)

    def steady_current(self, v: float) -> float:
        """Total ionic current with every internal variable at steady state."""
        return self.ionic_current(v, self.steady_gates(v))

    def currents_at(self, v: float, values: Mapping[str, float]) -> dict[str, float]:
        return {cur.name: cur.value(v, values) for cur in self.currents}

    def rhs(self, state: Sequence[float], t: float = 0.0,
            i_app: float = 0.0) -> np.ndarray:
        v, values = self.unpack(state)
        out = np.empty(self.dimension)
        out[0] = (i_app - self.ionic_current(v, values)) / self.capacitance
        k = 1
        for g in self.dynamic_gates:
            out[k] = (g.steady_state(v) - values[g.name]) / g.time_constant(v)
            k += 1
        for c in self.concentrations:
            out[k] = (c.drive(v, values) - values[c.name]) / c.time_constant(v)
            k += 1
        return out

    def as_vector_field(self) -> VectorField:
        return VectorField(self.dimension, self.rhs, self.state_names,
                           self.default_params,
                           np.array(self.default_initial_state, dtype=float))

    # -- equilibria and simulation ----------------------------------------------

    def rest(self, i_app: float = 0.0, window: tuple[float, float] | None = None,
             n_scan: int = 400) -> np.ndarray:
        """Most hyperpolarized zero of the steady-state current balance."""
        lo, hi = window if window is not None else self.voltage_window
        vs = np.linspace(lo, hi, n_scan)
        f = lambda v: self.steady_current(v) - i_app
        vals = np.array([f(v) for v in vs])
        for j in range(len(vs) - 1):
            if vals[j] == 0.0:
                v0 = vs[j]
                break
            if vals[j] * vals[j + 1] < 0.0:
                v0 = brentq(f, vs[j], vs[j + 1], xtol=1e-12, rtol=1e-14)
                break
        else:
            raise ValueError("no steady state in the voltage window")
        values = self.steady_gates(v0)
        return np.array([v0] + [values[n] for n in self.state_names[1:]])

    def simulate(self, t_end: float, dt: float = 0.01, i_app: float = 0.0,
                 protocol: Sequence = (), y0=None, record_dt: float | None = None,
                 t0: float = 0.0) -> Trace:
        """Integrate with the fixed-step kernel; returns a recorded Trace."""
        for s in protocol:
            if isinstance(s, ParamRamp):
                raise TypeError("parameter ramps apply to circuit networks only")
        seg = build_protocol({}, protocol)
        if y0 is None:
            y0 = self.rest(i_app)
        y0 = np.asarray(y0, dtype=float)
        stride = max(1, int(round(record_dt / dt))) if record_dt else 1
        n_steps = int(round((t_end - t0) / dt))
        if n_steps % stride:
            n_steps += stride - n_steps % stride
        t, y, _ = kernels.model_run(self.kernel_id, self.kernel_params, seg,
                                    y0, t0, dt, n_steps, stride, i_app)
        return Trace(t=t, y=y, names=list(self.state_names), node_v_index=[0],
                     meta={"dt": dt, "stride": stride, "i_app": i_app,
                           "model": self.name, "impl": kernels.IMPLEMENTATION})


def gate_steady_state(g: GatingVariable, v: float) -> float:
    """Steady-state value of a gate; monotone in v, confined to [0, 1]."""
    return float(g.steady_state(v))


# -- squid axon model ----------------------------------------------------------
#
# Rates follow the standard squid-axon forms referenced to a resting
# potential near -65 mV:
#   alpha_m = 0.1 (v+40) / (1 - exp(-(v+40)/10))    beta_m = 4 exp(-(v+65)/18)
#   alpha_h = 0.07 exp(-(v+65)/20)                  beta_h = 1/(1+exp(-(v+35)/10))
#   alpha_n = 0.01 (v+55) / (1 - exp(-(v+55)/10))   beta_n = 0.125 exp(-(v+65)/80)

def _gate_from_rates(name: str, exponent: int, kind: str,
                     alpha: Callable, dalpha: Callable,
                     beta: Callable, dbeta: Callable,
                     tau_scale: float = 1.0, dynamic: bool = True) -> GatingVariable:
    def steady(v: float) -> float:
        a, b = alpha(v), beta(v)
        return a / (a + b)

    def slope(v: float) -> float:
        a, b = alpha(v), beta(v)
        return (dalpha(v) * b - a * dbeta(v)) / (a + b) ** 2

    def tau(v: float) -> float:
        return tau_scale / (alpha(v) + beta(v))

    return GatingVariable(name, exponent, kind, steady, tau, slope, dynamic)


def _hh_gates() -> tuple[GatingVariable, GatingVariable, GatingVariable]:
    m = _gate_from_rates(
        "m", 3, "activation",
        lambda v: 0.1 * _ratio_up(v + 40.0, 10.0),
        lambda v: 0.1 * _ratio_up_slope(v + 40.0, 10.0),
        lambda v: 4.0 * math.exp(-(v + 65.0) / 18.0),
        lambda v: -(4.0 / 18.0) * math.exp(-(v + 65.0) / 18.0))
    h = _gate_from_rates(
        "h", 1, "inactivation",
        lambda v: 0.07 * math.exp(-(v + 65.0) / 20.0),
        lambda v: -(0.07 / 20.0) * math.exp(-(v + 65.0) / 20.0),
        lambda v: _sigmoid((v + 35.0) / 10.0),
        lambda v: _sigmoid((v + 35.0) / 10.0) * (1.0 - _sigmoid((v + 35.0) / 10.0)) / 10.0)
    n = _gate_from_rates(
        "n", 4, "activation",
        lambda v: 0.01 * _ratio_up(v + 55.0, 10.0),
        lambda v: 0.01 * _ratio_up_slope(v + 55.0, 10.0),
        lambda v: 0.125 * math.exp(-(v + 65.0) / 80.0),
        lambda v: -(0.125 / 80.0) * math.exp(-(v + 65.0) / 80.0))
    return m, h, n


def build_hodgkin_huxley(overrides: Mapping[str, float] | None = None) -> ConductanceModel:
    """Sodium (m^3 h), potassium (n^4) and leak; E_Na = +40, E_K = -70 mV."""
    p = load_parameter_fixture("hodgkin_huxley_params.json")
    if overrides:
        unknown = set(overrides) - set(p)
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)}")
        p.update(overrides)
    m, h, n = _hh_gates()
    currents = (
        IonicCurrent("sodium", p["g_na"], p["e_na"], gates=(m, h)),
        IonicCurrent("potassium", p["g_k"], p["e_k"], gates=(n,)),
        IonicCurrent("leak", p["g_leak"], p["e_leak"]),
    )
    kernel_params = np.array([p["capacitance"], p["g_na"], p["g_k"], p["g_leak"],
                              p["e_na"], p["e_k"], p["e_leak"]])
    return ConductanceModel(
        name="hodgkin-huxley",
        capacitance=p["capacitance"],
        currents=currents,
        gates=(m, h, n),
        concentrations=(),
        kernel_id=kernels.MODEL_HH,
        kernel_params=kernel_params,
        default_initial_state=np.array([-65.0, 0.05, 0.6, 0.32]),
        parameters=p,
    )


# -- Aplysia R-15 burster ------------------------------------------------------
#
# The fast currents reuse the squid-axon rate shapes through the affine map
# vs = (127 v + 8265) / 105 with sodium activation pinned at m_inf, a shared
# rate divisor for h and n, a slow inward gate x (sigmoid, tau_x constant)
# and a calcium-like concentration c obeying
#   dc/dt = removal_rate * (influx_gain * x * (e_ca - v) - c).

_R15_Q = 127.0 / 105.0


def _r15_fast_gates(rate_scale: float):
    vs = lambda v: (127.0 * v + 8265.0) / 105.0
    m = _gate_from_rates(
        "m", 3, "activation",
        lambda v: 0.1 * _ratio_down(50.0 - vs(v), 10.0),
        lambda v: -0.1 * _R15_Q * _ratio_down_slope(50.0 - vs(v), 10.0),
        lambda v: 4.0 * math.exp((25.0 - vs(v)) / 18.0),
        lambda v: -(_R15_Q / 18.0) * 4.0 * math.exp((25.0 - vs(v)) / 18.0),
        dynamic=False)
    h = _gate_from_rates(
        "h", 1, "inactivation",
        lambda v: 0.07 * math.exp((25.0 - vs(v)) / 20.0),
        lambda v: -(_R15_Q / 20.0) * 0.07 * math.exp((25.0 - vs(v)) / 20.0),
        lambda v: _sigmoid(-(55.0 - vs(v)) / 10.0),
        lambda v: _sigmoid(-(55.0 - vs(v)) / 10.0)
        * (1.0 - _sigmoid(-(55.0 - vs(v)) / 10.0)) * (_R15_Q / 10.0),
        tau_scale=rate_scale)
    n = _gate_from_rates(
        "n", 4, "activation",
        lambda v: 0.01 * _ratio_down(55.0 - vs(v), 10.0),
        lambda v: -0.01 * _R15_Q * _ratio_down_slope(55.0 - vs(v), 10.0),
        lambda v: 0.125 * math.exp((45.0 - vs(v)) / 80.0),
        lambda v: -(_R15_Q / 80.0) * 0.125 * math.exp((45.0 - vs(v)) / 80.0),
        tau_scale=rate_scale)
    return m, h, n


def build_aplysia_r15(overrides: Mapping[str, float] | None = None) -> ConductanceModel:
    """Burster: squid currents with instantaneous sodium activation, plus a
    slow inward gate x and a concentration-gated potassium current."""
    p = load_parameter_fixture("aplysia_r15_params.json")
    if overrides:
        unknown = set(overrides) - set(p)
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)}")
        p.update(overrides)
    m, h, n = _r15_fast_gates(p["rate_scale"])

    x_slope, x_half, tau_x = p["x_slope"], p["x_half"], p["tau_x"]
    x_inf = lambda v: _sigmoid(x_slope * (v - x_half))
    x = GatingVariable(
        "x", 1, "activation",
        steady_state=x_inf,
        time_constant=lambda v: tau_x,
        steady_state_slope=lambda v: x_slope * x_inf(v) * (1.0 - x_inf(v)))

    gain, rate, e_ca = p["influx_gain"], p["removal_rate"], p["e_ca"]
    c = ConcentrationState(
        "c",
        steady_state=lambda v: gain * x_inf(v) * (e_ca - v),
        steady_state_slope=lambda v: gain * (
            x_slope * x_inf(v) * (1.0 - x_inf(v)) * (e_ca - v) - x_inf(v)),
        time_constant=lambda v: 1.0 / rate,
        drive=lambda v, values: gain * values["x"] * (e_ca - v))

    currents = (
        IonicCurrent("fast-inward", p["g_fast"], p["e_inward"], gates=(m, h)),
        IonicCurrent("slow-inward", p["g_slow"], p["e_inward"], gates=(x,)),
        IonicCurrent("potassium", p["g_k"], p["e_k"], gates=(n,)),
        IonicCurrent("k-ca", p["g_kca"], p["e_k"],
                     special_form=SaturationFactor("c", p["kca_half"])),
        IonicCurrent("leak", p["g_leak"], p["e_leak"]),
    )
    kernel_params = np.array([
        p["capacitance"], p["g_fast"], p["g_slow"], p["g_k"], p["g_kca"],
        p["g_leak"], p["e_inward"], p["e_k"], p["e_leak"], p["e_ca"],
        p["influx_gain"], p["removal_rate"], p["tau_x"], p["rate_scale"],
        p["x_slope"], p["x_half"]])
    return ConductanceModel(
        name="aplysia-r15",
        capacitance=p["capacitance"],
        currents=currents,
        gates=(m, h, n, x),
        concentrations=(c,),
        kernel_id=kernels.MODEL_R15,
        kernel_params=kernel_params,
        default_initial_state=np.array([-50.0, 0.2, 0.2, 0.2, 0.4]),
        parameters=p,
    )


# -- minimal phase-plane models --------------------------------------------------

MINIMAL_MODEL_IDS = ("fitzhugh-nagumo", "morris-lecar", "hindmarsh-rose",
                     "transcritical")

_MINIMAL_DEFAULTS = {
    "fitzhugh-nagumo": {"a": 0.7, "b": 0.8, "tau": 12.5},
    "morris-lecar": {
        "capacitance": 20.0, "g_leak": 2.0, "e_leak": -60.0,
        "g_ca": 4.0, "e_ca": 120.0, "g_k": 8.0, "e_k": -84.0,
        "m_half": -1.2, "m_width": 18.0, "n_half": 12.0, "n_width": 17.4,
        "tau_n": 15.0,
    },
    "hindmarsh-rose": {"a": 1.0, "b": 3.0, "c": 1.0, "d": 5.0,
                       "s": 4.0, "v1": -1.6, "tau_z": 1000.0},
    # n_inf and z_inf shapes are a repo choice, not constrained upstream
    "transcritical": {"n0": 0.5, "tau_n": 10.0, "tau_z": 1000.0,
                      "n_slope": 1.0, "n_half": 0.0,
                      "z_slope": 1.0, "z_half": -1.0},
}


def _merge_params(model_id: str, params: Mapping | None) -> dict:
    defaults = _MINIMAL_DEFAULTS[model_id]
    merged = dict(defaults)
    if params:
        unknown = set(params) - set(defaults)
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)} for {model_id}")
        merged.update(params)
    missing = [k for k, val in merged.items() if val is None]
    if missing:
        raise ValueError(f"missing parameters {sorted(missing)} for {model_id}")
    return merged


def build_minimal_model(model_id: str, params: Mapping | None = None) -> VectorField:
    """Two- and three-variable excitability models, by name."""
    if model_id not in MINIMAL_MODEL_IDS:
        raise ValueError(f"unknown minimal model {model_id!r}")
    p = _merge_params(model_id, params)

    if model_id == "fitzhugh-nagumo":
        a, b, tau = p["a"], p["b"], p["tau"]

        def rhs(state, t=0.0, i_app=0.0):
            v, n = state
            return np.array([-(v ** 3) / 3.0 + v - n + i_app,
                             (v + a - b * n) / tau])

        return VectorField(2, rhs, ("v", "n"), p, np.array([-1.2, -0.6]))

    if model_id == "morris-lecar":
        cap, gl, el = p["capacitance"], p["g_leak"], p["e_leak"]
        gca, eca, gk, ek = p["g_ca"], p["e_ca"], p["g_k"], p["e_k"]
        m_inf = lambda v: 0.5 * (1.0 + math.tanh((v - p["m_half"]) / p["m_width"]))
        n_inf = lambda v: 0.5 * (1.0 + math.tanh((v - p["n_half"]) / p["n_width"]))
        tau_n = p["tau_n"]

        def rhs(state, t=0.0, i_app=0.0):
            v, n = state
            dv = (-gl * (v - el) - gca * m_inf(v) * (v - eca)
                  - gk * n * (v - ek) + i_app) / cap
            return np.array([dv, (n_inf(v) - n) / tau_n])

        return VectorField(2, rhs, ("v", "n"), p, np.array([-60.0, 0.0]))

    if model_id == "hindmarsh-rose":
        a, b, c, d = p["a"], p["b"], p["c"], p["d"]
        s, v1, tau_z = p["s"], p["v1"], p["tau_z"]

        def rhs(state, t=0.0, i_app=0.0):
            v, n, z = state
            return np.array([-a * v ** 3 + b * v ** 2 - n - z + i_app,
                             d * v ** 2 - c - n,
                             (s * (v - v1) - z) / tau_z])

        return VectorField(3, rhs, ("v", "n", "z"), p, np.array([-1.6, 4.0, 0.0]))

    n0, tau_n, tau_z = p["n0"], p["tau_n"], p["tau_z"]
    n_inf = lambda v: math.tanh(p["n_slope"] * (v - p["n_half"]))
    z_inf = lambda v: math.tanh(p["z_slope"] * (v - p["z_half"]))

    def rhs(state, t=0.0, i_app=0.0):
        v, n, z = state
        return np.array([-(v ** 3) / 3.0 + v - (n + n0) ** 2 - z + i_app,
                         (n_inf(v) - n) / tau_n,
                         (z_inf(v) - z) / tau_z])

    return VectorField(3, rhs, ("v", "n", "z"), p, np.array([-1.0, -0.5, 0.0]))
