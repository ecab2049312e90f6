"""Small-signal analysis of conductance-based models.

Around a holding voltage, with every internal variable at steady state, a
conductance model reduces to a capacitor in parallel with an instantaneous
conductance G and one first-order branch per dynamic variable: branch w
contributes g_w / (tau_w s + 1) to the admittance, where

    g_w = (dI/dw) * (dw_inf/dV),    tau_w = tau_w(V).

All partial derivatives here are analytic; the test suite checks them
against central finite differences.  Concentration states are treated
exactly like gates, with their steady-state profile taken along the
voltage manifold.

`conductance_profiles` sums branch conductances into named timescale
groups (cutoffs in the timescale_groups fixture) across a voltage grid;
the grouped table is what the paper-style conductance plots are made of.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .models import ConductanceModel, load_parameter_fixture

__all__ = [
    "Branch", "LinearizedCircuit", "linearize_at", "branch_conductances",
    "default_grouping", "conductance_profiles", "profiles_to_csv", "impedance",
]


@dataclass(frozen=True)
class Branch:
    """One first-order admittance branch g_w / (tau_w s + 1)."""
    name: str
    conductance: float
    tau: float


@dataclass(frozen=True)
class LinearizedCircuit:
    """Parallel RC plus first-order branches at a holding voltage."""
    v0: float
    capacitance: float
    conductance: float          # instantaneous part, G
    branches: tuple[Branch, ...]

    def admittance(self, s: complex) -> complex:
        y = s * self.capacitance + self.conductance
        for b in self.branches:
            den = b.tau * s + 1.0
            if abs(den) < 1e-15:
                raise ValueError(f"s = {s} is a pole of branch {b.name!r}")
            y += b.conductance / den
        return y

    def total_slope(self) -> float:
        """DC slope G + sum of branch conductances (d steady I / dV)."""
        return self.conductance + sum(b.conductance for b in self.branches)


def _current_partials(model: ConductanceModel, v: float, values: dict):
    """Instantaneous conductance and per-variable branch conductances.

    Returns (G, {name: g_w}).  Instantaneous gates fold into G because
    their deflection tracks the voltage deflection with no lag.
    """
    g_inst = 0.0
    g_branch: dict[str, float] = {}
    for cur in model.currents:
        factors = []
        for gate in cur.gates:
            w = values[gate.name]
            factors.append((gate, w, gate.factor(w)))
        sat = 1.0
        if cur.special_form is not None:
            sat = cur.special_form.value(values[cur.special_form.state])
        prod_all = cur.max_conductance * sat
        for _, _, f in factors:
            prod_all *= f
        # dI/dV holding every internal variable fixed
        g_inst += prod_all
        drive = v - cur.reversal
        for gate, w, f in factors:
            others = cur.max_conductance * sat
            for g2, _, f2 in factors:
                if g2 is not gate:
                    others *= f2
            dI_dw = others * gate.factor_slope(w) * drive
            gw = dI_dw * gate.steady_state_slope(v)
            if gate.dynamic:
                g_branch[gate.name] = g_branch.get(gate.name, 0.0) + gw
            else:
                g_inst += gw
        if cur.special_form is not None:
            c_name = cur.special_form.state
            conc = next(c for c in model.concentrations if c.name == c_name)
            dI_dc = (prod_all / sat) * cur.special_form.slope(values[c_name]) * drive
            gw = dI_dc * conc.steady_state_slope(v)
            g_branch[c_name] = g_branch.get(c_name, 0.0) + gw
    return g_inst, g_branch


def linearize_at(model: ConductanceModel, v: float) -> LinearizedCircuit:
    """Branch circuit of `model` at holding voltage v, gates at steady state."""
    lo, hi = model.voltage_window
    if not (lo <= v <= hi):
        raise ValueError(f"voltage {v} outside window [{lo}, {hi}]")
    values = model.steady_gates(v)
    g_inst, g_branch = _current_partials(model, v, values)
    branches = []
    for gate in model.dynamic_gates:
        branches.append(Branch(gate.name, g_branch.pop(gate.name, 0.0),
                               gate.time_constant(v)))
    for conc in model.concentrations:
        branches.append(Branch(conc.name, g_branch.pop(conc.name, 0.0),
                               conc.time_constant(v)))
    return LinearizedCircuit(v, model.capacitance, g_inst, tuple(branches))


def branch_conductances(model: ConductanceModel, v: float) -> dict[str, float]:
    lin = linearize_at(model, v)
    return {b.name: b.conductance for b in lin.branches}


def default_grouping(model_name: str) -> dict[str, tuple[float, float]]:
    """Timescale cutoffs (ms) for a model, from the shipped fixture."""
    table = load_parameter_fixture("timescale_groups.json")
    if model_name not in table:
        raise KeyError(f"no grouping recorded for model {model_name!r}")
    out = {}
    for group, (lo, hi) in table[model_name].items():
        out[group] = (float(lo), float("inf") if hi is None else float(hi))
    return out


def conductance_profiles(model: ConductanceModel, grid,
                         grouping: dict[str, tuple[float, float]] | None = None
                         ) -> dict[str, np.ndarray]:
    """Instantaneous G and per-group branch conductance along a voltage grid.

    `grouping` maps group name to a [lo, hi) interval of branch time
    constants; a branch whose tau falls in no group is an error.
    """
    grid = np.asarray(grid, dtype=float)
    lo, hi = model.voltage_window
    if grid.min() < lo or grid.max() > hi:
        raise ValueError("grid extends outside the voltage window")
    if grouping is None:
        grouping = default_grouping(model.name)
    names = list(grouping)
    out = {"v": grid, "G": np.zeros_like(grid)}
    for name in names:
        out[name] = np.zeros_like(grid)
    for i, v in enumerate(grid):
        lin = linearize_at(model, float(v))
        out["G"][i] = lin.conductance
        for b in lin.branches:
            for name in names:
                glo, ghi = grouping[name]
                if glo <= b.tau < ghi:
                    out[name][i] += b.conductance
                    break
            else:
                raise ValueError(
                    f"branch {b.name!r} (tau = {b.tau:.4g} ms at v = {v:.4g}) "
                    f"falls in no timescale group")
    return out


def profiles_to_csv(table: dict[str, np.ndarray]) -> str:
    cols = ["v", "G"] + [k for k in table if k not in ("v", "G")]
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for i in range(len(table["v"])):
        buf.write(",".join(f"{table[c][i]:.12g}" for c in cols) + "\n")
    return buf.getvalue()


def impedance(lin: LinearizedCircuit, s: complex) -> complex:
    """Z(s) = 1 / (sC + G + sum g_w / (tau_w s + 1))."""
    y = lin.admittance(s)
    if abs(y) < 1e-15:
        raise ValueError(f"admittance is singular at s = {s}")
    return 1.0 / y
