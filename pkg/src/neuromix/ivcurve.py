"""Timescale-indexed I-V curves and the regime analysis built on them.

The curve for a timescale tag aggregates the passive element plus every
feedback element at least as fast as that tag, evaluated at steady state.
Slower elements are held frozen (they contribute nothing to the static
curve).  The "instantaneous" curve is the passive element alone; the
"ultraslow" curve includes every element and doubles as the steady-state
(DC) curve.

Geometry of these curves drives everything else here:

* turning points (strict slope sign changes; a tangency where the slope
  touches zero without changing sign does not count),
* negative-conductance windows,
* structural classification of a spec,
* regime prediction for a given applied current,
* the critical-gain search for the fold that converts a fast-excitable
  structure into a burst-capable one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ANALYSIS_POINTS,
    ANALYSIS_WINDOW,
    CURVE_TAGS,
    NeuronSpec,
    timescale_rank,
)

__all__ = [
    "IVCurve",
    "TurningPoint",
    "StructureReport",
    "RegimePrediction",
    "TransitionReport",
    "iv_curve",
    "classify_structure",
    "rest_equilibrium",
    "steady_state_roots",
    "predict_regime",
    "regime_bands",
    "bursting_band",
    "transition_gain",
    "REGIMES",
    "STRUCTURES",
    "DEFAULT_MARGIN",
]

REGIMES = ("resting", "excitable", "burst-excitable", "spiking", "bursting")
STRUCTURES = ("passive", "fast-excitable", "burst-capable", "invalid")

# how close (in volts) the rest point may sit to a threshold before the
# prediction hedges to an excitable label
DEFAULT_MARGIN = 0.2

_REFINE_TOL = 1e-12


@dataclass(frozen=True)
class TurningPoint:
    v: float
    i: float
    kind: str  # "max" or "min"


@dataclass
class IVCurve:
    """Static I-V curve for one timescale tag."""

    timescale: str
    v: np.ndarray
    i: np.ndarray
    spec: NeuronSpec

    def current(self, v):
        v = np.asarray(v, dtype=float)
        total = self.spec.passive.current(v)
        for el in self.spec.elements_up_to(self.timescale):
            total = total + el.current(v)
        return total

    def slope(self, v):
        v = np.asarray(v, dtype=float)
        total = self.spec.passive.slope(v)
        for el in self.spec.elements_up_to(self.timescale):
            total = total + el.slope(v)
        return total

    def curvature(self, v):
        v = np.asarray(v, dtype=float)
        total = self.spec.passive.curvature(v)
        for el in self.spec.elements_up_to(self.timescale):
            total = total + el.curvature(v)
        return total

    def turning_points(self) -> list[TurningPoint]:
        """Strict sign changes of the slope, refined by bisection."""
        s = self.slope(self.v)
        out = []
        for k in range(len(self.v) - 1):
            a, b = s[k], s[k + 1]
            if a == 0.0 or a * b >= 0.0:
                continue
            v_root = _bisect(self.slope, self.v[k], self.v[k + 1])
            kind = "max" if a > 0.0 else "min"
            out.append(TurningPoint(v_root, float(self.current(v_root)), kind))
        return out

    def negative_intervals(self) -> list[tuple[float, float]]:
        """(v_lo, v_hi) windows where the slope is negative."""
        tps = self.turning_points()
        out = []
        lo = None
        for tp in tps:
            if tp.kind == "max":
                lo = tp.v
            elif lo is not None:
                out.append((lo, tp.v))
                lo = None
        if lo is not None:
            out.append((lo, float(self.v[-1])))
        return out

    def is_monotone(self) -> bool:
        return not self.turning_points()


def _bisect(f, lo, hi, tol=_REFINE_TOL, max_iter=200):
    flo = float(f(lo))
    fhi = float(f(hi))
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if flo * fhi > 0.0:
        raise ValueError(f"no sign change on [{lo}, {hi}]")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = float(f(mid))
        if fm == 0.0 or (hi - lo) < tol:
            return mid
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def iv_curve(spec: NeuronSpec, timescale: str, v: np.ndarray | None = None) -> IVCurve:
    """Build the static I-V curve for one timescale tag."""
    if timescale not in CURVE_TAGS:
        raise ValueError(f"unknown timescale tag {timescale!r}, expected one of {CURVE_TAGS}")
    if v is None:
        lo, hi = ANALYSIS_WINDOW
        v = np.linspace(lo, hi, ANALYSIS_POINTS)
    curve = IVCurve(timescale=timescale, v=np.asarray(v, dtype=float),
                    i=np.zeros(0), spec=spec)
    curve.i = curve.current(curve.v)
    return curve


@dataclass
class StructureReport:
    kind: str  # one of STRUCTURES
    reason: str
    thresholds: dict[str, float] = field(default_factory=dict)
    curves: dict[str, IVCurve] = field(default_factory=dict)

    def threshold(self, name: str) -> float:
        return self.thresholds[name]


def classify_structure(spec: NeuronSpec) -> StructureReport:
    """Sort a spec into passive / fast-excitable / burst-capable / invalid.

    The decision reads only curve geometry: whether the fast and slow curves
    have regenerative (negative-slope) windows, whether the steady-state
    curve stays monotone, and whether the slow window opens below the fast
    one.
    """
    spec.require_valid()
    curves = {tag: iv_curve(spec, tag) for tag in ("fast", "slow", "ultraslow")}
    fast_tp = curves["fast"].turning_points()
    slow_tp = curves["slow"].turning_points()
    us_tp = curves["ultraslow"].turning_points()

    thresholds: dict[str, float] = {}
    if fast_tp:
        maxima = [tp for tp in fast_tp if tp.kind == "max"]
        minima = [tp for tp in fast_tp if tp.kind == "min"]
        if maxima:
            thresholds["v1_fast"] = maxima[0].v
            thresholds["i1_fast"] = maxima[0].i
        if minima:
            thresholds["v2_fast"] = minima[-1].v
            thresholds["i2_fast"] = minima[-1].i
    if slow_tp:
        maxima = [tp for tp in slow_tp if tp.kind == "max"]
        minima = [tp for tp in slow_tp if tp.kind == "min"]
        if maxima:
            thresholds["v1_slow"] = maxima[0].v
            thresholds["i1_slow"] = maxima[0].i
        if minima:
            thresholds["v2_slow"] = minima[-1].v
            thresholds["i2_slow"] = minima[-1].i

    def report(kind, reason):
        return StructureReport(kind=kind, reason=reason, thresholds=thresholds, curves=curves)

    if us_tp:
        return report(
            "invalid",
            "steady-state curve is non-monotone: rest/spike bistability with no "
            "ultraslow restoration, so no rhythmic regime is reachable",
        )
    if not fast_tp:
        if slow_tp:
            return report(
                "invalid",
                "slow regenerative window without a fast one: slow relaxation "
                "dynamics fall outside the supported structures",
            )
        return report("passive", "every curve is monotone; no regenerative window")
    if len(fast_tp) != 2 or fast_tp[0].kind != "max":
        return report("invalid", "fast curve is not single-N-shaped")
    if not slow_tp:
        return report(
            "fast-excitable",
            "fast regenerative window with monotone slow restoration",
        )
    if len(slow_tp) != 2 or slow_tp[0].kind != "max":
        return report("invalid", "slow curve is not single-N-shaped")
    if thresholds["v1_slow"] >= thresholds["v1_fast"]:
        return report(
            "invalid",
            "slow regenerative window does not open below the fast one",
        )
    return report(
        "burst-capable",
        "nested fast and slow regenerative windows with monotone steady-state "
        "restoration",
    )


def steady_state_roots(spec: NeuronSpec, i_app: float) -> list[float]:
    """All rest candidates: roots of the steady-state curve minus i_app."""
    curve = iv_curve(spec, "ultraslow")

    def g(v):
        return curve.current(v) - i_app

    resid = curve.i - i_app
    roots = []
    for k in range(len(curve.v) - 1):
        a, b = resid[k], resid[k + 1]
        if a == 0.0:
            if not roots or abs(roots[-1] - curve.v[k]) > 1e-9:
                roots.append(float(curve.v[k]))
            continue
        if a * b < 0.0:
            roots.append(_bisect(g, curve.v[k], curve.v[k + 1]))
    if resid[-1] == 0.0:
        roots.append(float(curve.v[-1]))
    if not roots:
        # monotone growth of the curve guarantees a root somewhere; widen
        lo, hi = float(curve.v[0]), float(curve.v[-1])
        width = hi - lo
        while g(lo) > 0.0 and width < 1e6:
            lo -= width
            width *= 2.0
        width = hi - lo
        while g(hi) < 0.0 and width < 1e6:
            hi += width
            width *= 2.0
        roots.append(_bisect(g, lo, hi))
    return roots


def rest_equilibrium(spec: NeuronSpec, i_app: float) -> float:
    """The unique rest voltage on a monotone steady-state curve."""
    roots = steady_state_roots(spec, i_app)
    if len(roots) != 1:
        raise ValueError(
            f"steady-state curve has {len(roots)} intersections at i_app={i_app}; "
            "rest is not unique"
        )
    return roots[0]


@dataclass
class RegimePrediction:
    regime: str  # one of REGIMES
    v_rest: float
    i_app: float
    margin: float
    structure: StructureReport


def predict_regime(spec: NeuronSpec, i_app: float,
                   margin: float = DEFAULT_MARGIN) -> RegimePrediction:
    """Predict the firing regime from curve geometry alone (no simulation).

    Places the rest point on the steady-state curve, then reads off where it
    falls relative to the regenerative windows.  Within ``margin`` of a
    window edge (on the resting side) the call hedges to an excitable label.
    """
    st = classify_structure(spec)
    if st.kind == "invalid":
        raise ValueError(f"cannot predict regime: {st.reason}")
    v_rest = rest_equilibrium(spec, i_app)

    def pred(regime):
        return RegimePrediction(regime=regime, v_rest=v_rest, i_app=i_app,
                                margin=margin, structure=st)

    if st.kind == "passive":
        return pred("resting")
    v1f = st.thresholds["v1_fast"]
    v2f = st.thresholds["v2_fast"]
    if st.kind == "fast-excitable":
        if v1f < v_rest < v2f:
            return pred("spiking")
        if v1f - margin <= v_rest <= v1f or v2f <= v_rest <= v2f + margin:
            return pred("excitable")
        return pred("resting")
    v1s = st.thresholds["v1_slow"]
    v2s = st.thresholds["v2_slow"]
    if v1s < v_rest < v2s:
        return pred("bursting")
    if v2s <= v_rest < v2f:
        return pred("spiking")
    if v1s - margin <= v_rest <= v1s:
        return pred("burst-excitable")
    if v2f <= v_rest <= v2f + margin:
        return pred("excitable")
    return pred("resting")


def regime_bands(spec: NeuronSpec) -> dict[str, tuple[float, float]]:
    """Applied-current intervals for the rhythmic regimes.

    Maps window edges through the steady-state curve.  Keys present depend
    on the structure: burst-capable specs get "bursting" and "spiking",
    fast-excitable specs get "spiking" only.
    """
    st = classify_structure(spec)
    if st.kind in ("passive", "invalid"):
        return {}
    steady = iv_curve(spec, "ultraslow")
    v2f = st.thresholds["v2_fast"]
    out = {}
    if st.kind == "fast-excitable":
        v1f = st.thresholds["v1_fast"]
        out["spiking"] = (float(steady.current(v1f)), float(steady.current(v2f)))
        return out
    v1s = st.thresholds["v1_slow"]
    v2s = st.thresholds["v2_slow"]
    out["bursting"] = (float(steady.current(v1s)), float(steady.current(v2s)))
    out["spiking"] = (float(steady.current(v2s)), float(steady.current(v2f)))
    return out


def bursting_band(spec: NeuronSpec) -> tuple[float, float]:
    bands = regime_bands(spec)
    if "bursting" not in bands:
        raise ValueError("spec has no bursting band (not burst-capable)")
    return bands["bursting"]


@dataclass
class TransitionReport:
    alpha_star: float
    delta_star: float
    v_anchor: float
    label: str
    slope_residual: float
    curvature_residual: float


def transition_gain(spec: NeuronSpec, label: str = "slow_neg",
                    delta_halfwidth: float = 2.0,
                    alpha_max: float = 10.0) -> TransitionReport:
    """Critical gain of a slow element at which the slow curve degenerates.

    Anchors at the fast curve's local maximum, then (1) tunes the element's
    offset until the slow curve's curvature vanishes there, and (2) with the
    offset pinned, tunes the gain until the slope vanishes too.  At that
    point the slow curve has a degenerate flat fold at the anchor: below the
    critical gain the structure is fast-excitable, above it the slow window
    opens below the fast threshold and the structure is burst-capable.
    """
    spec.require_valid()
    el = next((e for e in spec.elements if e.label == label), None)
    if el is None:
        raise ValueError(f"no element labelled {label!r}")
    if el.timescale != "slow":
        raise ValueError(f"element {label!r} is {el.timescale}, expected slow")

    fast_tp = iv_curve(spec, "fast").turning_points()
    maxima = [tp for tp in fast_tp if tp.kind == "max"]
    if not maxima:
        raise ValueError("fast curve has no local maximum to anchor on")
    v_anchor = maxima[0].v

    work = spec.copy()
    wel = next(e for e in work.elements if e.label == label)

    def curvature_at_anchor(delta):
        wel.delta = delta
        return float(iv_curve(work, "slow").curvature(np.array(v_anchor)))

    delta_star = _bisect(curvature_at_anchor,
                         v_anchor - delta_halfwidth, v_anchor + delta_halfwidth)
    wel.delta = delta_star

    def slope_at_anchor(alpha):
        wel.alpha = alpha
        return float(iv_curve(work, "slow").slope(np.array(v_anchor)))

    alpha_star = _bisect(slope_at_anchor, 0.0, alpha_max)
    wel.alpha = alpha_star
    slow = iv_curve(work, "slow")
    return TransitionReport(
        alpha_star=alpha_star,
        delta_star=delta_star,
        v_anchor=v_anchor,
        label=label,
        slope_residual=float(slow.slope(np.array(v_anchor))),
        curvature_residual=float(slow.curvature(np.array(v_anchor))),
    )
