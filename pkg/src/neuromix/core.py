"""Neuron building blocks: passive membranes plus filtered saturating feedback.

A cell is a capacitor in parallel with a monotone passive element and a bank
of feedback elements.  Each feedback element first-order filters the membrane
voltage (``tau_x * dv_x/dt = v - v_x``) and feeds the result through a static
saturating nonlinearity::

    f(v_x) = sign * alpha * tanh(v_x - delta)

``sign = +1`` gives a positive (dissipative) conductance, ``sign = -1`` a
negative (regenerative) one.  Elements carry a timescale class tag; the tags
must be separated by at least :data:`MIN_TIMESCALE_RATIO` and they decide
which elements participate in each timescale-indexed current-voltage curve.

Everything here is dimensionless.  Conductance-based models in physical units
live in :mod:`neuromix.models`; no implicit unit conversion happens anywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ANALYSIS_POINTS",
    "ANALYSIS_WINDOW",
    "MIN_TIMESCALE_RATIO",
    "TIMESCALES",
    "CURVE_TAGS",
    "FeedbackElement",
    "InvalidSpecError",
    "NeuronSpec",
    "PassiveElement",
    "ValidationReport",
    "analysis_grid",
    "sech2",
]

# Default analysis window and grid resolution for curve work.
ANALYSIS_WINDOW: tuple[float, float] = (-5.0, 5.0)
ANALYSIS_POINTS: int = 2001

# Required separation between adjacent timescale classes.
MIN_TIMESCALE_RATIO: float = 10.0

# Element classes, ordered fast to slow.  "instantaneous" is reserved for the
# passive-only curve tag and is not a legal element class.
TIMESCALES: tuple[str, ...] = ("fast", "slow", "ultraslow")
CURVE_TAGS: tuple[str, ...] = ("instantaneous",) + TIMESCALES

_RANK = {tag: i for i, tag in enumerate(CURVE_TAGS)}


class InvalidSpecError(ValueError):
    """Raised when a spec fails validation and a valid one is required."""


def timescale_rank(tag: str) -> int:
    try:
        return _RANK[tag]
    except KeyError:
        raise ValueError(f"unknown timescale tag {tag!r}; expected one of {CURVE_TAGS}") from None


def analysis_grid(window: tuple[float, float] = ANALYSIS_WINDOW,
                  points: int = ANALYSIS_POINTS) -> np.ndarray:
    """Uniform voltage grid used by curve analysis."""
    lo, hi = window
    if not hi > lo:
        raise ValueError("analysis window must satisfy lo < hi")
    return np.linspace(lo, hi, points)


def sech2(x):
    """Numerically safe sech^2; exactly 0 once tanh has saturated."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    small = np.abs(x) < 20.0
    c = np.cosh(np.where(small, x, 0.0))
    np.divide(1.0, c * c, out=out, where=small)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass
class PassiveElement:
    """Monotone instantaneous element carrying the leak current.

    Two kinds are supported:

    ``linear``
        ``i_p(v) = g * (v - e_rev)`` with ``g > 0``.

    ``tanh-sum``
        ``i_p(v) = sum_k a_k * tanh(v - d_k)`` with all ``a_k > 0``.  The sum
        of shifted saturations stays strictly increasing on any bounded
        window, which is all the analysis relies on.

    Attributes
    ----------
    kind:
        "linear" or "tanh-sum".
    g, e_rev:
        Linear-leak conductance and reversal (linear kind only).
    terms:
        Tuple of (a_k, d_k) pairs (tanh-sum kind only).
    """

    kind: str = "linear"
    g: float = 1.0
    e_rev: float = 0.0
    terms: tuple[tuple[float, float], ...] = ()

    def current(self, v):
        if self.kind == "linear":
            return self.g * (np.asarray(v, dtype=float) - self.e_rev)
        v = np.asarray(v, dtype=float)
        total = np.zeros_like(v)
        for a, d in self.terms:
            total = total + a * np.tanh(v - d)
        return total

    def slope(self, v):
        if self.kind == "linear":
            v = np.asarray(v, dtype=float)
            return np.full_like(v, self.g) if v.ndim else self.g
        v = np.asarray(v, dtype=float)
        total = np.zeros_like(v)
        for a, d in self.terms:
            total = total + a * sech2(v - d)
        return total

    def curvature(self, v):
        if self.kind == "linear":
            v = np.asarray(v, dtype=float)
            return np.zeros_like(v) if v.ndim else 0.0
        v = np.asarray(v, dtype=float)
        total = np.zeros_like(v)
        for a, d in self.terms:
            u = v - d
            total = total + a * (-2.0) * sech2(u) * np.tanh(u)
        return total

    def problems(self, window: tuple[float, float] = ANALYSIS_WINDOW) -> list[str]:
        out: list[str] = []
        if self.kind == "linear":
            if not self.g > 0:
                out.append(f"passive linear conductance must be > 0, got {self.g}")
        elif self.kind == "tanh-sum":
            if not self.terms:
                out.append("tanh-sum passive element needs at least one term")
            for k, (a, _) in enumerate(self.terms):
                if not a > 0:
                    out.append(f"tanh-sum passive term {k} gain must be > 0, got {a}")
            if not out:
                grid = analysis_grid(window, 501)
                if float(np.min(self.slope(grid))) <= 0.0:
                    out.append("passive element is not strictly increasing on the analysis window")
        else:
            out.append(f"unknown passive kind {self.kind!r}")
        return out

    def to_dict(self) -> dict:
        if self.kind == "linear":
            return {"kind": "linear", "g": self.g, "e_rev": self.e_rev}
        return {"kind": "tanh-sum", "terms": [list(t) for t in self.terms]}

    @classmethod
    def from_dict(cls, d: dict) -> "PassiveElement":
        if d.get("kind", "linear") == "linear":
            return cls(kind="linear", g=float(d.get("g", 1.0)), e_rev=float(d.get("e_rev", 0.0)))
        return cls(kind="tanh-sum",
                   terms=tuple((float(a), float(b)) for a, b in d["terms"]))


@dataclass
class FeedbackElement:
    """One filtered tanh element.

    Attributes
    ----------
    sign:
        +1 for a positive-conductance element, -1 for a negative one.
    alpha:
        Gain, >= 0.  Zero disables the element without removing its state.
    delta:
        Center of the tanh activation.
    tau:
        Filter time constant.  ``tau == 0`` (legal for fast elements only)
        means the filter is instantaneous and the element carries no state.
    timescale:
        One of "fast", "slow", "ultraslow".
    label:
        Optional name used in state headers and parameter paths.
    """

    sign: int
    alpha: float
    delta: float
    tau: float
    timescale: str
    label: str = ""

    def current(self, v_x):
        return self.sign * self.alpha * np.tanh(np.asarray(v_x, dtype=float) - self.delta)

    def slope(self, v_x):
        # d f / d v_x; the element's conductance contribution when settled.
        return self.sign * self.alpha * sech2(np.asarray(v_x, dtype=float) - self.delta)

    def curvature(self, v_x):
        u = np.asarray(v_x, dtype=float) - self.delta
        return self.sign * self.alpha * (-2.0) * sech2(u) * np.tanh(u)

    @property
    def conductance_class(self) -> str:
        return "negative" if self.sign < 0 else "positive"

    def problems(self) -> list[str]:
        out: list[str] = []
        if self.sign not in (-1, 1):
            out.append(f"element sign must be +1 or -1, got {self.sign}")
        if not self.alpha >= 0:
            out.append(f"element gain must be >= 0, got {self.alpha}")
        if not self.tau >= 0:
            out.append(f"element time constant must be >= 0, got {self.tau}")
        if self.timescale not in TIMESCALES:
            out.append(f"element timescale must be one of {TIMESCALES}, got {self.timescale!r}")
        elif self.tau == 0 and self.timescale != "fast":
            out.append(f"tau = 0 is only legal for fast elements, got a {self.timescale} one")
        return out

    def to_dict(self) -> dict:
        return {"sign": self.sign, "alpha": self.alpha, "delta": self.delta,
                "tau": self.tau, "timescale": self.timescale, "label": self.label}

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackElement":
        sign = d["sign"]
        if isinstance(sign, str):
            sign = {"positive": 1, "negative": -1}[sign]
        return cls(sign=int(sign), alpha=float(d["alpha"]), delta=float(d["delta"]),
                   tau=float(d["tau"]), timescale=str(d["timescale"]),
                   label=str(d.get("label", "")))


@dataclass
class ValidationReport:
    ok: bool
    problems: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.ok


@dataclass
class NeuronSpec:
    """A single cell: capacitance, passive element, feedback element bank.

    State ordering is deterministic: membrane voltage first, then one filter
    state per element with ``tau > 0`` in declaration order.
    """

    c: float = 1.0
    passive: PassiveElement = field(default_factory=PassiveElement)
    elements: list[FeedbackElement] = field(default_factory=list)
    name: str = "cell"

    # -- structure ---------------------------------------------------------

    def element_label(self, idx: int) -> str:
        el = self.elements[idx]
        return el.label or f"x{idx}"

    def state_names(self) -> list[str]:
        names = ["v"]
        for i, el in enumerate(self.elements):
            if el.tau > 0:
                names.append(self.element_label(i))
        return names

    @property
    def dim(self) -> int:
        return 1 + sum(1 for el in self.elements if el.tau > 0)

    def elements_up_to(self, tag: str) -> list[FeedbackElement]:
        """Elements whose class is at least as fast as ``tag`` (class rank)."""
        r = timescale_rank(tag)
        return [el for el in self.elements if timescale_rank(el.timescale) <= r]

    def elements_in(self, tag: str) -> list[FeedbackElement]:
        return [el for el in self.elements if el.timescale == tag]

    def tau_v(self, window: tuple[float, float] = ANALYSIS_WINDOW) -> float:
        """Membrane time constant; worst case over the analysis window."""
        grid = analysis_grid(window, 501)
        g_min = float(np.min(self.passive.slope(grid)))
        if g_min <= 0:
            return math.inf
        return self.c / g_min

    def slowest_tau(self) -> float:
        taus = [el.tau for el in self.elements if el.tau > 0]
        return max(taus) if taus else self.tau_v()

    # -- validation --------------------------------------------------------

    def validate(self, window: tuple[float, float] = ANALYSIS_WINDOW) -> ValidationReport:
        problems: list[str] = []
        if not self.c > 0:
            problems.append(f"capacitance must be > 0, got {self.c}")
        problems += self.passive.problems(window)
        for i, el in enumerate(self.elements):
            problems += [f"element {i}: {p}" for p in el.problems()]
        if problems:
            return ValidationReport(False, problems)

        # Class separation: every class must sit MIN_TIMESCALE_RATIO above the
        # slowest representative of the previous one (membrane included).
        tau_v = self.tau_v(window)
        fast_taus = [el.tau for el in self.elements_in("fast")]
        floor = max([tau_v] + fast_taus)
        for tag in ("slow", "ultraslow"):
            taus = [el.tau for el in self.elements_in(tag)]
            if not taus:
                continue
            if min(taus) < MIN_TIMESCALE_RATIO * floor:
                problems.append(
                    f"{tag} elements must be >= {MIN_TIMESCALE_RATIO} x slower than "
                    f"{floor:g} (found tau = {min(taus):g})")
            floor = max(taus)
        return ValidationReport(not problems, problems)

    def require_valid(self, window: tuple[float, float] = ANALYSIS_WINDOW) -> None:
        report = self.validate(window)
        if not report.ok:
            raise InvalidSpecError("; ".join(report.problems))

    # -- misc ---------------------------------------------------------------

    def copy(self) -> "NeuronSpec":
        return NeuronSpec(
            c=self.c,
            passive=replace(self.passive, terms=tuple(self.passive.terms)),
            elements=[replace(el) for el in self.elements],
            name=self.name,
        )

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "passive": self.passive.to_dict(),
            "elements": [el.to_dict() for el in self.elements],
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NeuronSpec":
        return cls(
            c=float(d.get("c", 1.0)),
            passive=PassiveElement.from_dict(d.get("passive", {"kind": "linear"})),
            elements=[FeedbackElement.from_dict(e) for e in d.get("elements", [])],
            name=str(d.get("name", "cell")),
        )


def mixed_feedback_spec(alpha_fast_neg: float = 2.0,
                        alpha_slow_pos: float = 2.0,
                        alpha_slow_neg: float = 1.5,
                        alpha_ultra_pos: float = 2.0,
                        delta_fast: float = 0.0,
                        delta_slow_pos: float = 0.0,
                        delta_slow_neg: float = -0.88,
                        delta_ultra: float = -0.88,
                        tau_slow: float = 50.0,
                        tau_ultra: float = 2500.0,
                        name: str = "mixed") -> NeuronSpec:
    """Reference four-element cell used throughout the tests and fixtures.

    Unit leak, instantaneous fast negative element, slow positive/negative
    pair, ultra-slow positive element.  Gains of zero drop the corresponding
    element entirely so the same constructor covers the excitable (no slow
    negative, no ultra-slow) and bursting families.
    """
    elements = []
    if alpha_fast_neg:
        elements.append(FeedbackElement(-1, alpha_fast_neg, delta_fast, 0.0, "fast", "fast_neg"))
    if alpha_slow_pos:
        elements.append(FeedbackElement(+1, alpha_slow_pos, delta_slow_pos, tau_slow, "slow", "slow_pos"))
    if alpha_slow_neg:
        elements.append(FeedbackElement(-1, alpha_slow_neg, delta_slow_neg, tau_slow, "slow", "slow_neg"))
    if alpha_ultra_pos:
        elements.append(FeedbackElement(+1, alpha_ultra_pos, delta_ultra, tau_ultra, "ultraslow", "ultra_pos"))
    return NeuronSpec(c=1.0, passive=PassiveElement(), elements=elements, name=name)


__all__.append("mixed_feedback_spec")
__all__.append("timescale_rank")
