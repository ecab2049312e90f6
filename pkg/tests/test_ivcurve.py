"""Curve geometry against closed-form values.

The expected numbers below are derived by hand from the element algebra:
for a unit leak plus a gain-2 saturating element, the slope 1 - 2*sech^2(v)
changes sign where cosh^2(v) = 2, i.e. v = +/- ln(1 + sqrt(2)); plugging
back in gives the extremal currents.  The slow-curve values follow the same
way from gain 1.5 at offset -0.88 (sign changes at -0.88 +/- acosh(sqrt(1.5))).
"""

import math

import numpy as np
import pytest

from neuromix import mixed_feedback_spec
from neuromix.ivcurve import (
    DEFAULT_MARGIN,
    bursting_band,
    classify_structure,
    iv_curve,
    predict_regime,
    regime_bands,
    rest_equilibrium,
    steady_state_roots,
    transition_gain,
)

LN_1P_SQRT2 = math.log(1.0 + math.sqrt(2.0))       # 0.881373587019543
V1F = -LN_1P_SQRT2
V2F = +LN_1P_SQRT2
I1F = math.sqrt(2.0) - LN_1P_SQRT2                  # current at the fast max
I2F = -I1F
ACOSH_S15 = math.acosh(math.sqrt(1.5))              # 0.658478948462408
V1S = -0.88 - ACOSH_S15
V2S = -0.88 + ACOSH_S15
I1S = V1S + math.sqrt(3.0) / 2.0
I2S = V2S - math.sqrt(3.0) / 2.0
BAND_LO = V1S - 0.5 / math.sqrt(3.0)                # steady curve at V1S
BAND_HI = V2S + 0.5 / math.sqrt(3.0)


@pytest.fixture
def burst_spec():
    return mixed_feedback_spec()


@pytest.fixture
def fast_spec():
    return mixed_feedback_spec(alpha_slow_neg=0.6)


def test_grid_defaults(burst_spec):
    c = iv_curve(burst_spec, "fast")
    assert c.v.shape == (2001,)
    assert c.v[0] == -5.0 and c.v[-1] == 5.0
    assert np.array_equal(c.i, c.current(c.v))


def test_instantaneous_curve_is_passive_only(burst_spec):
    c = iv_curve(burst_spec, "instantaneous")
    assert np.allclose(c.i, c.v)  # unit leak through the origin
    assert c.is_monotone()


def test_fast_curve_turning_points(burst_spec):
    tps = iv_curve(burst_spec, "fast").turning_points()
    assert [tp.kind for tp in tps] == ["max", "min"]
    assert tps[0].v == pytest.approx(V1F, abs=1e-9)
    assert tps[0].i == pytest.approx(I1F, abs=1e-9)
    assert tps[1].v == pytest.approx(V2F, abs=1e-9)
    assert tps[1].i == pytest.approx(I2F, abs=1e-9)


def test_slow_curve_turning_points(burst_spec):
    tps = iv_curve(burst_spec, "slow").turning_points()
    assert [tp.kind for tp in tps] == ["max", "min"]
    assert tps[0].v == pytest.approx(V1S, abs=1e-9)
    assert tps[0].i == pytest.approx(I1S, abs=1e-9)
    assert tps[1].v == pytest.approx(V2S, abs=1e-9)
    assert tps[1].i == pytest.approx(I2S, abs=1e-9)


def test_ultraslow_curve_monotone(burst_spec):
    c = iv_curve(burst_spec, "ultraslow")
    assert c.is_monotone()
    assert np.all(np.diff(c.i) > 0)


def test_negative_intervals(burst_spec):
    fast = iv_curve(burst_spec, "fast").negative_intervals()
    assert len(fast) == 1
    assert fast[0][0] == pytest.approx(V1F, abs=1e-9)
    assert fast[0][1] == pytest.approx(V2F, abs=1e-9)
    slow = iv_curve(burst_spec, "slow").negative_intervals()
    assert slow[0][0] == pytest.approx(V1S, abs=1e-9)
    assert slow[0][1] == pytest.approx(V2S, abs=1e-9)


def test_tangency_is_not_a_turning_point():
    # gain exactly 1: slope 1 - sech^2(v) touches zero at v = 0 only
    spec = mixed_feedback_spec(alpha_fast_neg=1.0, alpha_slow_pos=0.0,
                               alpha_slow_neg=0.0, alpha_ultra_pos=0.0)
    c = iv_curve(spec, "fast")
    assert float(c.slope(np.array(0.0))) == pytest.approx(0.0, abs=1e-15)
    assert c.turning_points() == []
    assert c.is_monotone()


def test_slope_matches_finite_difference(burst_spec):
    rng = np.random.default_rng(7)
    v = rng.uniform(-4, 4, size=40)
    h = 1e-6
    for tag in ("fast", "slow", "ultraslow"):
        c = iv_curve(burst_spec, tag)
        fd = (c.current(v + h) - c.current(v - h)) / (2 * h)
        assert np.allclose(c.slope(v), fd, rtol=1e-6, atol=1e-8)


class TestClassify:
    def test_burst_capable(self, burst_spec):
        st = classify_structure(burst_spec)
        assert st.kind == "burst-capable"
        assert st.thresholds["v1_fast"] == pytest.approx(V1F, abs=1e-9)
        assert st.thresholds["v1_slow"] == pytest.approx(V1S, abs=1e-9)
        assert st.thresholds["v2_slow"] == pytest.approx(V2S, abs=1e-9)

    def test_fast_excitable(self, fast_spec):
        st = classify_structure(fast_spec)
        assert st.kind == "fast-excitable"
        assert "v1_slow" not in st.thresholds

    def test_passive(self):
        spec = mixed_feedback_spec(alpha_fast_neg=0.0, alpha_slow_neg=0.0)
        assert classify_structure(spec).kind == "passive"

    def test_bistable_is_invalid(self):
        # no ultraslow restoration: the slow N persists to the DC curve
        spec = mixed_feedback_spec(alpha_ultra_pos=0.0)
        st = classify_structure(spec)
        assert st.kind == "invalid"
        assert "bistab" in st.reason

    def test_slow_window_above_fast_is_invalid(self):
        spec = mixed_feedback_spec(delta_slow_neg=1.5)
        st = classify_structure(spec)
        assert st.kind == "invalid"


class TestRest:
    def test_rest_root_is_exact(self, burst_spec):
        for i_app in (-2.0, -0.9, 0.3, 2.9):
            v = rest_equilibrium(burst_spec, i_app)
            resid = iv_curve(burst_spec, "ultraslow").current(np.array(v)) - i_app
            assert abs(float(resid)) < 1e-9

    def test_rest_outside_window(self, burst_spec):
        v = rest_equilibrium(burst_spec, 12.0)
        assert v > 5.0
        resid = iv_curve(burst_spec, "ultraslow").current(np.array(v)) - 12.0
        assert abs(float(resid)) < 1e-9

    def test_bistable_roots(self):
        spec = mixed_feedback_spec(alpha_ultra_pos=0.0)
        roots = steady_state_roots(spec, -0.9)
        assert len(roots) == 3
        with pytest.raises(ValueError):
            rest_equilibrium(spec, -0.9)


class TestPredict:
    @pytest.mark.parametrize("i_app,regime", [
        (-2.5, "resting"),
        (-1.95, "burst-excitable"),
        (-0.9, "bursting"),
        (-1.3, "bursting"),
        (0.5, "spiking"),
        (1.45, "excitable"),
        (2.9, "resting"),
    ])
    def test_burst_capable_regimes(self, burst_spec, i_app, regime):
        assert predict_regime(burst_spec, i_app).regime == regime

    def test_fast_excitable_spiking(self, fast_spec):
        p = predict_regime(fast_spec, 0.0)
        assert p.regime == "spiking"
        assert -0.88 < p.v_rest < 0.88

    def test_fast_excitable_resting(self, fast_spec):
        assert predict_regime(fast_spec, -3.0).regime == "resting"
        assert predict_regime(fast_spec, 4.0).regime == "resting"

    def test_passive_always_resting(self):
        spec = mixed_feedback_spec(alpha_fast_neg=0.0, alpha_slow_neg=0.0)
        for i_app in (-3.0, 0.0, 3.0):
            assert predict_regime(spec, i_app).regime == "resting"

    def test_invalid_raises(self):
        spec = mixed_feedback_spec(alpha_ultra_pos=0.0)
        with pytest.raises(ValueError):
            predict_regime(spec, -0.9)

    def test_margin_default(self, burst_spec):
        assert predict_regime(burst_spec, -0.9).margin == DEFAULT_MARGIN


class TestBands:
    def test_bursting_band(self, burst_spec):
        lo, hi = bursting_band(burst_spec)
        assert lo == pytest.approx(BAND_LO, abs=1e-9)
        assert hi == pytest.approx(BAND_HI, abs=1e-9)

    def test_spiking_band(self, burst_spec):
        lo, hi = regime_bands(burst_spec)["spiking"]
        assert lo == pytest.approx(BAND_HI, abs=1e-9)
        # steady curve at the fast minimum: v2f + 0.5*tanh(v2f + 0.88)
        assert hi == pytest.approx(V2F + 0.5 * math.tanh(V2F + 0.88), abs=1e-9)

    def test_band_edges_predict_consistently(self, burst_spec):
        lo, hi = bursting_band(burst_spec)
        eps = 1e-6
        assert predict_regime(burst_spec, lo + eps).regime == "bursting"
        assert predict_regime(burst_spec, hi - eps).regime == "bursting"
        assert predict_regime(burst_spec, hi + eps).regime == "spiking"

    def test_no_band_for_fast_excitable(self, fast_spec):
        with pytest.raises(ValueError):
            bursting_band(fast_spec)


class TestTransitionGain:
    def test_critical_gain_of_reference_family(self, burst_spec):
        rep = transition_gain(burst_spec, "slow_neg")
        # the 2*tanh(v) and -2*tanh(v) terms cancel in the slow curve, so
        # the degenerate fold sits exactly at gain 1, offset at the fast max
        assert rep.alpha_star == pytest.approx(1.0, abs=1e-6)
        assert rep.delta_star == pytest.approx(V1F, abs=1e-6)
        assert abs(rep.slope_residual) < 1e-10
        assert abs(rep.curvature_residual) < 1e-10

    def test_structure_flips_across_critical_gain(self, burst_spec):
        rep = transition_gain(burst_spec, "slow_neg")
        below = mixed_feedback_spec(alpha_slow_neg=rep.alpha_star - 0.05,
                                    delta_slow_neg=rep.delta_star)
        above = mixed_feedback_spec(alpha_slow_neg=rep.alpha_star + 0.05,
                                    delta_slow_neg=rep.delta_star)
        assert classify_structure(below).kind == "fast-excitable"
        assert classify_structure(above).kind == "burst-capable"

    def test_requires_slow_element(self, burst_spec):
        with pytest.raises(ValueError):
            transition_gain(burst_spec, "ultra_pos")
        with pytest.raises(ValueError):
            transition_gain(burst_spec, "nope")

    def test_original_spec_untouched(self, burst_spec):
        before = burst_spec.to_dict()
        transition_gain(burst_spec, "slow_neg")
        assert burst_spec.to_dict() == before
