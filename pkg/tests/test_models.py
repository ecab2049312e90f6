"""Reference model assembly, rate functions, and trajectory invariants."""
import math

import numpy as np
import pytest

from neuromix import kernels, models, sim
from neuromix.sim import CurrentStep


@pytest.fixture(scope="module")
def hh():
    return models.build_hodgkin_huxley()


@pytest.fixture(scope="module")
def r15():
    return models.build_aplysia_r15()


# -- construction ---------------------------------------------------------------

def test_hh_reversals(hh):
    by_name = {c.name: c for c in hh.currents}
    assert by_name["sodium"].reversal == 40.0
    assert by_name["potassium"].reversal == -70.0


def test_hh_gate_exponents(hh):
    by_name = {c.name: c for c in hh.currents}
    na = {g.name: g.exponent for g in by_name["sodium"].gates}
    assert na == {"m": 3, "h": 1}
    assert by_name["potassium"].gates[0].exponent == 4


def test_hh_state_layout(hh):
    assert hh.state_names == ("v", "m", "h", "n")
    assert hh.dimension == 4


def test_hh_rest_balances_currents(hh):
    y = hh.rest()
    assert abs(hh.steady_current(y[0])) < 1e-9
    # gates are on the steady-state manifold at the rest voltage
    manifold = hh.steady_gates(y[0])
    assert np.allclose(y[1:], [manifold[n] for n in ("m", "h", "n")], atol=1e-12)


def test_hh_parameter_fixture_versioned():
    p = models.load_parameter_fixture("hodgkin_huxley_params.json")
    assert p["version"] == 1
    assert p["e_na"] == 40.0 and p["e_k"] == -70.0


def test_hh_overrides():
    mdl = models.build_hodgkin_huxley({"g_na": 100.0})
    assert {c.name: c for c in mdl.currents}["sodium"].max_conductance == 100.0
    with pytest.raises(ValueError):
        models.build_hodgkin_huxley({"g_nap": 1.0})


def test_r15_kca_saturation(r15):
    kca = {c.name: c for c in r15.currents}["k-ca"]
    assert kca.special_form.value(0.5) == pytest.approx(0.5, abs=1e-15)
    assert kca.special_form.value(0.0) == 0.0


def test_r15_state_layout(r15):
    # sodium activation is pinned to its steady state, so no m state
    assert r15.state_names == ("v", "h", "n", "x", "c")
    m = next(g for g in r15.gates if g.name == "m")
    assert not m.dynamic


def test_r15_bursts_from_defaults(r15):
    tr = r15.simulate(30_000.0, dt=0.05, y0=r15.default_initial_state,
                      record_dt=0.5)
    spikes = sim.detect_spikes(tr.t, tr.v(), min_span=5.0)
    bursts = sim.segment_bursts(spikes)
    assert len(bursts) >= 3
    assert all(len(b) >= 2 for b in bursts)


# -- rate functions and gates -----------------------------------------------------

def test_gate_steady_state_limits(hh):
    m, h, n = hh.gates
    assert models.gate_steady_state(m, 2000.0) == pytest.approx(1.0, abs=1e-9)
    assert models.gate_steady_state(n, 2000.0) == pytest.approx(1.0, abs=1e-9)
    assert models.gate_steady_state(h, 2000.0) == pytest.approx(0.0, abs=1e-9)
    assert models.gate_steady_state(h, -500.0) == pytest.approx(1.0, abs=1e-9)


def test_gate_steady_state_monotone(hh, r15):
    grid = np.linspace(-100.0, 60.0, 321)
    for mdl in (hh, r15):
        for g in mdl.gates:
            vals = np.array([models.gate_steady_state(g, v) for v in grid])
            d = np.diff(vals)
            if g.kind == "activation":
                assert (d >= -1e-15).all(), g.name
            else:
                assert (d <= 1e-15).all(), g.name
            assert vals.min() >= 0.0 and vals.max() <= 1.0


def test_hh_m_half_activation(hh):
    m = hh.gates[0]
    lo, hi = -80.0, 20.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if models.gate_steady_state(m, mid) < 0.5:
            lo = mid
        else:
            hi = mid
    v_half = 0.5 * (lo + hi)
    assert models.gate_steady_state(m, v_half) == pytest.approx(0.5, abs=1e-9)
    assert -60.0 < v_half < -20.0


def test_time_constants_positive(hh, r15):
    grid = np.linspace(-100.0, 60.0, 161)
    for mdl in (hh, r15):
        for g in mdl.gates:
            assert all(g.time_constant(v) > 0.0 for v in grid), g.name


def test_rate_ratio_singularity_is_removable():
    k = 10.0
    left = models._ratio_up(-1e-13, k)
    right = models._ratio_up(1e-13, k)
    assert left == pytest.approx(k, abs=1e-9)
    assert right == pytest.approx(k, abs=1e-9)
    # slope guard agrees with the exact branch across the switch point
    for x in (0.9e-3, 1.1e-3):
        exact = models._ratio_up_slope(x * 1.001, k)
        assert models._ratio_up_slope(x, k) == pytest.approx(exact, rel=1e-3)


# -- trajectory invariants --------------------------------------------------------

def _conservation_residual(mdl, trace, i_app):
    seg = kernels.empty_segments()
    worst = 0.0
    for row in trace.y:
        v, values = mdl.unpack(row)
        dv = kernels.model_rhs(mdl.kernel_id, mdl.kernel_params, seg,
                               0.0, row, i_app)[0]
        worst = max(worst, abs(mdl.capacitance * dv
                               + mdl.ionic_current(v, values) - i_app))
    return worst


def test_hh_current_conservation(hh):
    tr = hh.simulate(80.0, dt=0.01, i_app=7.0,
                     y0=hh.rest() + np.array([2.0, 0, 0, 0]), record_dt=0.1)
    assert _conservation_residual(hh, tr, 7.0) < 1e-10


def test_r15_current_conservation(r15):
    tr = r15.simulate(2_000.0, dt=0.05, y0=r15.default_initial_state,
                      record_dt=2.0)
    assert _conservation_residual(r15, tr, 0.0) < 1e-10


def test_gating_boxes(hh, r15):
    tr = hh.simulate(100.0, dt=0.01, i_app=10.0,
                     y0=hh.rest() + np.array([5.0, 0, 0, 0]), record_dt=0.05)
    for k in (1, 2, 3):
        assert tr.y[:, k].min() >= -1e-12 and tr.y[:, k].max() <= 1.0 + 1e-12
    tr = r15.simulate(30_000.0, dt=0.05, y0=r15.default_initial_state,
                      record_dt=1.0)
    for k in (1, 2, 3):
        assert tr.y[:, k].min() >= -1e-12 and tr.y[:, k].max() <= 1.0 + 1e-12
    assert tr.y[:, 4].min() >= 0.0


def test_r15_timescale_ordering(r15):
    tr = r15.simulate(30_000.0, dt=0.05, y0=r15.default_initial_state,
                      record_dt=5.0)
    v_lo, v_hi = tr.v().min(), tr.v().max()
    gates = {g.name: g for g in r15.gates}
    fast_tau = 0.0
    for v in np.linspace(v_lo, v_hi, 101):
        fast_tau = max(fast_tau, gates["h"].time_constant(v),
                       gates["n"].time_constant(v))
    slow_tau = min(gates["x"].time_constant(0.0),
                   r15.concentrations[0].time_constant(0.0))
    assert slow_tau > fast_tau


def test_hh_all_or_none_band(hh):
    """1 ms pulse family: peak deflections avoid [rest+20, rest+60] mV."""
    rest = hh.rest()
    peaks = []
    for amp in np.arange(1.0, 12.0 + 1e-9, 0.5):
        tr = hh.simulate(30.0, dt=0.01, y0=rest,
                         protocol=[CurrentStep(amp, 1.0, 2.0)])
        peaks.append(tr.v().max() - rest[0])
    peaks = np.asarray(peaks)
    in_band = (peaks >= 20.0) & (peaks <= 60.0)
    assert not in_band.any()
    assert peaks.min() < 20.0 and peaks.max() > 60.0


# -- kernel agreement -------------------------------------------------------------

def test_rhs_matches_kernel(hh, r15):
    seg = kernels.empty_segments()
    rng = np.random.default_rng(7)
    for mdl, box in ((hh, 3), (r15, 3)):
        for _ in range(60):
            v = rng.uniform(-90.0, 40.0)
            gates = rng.uniform(0.01, 0.99, box)
            y = np.array([v, *gates]) if mdl is hh else np.array(
                [v, *gates, rng.uniform(0.05, 1.5)])
            i_app = rng.uniform(-3.0, 12.0)
            mine = mdl.rhs(y, 0.0, i_app)
            kern = kernels.model_rhs(mdl.kernel_id, mdl.kernel_params, seg,
                                     0.0, y, i_app)
            assert np.max(np.abs(mine - kern)) < 1e-10


def test_simulate_rejects_param_ramps(hh):
    from neuromix.sim import ParamRamp
    with pytest.raises(TypeError):
        hh.simulate(10.0, protocol=[ParamRamp("node0.i_base", 0, 1, 0, 5)])


# -- minimal models ----------------------------------------------------------------

def test_fhn_origin_equilibrium():
    vf = models.build_minimal_model("fitzhugh-nagumo", {"a": 0.0, "b": 1.0})
    assert np.allclose(vf.rhs([0.0, 0.0], 0.0, 0.0), [0.0, 0.0])


def test_fhn_nullcline_turning_points():
    vf = models.build_minimal_model("fitzhugh-nagumo")
    h = 1e-5

    def vdot_slope(v):
        up = vf.rhs([v + h, 0.0], 0.0, 0.0)[0]
        dn = vf.rhs([v - h, 0.0], 0.0, 0.0)[0]
        return (up - dn) / (2 * h)

    assert vdot_slope(1.0) == pytest.approx(0.0, abs=1e-8)
    assert vdot_slope(-1.0) == pytest.approx(0.0, abs=1e-8)
    assert vdot_slope(0.0) == pytest.approx(1.0, abs=1e-8)
    assert vdot_slope(2.0) < 0.0


def test_hindmarsh_rose_slow_row():
    vf = models.build_minimal_model("hindmarsh-rose")
    c = vf.default_params["c"]
    got = vf.rhs([0.0, 0.25, 0.1], 0.0, 0.0)
    assert got[1] == pytest.approx(-c - 0.25, abs=1e-15)


def test_transcritical_fast_row():
    p = {"n0": 0.3}
    vf = models.build_minimal_model("transcritical", p)
    v, n, z, i_app = 0.4, -0.1, 0.05, 0.2
    want = -(v ** 3) / 3.0 + v - (n + p["n0"]) ** 2 - z + i_app
    assert vf.rhs([v, n, z], 0.0, i_app)[0] == pytest.approx(want, abs=1e-15)


def test_morris_lecar_structure():
    vf = models.build_minimal_model("morris-lecar")
    p = vf.default_params
    # at v = e_leak with n = 0, only the calcium term drives the voltage
    v = p["e_leak"]
    m_inf = 0.5 * (1.0 + math.tanh((v - p["m_half"]) / p["m_width"]))
    want = -p["g_ca"] * m_inf * (v - p["e_ca"]) / p["capacitance"]
    assert vf.rhs([v, 0.0], 0.0, 0.0)[0] == pytest.approx(want, rel=1e-12)


def test_minimal_model_errors():
    with pytest.raises(ValueError):
        models.build_minimal_model("izhikevich")
    with pytest.raises(ValueError):
        models.build_minimal_model("fitzhugh-nagumo", {"alpha": 1.0})
    with pytest.raises(ValueError):
        models.build_minimal_model("fitzhugh-nagumo", {"a": None})


def test_vector_field_finite_on_box():
    for mid in models.MINIMAL_MODEL_IDS:
        vf = models.build_minimal_model(mid)
        rng = np.random.default_rng(11)
        for _ in range(25):
            y = rng.uniform(-2.0, 2.0, vf.dimension)
            if mid == "morris-lecar":
                y[0] = rng.uniform(-80.0, 40.0)
            out = vf.rhs(y, 0.0, rng.uniform(-1.0, 1.0))
            assert np.isfinite(out).all()
