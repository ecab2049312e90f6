"""End-to-end acceptance battery.

One test per shipped guarantee, each a single pass/fail line under
``pytest -v``.  These tests assert contract bounds (tolerances, counts,
monotonicity), never the measured point values themselves; the module
test files pin those separately.  Each guarantee carries a wall budget,
checked on process CPU time and only when the compiled kernel is active:
the pure-python fallback (``NEUROMIX_PURE=1``) trades speed for
portability and is exempt from the budgets, not from the numerics.
"""
import contextlib
import math
import time

import numpy as np
import pytest

from neuromix import cli, hardware, ivcurve, kernels, linearize, models
from neuromix import network as nw
from neuromix import sim
from neuromix.core import NeuronSpec, PassiveElement, mixed_feedback_spec

BURSTER = mixed_feedback_spec()


@contextlib.contextmanager
def budget(seconds):
    t0 = time.process_time()
    yield
    used = time.process_time() - t0
    if kernels.IMPLEMENTATION == "compiled":
        assert used < seconds, f"{used:.1f} s CPU, budget {seconds:.0f} s"


@pytest.fixture(scope="module")
def hh():
    return models.build_hodgkin_huxley()


# -- static geometry ---------------------------------------------------------------

def test_fast_curve_turning_points_are_analytic():
    """I(V) = V - 2 tanh V turns at +-ln(1 + sqrt 2), to 1e-9."""
    with budget(1.0):
        tps = ivcurve.iv_curve(BURSTER, "fast").turning_points()
        assert len(tps) == 2
        knee = math.log(1.0 + math.sqrt(2.0))
        vs = sorted(tp.v for tp in tps)
        assert vs[0] == pytest.approx(-knee, abs=1e-9)
        assert vs[1] == pytest.approx(knee, abs=1e-9)


def test_curve_prediction_matches_simulated_behavior():
    """5 gains x 4 currents: curve geometry predicts the simulated regime.

    At least 19 of the 20 cells must agree exactly; any disagreement must
    sit in the hedged excitable-margin labels, never between the firm
    regime labels.  The hedged labels predict a resting steady state.
    """
    with budget(120.0):
        hedged = {"excitable", "burst-excitable"}
        mismatches = []
        for a in (0.0, 0.4, 0.8, 1.2, 1.5):
            spec = mixed_feedback_spec(alpha_slow_neg=a)
            for i_app in (-2.5, -1.2, -0.5, 0.5):
                pred = ivcurve.predict_regime(spec, i_app).regime
                beh = sim.classify_behavior(spec, i_app).kind
                expected = "resting" if pred in hedged else pred
                if beh != expected:
                    mismatches.append((a, i_app, pred, beh))
        assert len(mismatches) <= 1, mismatches
        assert all(m[2] in hedged for m in mismatches), mismatches


def test_critical_gain_matches_simulated_flip():
    """The analytic critical slow gain sits within 5% of the simulated flip.

    The slow element's offset is pinned to the aligned value, the holding
    current to the steady curve at the anchor, and the gain bisected on
    whether settled cycles carry multiple spikes.  The widely separated
    ultra-slow timescale keeps the simulated flip sharp.
    """
    with budget(300.0):
        tau_us = 25000.0
        rep = ivcurve.transition_gain(mixed_feedback_spec(tau_ultra=tau_us))
        assert abs(rep.curvature_residual) < 1e-10

        def variant(alpha):
            return mixed_feedback_spec(alpha_slow_neg=alpha,
                                       delta_slow_neg=rep.delta_star,
                                       tau_ultra=tau_us)

        probe = float(ivcurve.iv_curve(variant(rep.alpha_star), "ultraslow")
                      .current(np.array(rep.v_anchor)))

        def multi_spike_cycles(alpha):
            b = sim.classify_behavior(variant(alpha), probe,
                                      settle=3.0 * tau_us, window=5.0 * tau_us,
                                      record_dt=0.25)
            per_cycle = b.n_spikes / max(b.n_bursts, 1)
            return b.kind == "bursting" or (b.kind == "irregular"
                                            and per_cycle >= 1.5)

        lo, hi = 1.0, 1.2
        assert not multi_spike_cycles(lo)
        assert multi_spike_cycles(hi)
        while hi - lo > 0.01:
            mid = 0.5 * (lo + hi)
            if multi_spike_cycles(mid):
                hi = mid
            else:
                lo = mid
        flip = 0.5 * (lo + hi)
        assert abs(flip - rep.alpha_star) / rep.alpha_star < 0.05


# -- onset of spiking ---------------------------------------------------------------

def _onset_ratio(fi):
    # first spiking frequency over the frequency nearest mid current range
    spiking = np.flatnonzero(fi.spiking_mask() & (fi.f > 0))
    order = spiking[np.argsort(fi.i[spiking])]
    i_mid = 0.5 * (fi.i[order[0]] + fi.i[order[-1]])
    mid = order[np.argmin(np.abs(fi.i[order] - i_mid))]
    return fi.f[order[0]] / fi.f[mid]


def test_onset_types_from_slow_curve_shape():
    """Aligned slow fold starts arbitrarily slow; monotone slow curve does not.

    The aligned fixture's onset frequency must be below 20% of its
    mid-range frequency (continuous onset); the monotone fixture must
    start near full rate.
    """
    with budget(120.0):
        v1f = -math.log(1.0 + math.sqrt(2.0))
        offsets = np.array([2e-5, 2e-4, 1e-3, 5e-3, 0.02, 0.05,
                            0.09, 0.13, 0.17, 0.21])

        aligned = mixed_feedback_spec(
            alpha_slow_neg=1.2,
            delta_slow_neg=v1f + math.acosh(math.sqrt(1.2)),
            alpha_ultra_pos=0.0)
        i_star = v1f + 1.2 * math.sqrt(1.0 / 6.0)  # fold of the slow curve
        fi_a = sim.measure_fI_curve(aligned, i_star + offsets,
                                    settle=500.0, window=10000.0)
        assert sim.classify_onset(fi_a) == "snic-like"
        assert _onset_ratio(fi_a) < 0.2

        monotone = mixed_feedback_spec(alpha_slow_neg=0.0, alpha_ultra_pos=0.0)
        fi_m = sim.measure_fI_curve(monotone, v1f + offsets,
                                    settle=500.0, window=10000.0)
        assert sim.classify_onset(fi_m) == "hopf-like"
        assert _onset_ratio(fi_m) > 0.5


def test_squid_pulse_response_is_all_or_none(hh):
    """1 ms pulses: no peak lands in [rest+20, rest+60] mV; bracket refines."""
    with budget(60.0):
        rep = sim.pulse_response_test(hh, np.arange(1.0, 8.0 + 1e-9),
                                      width=1.0, t0=1.0, dt=0.01)
        assert rep.peaks_in_band(20.0, 60.0).size == 0
        assert rep.bracket == (4.0, 5.0)
        assert rep.gap[0] < 20.0 < 60.0 < rep.gap[1]
        lo, hi = sim.refine_threshold(hh, 1.0, *rep.bracket, split=40.0,
                                      rel=1e-3, t0=1.0, dt=0.01)
        assert rep.bracket[0] <= lo < hi <= rep.bracket[1]
        assert (hi - lo) < 1e-3 * 0.5 * (hi + lo)


# -- conductance-model linearization ---------------------------------------------------

def _richardson(f, x, h):
    d1 = (f(x + h) - f(x - h)) / (2.0 * h)
    d2 = (f(x + 2.0 * h) - f(x - 2.0 * h)) / (4.0 * h)
    return (4.0 * d1 - d2) / 3.0


def _branch_fd(mdl, v, name, values):
    # restrict the current sum to the currents that contain the variable:
    # keeps unrelated-current roundoff out of 1e-16-scale branches
    currents = [c for c in mdl.currents
                if any(g.name == name for g in c.gates)
                or (c.special_form is not None and c.special_form.state == name)]

    def current_of_w(w):
        d = dict(values)
        d[name] = w
        return sum(c.value(v, d) for c in currents)

    dI_dw = _richardson(current_of_w, values[name], 1e-3)
    dw_dv = _richardson(lambda vv: mdl.steady_gates(vv)[name], v, 3e-2)
    return dI_dw * dw_dv


def test_branch_conductances_match_finite_differences(hh):
    """Every analytic branch agrees with central differences to 1e-6 relative,
    and the squid model shows a fast-negative, slow-positive interval."""
    with budget(30.0):
        grid = np.linspace(-100.0, 60.0, 201)
        for mdl in (hh, models.build_aplysia_r15()):
            for v in grid:
                values = mdl.steady_gates(float(v))
                for b in linearize.linearize_at(mdl, float(v)).branches:
                    fd = _branch_fd(mdl, float(v), b.name, values)
                    assert b.conductance == pytest.approx(fd, rel=1e-6), \
                        (mdl.name, v, b.name)
        table = linearize.conductance_profiles(hh, np.linspace(-80.0, 0.0, 81))
        both = (table["fast"] < 0.0) & (table["slow"] > 0.0)
        assert both.any()


# -- rate control -------------------------------------------------------------------

def test_gain_sweeps_steer_rates_monotonically():
    """Scaling the slow gains raises the within-burst rate point by point;
    scaling the ultra-slow gain raises the between-burst rate likewise."""
    with budget(300.0):
        intra = []
        for k in (0.8, 0.9, 1.0, 1.1, 1.2):
            spec = mixed_feedback_spec(alpha_slow_pos=2.0 * k,
                                       alpha_slow_neg=1.5 * k)
            b = sim.classify_behavior(spec, -0.9)
            assert b.kind == "bursting"
            intra.append(b.intraburst_rate)
        assert all(x < y for x, y in zip(intra, intra[1:])), intra

        inter = []
        for k in (0.8, 0.9, 1.0, 1.1, 1.2):
            b = sim.classify_behavior(mixed_feedback_spec(alpha_ultra_pos=2.0 * k),
                                      -0.9)
            assert b.kind == "bursting"
            inter.append(b.interburst_rate)
        assert all(x < y for x, y in zip(inter, inter[1:])), inter


# -- relay switch --------------------------------------------------------------------

def _median_cycle(tr, node, t_from, t_to):
    w = tr.window(t_from, t_to)
    bursts = sim.segment_bursts(sim.detect_spikes(w.t, w.v(node)))
    onsets = np.array([b[0] for b in bursts])
    assert len(onsets) >= 3, "too few cycles to measure a period"
    return float(np.median(np.diff(onsets)))


def test_relay_mode_transmits_bursting_mode_rejects():
    """Slow-spiking cell adds exactly one spike per input pulse; the
    bursting cell's cycle period moves under 10% beneath the same train."""
    with budget(120.0):
        relay = sim.pulse_train_response(mixed_feedback_spec(alpha_slow_neg=0.6),
                                         -0.95, amplitude=0.4, width=5.0,
                                         period=150.0, count=10)
        assert len(relay.baseline_spikes) == 0
        assert relay.n_added == relay.n_pulses == 10

        train = sim.PulseTrain(amplitude=0.4, t0=7500.0, width=5.0,
                               period=150.0, count=10)
        base = sim.simulate(BURSTER, -0.95, t_end=20000.0, record_dt=0.5)
        driven = sim.simulate(BURSTER, -0.95, t_end=20000.0,
                              protocol=[train], record_dt=0.5)
        p0 = _median_cycle(base, 0, 7500.0, 20000.0)
        p1 = _median_cycle(driven, 0, 7500.0, 20000.0)
        assert abs(p1 - p0) / p0 < 0.10


# -- rebound and the half-center pair ---------------------------------------------------

def test_rebound_cells_and_half_center_antiphase():
    """Release from hyperpolarization fires a spike (fast cell) or a burst
    (ultra-slow cell); a pair of such non-oscillators locks in anti-phase."""
    with budget(180.0):
        fast_cell = mixed_feedback_spec(alpha_slow_neg=0.0, alpha_ultra_pos=0.0,
                                        delta_slow_pos=-1.2)
        pf = sim.rebound_test(fast_cell, -0.6, amplitude=-1.0, width=500.0,
                              settle=500.0, post=2000.0)
        assert pf.n_baseline == 0 and pf.n_spikes >= 1

        slow_cell = mixed_feedback_spec(delta_ultra=-2.2)
        ps = sim.rebound_test(slow_cell, -0.65, amplitude=-1.0, width=5000.0,
                              settle=7500.0, post=12500.0)
        groups = sim.segment_bursts(ps.spike_times)
        assert ps.n_baseline == 0 and ps.n_spikes >= 2
        assert max(len(g) for g in groups) >= 2  # a burst, not lone spikes

        hspec = mixed_feedback_spec(delta_ultra=-2.2, tau_ultra=1000.0)
        assert sim.classify_behavior(hspec, -0.65).kind == "resting"
        net = nw.build_half_center(hspec, -2.5, -1.6, i_base=-0.65)
        tr = nw.assemble_network(net).simulate(
            60000.0, protocol=[sim.CurrentStep(1.5, 0.0, 300.0, node=0)],
            record_dt=1.0)
        rr = nw.rhythm_report(tr, t_from=20000.0)
        assert rr.node("a").pattern == rr.node("b").pattern == "bursting"
        pair = rr.pairs[("a", "b")]
        assert pair.locked
        assert abs(pair.phase - 0.5) <= 0.05


def test_half_center_on_off_switch():
    """Lowering only the slow negative gain turns the rhythmic pair into a
    per-pulse relay: the rhythm rejects the train, the relay transmits it."""
    with budget(180.0):
        train = sim.PulseTrain(amplitude=0.4, t0=20000.0, width=5.0,
                               period=150.0, count=10, node=0)

        net_on = nw.build_half_center(BURSTER, -0.3, -0.5, i_base=-0.95)
        tr_on = nw.assemble_network(net_on).simulate(40000.0, protocol=[train],
                                                     record_dt=1.0)
        rr_on = nw.rhythm_report(tr_on.window(0.0, 20000.0), t_from=8000.0)
        assert rr_on.node("a").pattern == "bursting"
        pair = rr_on.pairs[("a", "b")]
        assert pair.locked and 0.25 < pair.phase < 0.75  # alternation
        p_pre = _median_cycle(tr_on, 0, 8000.0, 20000.0)
        p_post = _median_cycle(tr_on, 0, 20000.0, 40000.0)
        assert abs(p_post - p_pre) / p_pre < 0.10

        off_spec = mixed_feedback_spec(alpha_slow_neg=0.6)
        net_off = nw.build_half_center(off_spec, -0.3, -0.5, i_base=-0.95)
        asm = nw.assemble_network(net_off)
        quiet = asm.simulate(25000.0, record_dt=0.5)
        driven = asm.simulate(25000.0, protocol=[train], record_dt=0.5)

        def spikes_after(tr, node):
            w = tr.window(15000.0)
            return len(sim.detect_spikes(w.t, w.v(node)))

        assert spikes_after(quiet, 0) == 0
        assert spikes_after(driven, 0) == 10  # one output spike per pulse


# -- five-cell reconfiguration -----------------------------------------------------------

def test_hub_circuit_reconfiguration():
    """Two pacemaker pairs and a resistive hub: disconnected pairs keep their
    isolated frequencies to 1%; a weak hub leaves both rhythms within 5% and
    carries both arrival-rate spectral peaks; adding slow negative gain to
    the slow pair pulls all five cells onto one rhythm (within 10%)."""
    with budget(600.0):
        fast = mixed_feedback_spec(alpha_ultra_pos=2.4)
        slow = mixed_feedback_spec(alpha_ultra_pos=1.6)
        hub = mixed_feedback_spec(alpha_slow_neg=0.98)

        def iso_freq(spec):
            net = nw.build_half_center(spec, -0.3, -0.5, i_base=-0.95)
            tr = nw.assemble_network(net).simulate(40000.0, record_dt=1.0)
            return nw.rhythm_report(tr, t_from=15000.0).node("a").frequency

        def run(gap_g, t_end, t_from, modulate=False):
            net = nw.build_stg(fast, slow, hub, gap_g, -0.3, -0.5, i_base=-0.95)
            if modulate:
                slow_m = mixed_feedback_spec(alpha_ultra_pos=1.6,
                                             alpha_slow_neg=0.98)
                for node in ("slow_a", "slow_b"):
                    net = nw.with_node_spec(net, node, slow_m)
            tr = nw.assemble_network(net).simulate(t_end, record_dt=1.0)
            return tr, nw.rhythm_report(tr, t_from=t_from)

        f_iso = {"fast": iso_freq(fast), "slow": iso_freq(slow)}

        _, rr_d = run(0.0, 40000.0, 15000.0)
        for tag, node in (("fast", "fast_a"), ("slow", "slow_a")):
            f_net = rr_d.node(node).frequency
            assert abs(f_net - f_iso[tag]) / f_iso[tag] < 0.01
        assert rr_d.node("hub").pattern == "resting"

        tr_c, rr_c = run(0.05, 60000.0, 20000.0)
        f_conn = {}
        for tag, node in (("fast", "fast_a"), ("slow", "slow_a")):
            f_conn[tag] = rr_c.node(node).frequency
            assert abs(f_conn[tag] - f_iso[tag]) / f_iso[tag] <= 0.05
        w = tr_c.window(20000.0)
        freqs, power = nw.power_spectrum(w.t, w.v(4))
        background = float(np.median(power[freqs > 0]))
        for tag in ("fast", "slow"):
            # an anti-phase pair drives the hub twice per pair cycle
            f0 = 2.0 * f_conn[tag]
            band = (freqs >= 0.85 * f0) & (freqs <= 1.15 * f0)
            assert float(power[band].max()) >= 10.0 * background, tag

        _, rr_m = run(0.02, 60000.0, 20000.0, modulate=True)
        f_ref = rr_m.node("fast_a").frequency
        for node in nw.STG_NODE_NAMES:
            assert abs(rr_m.node(node).frequency - f_ref) / f_ref < 0.10, node


# -- hardware mapping ---------------------------------------------------------------------

def test_hardware_round_trip_and_rescaled_equivalence():
    """Spec -> bias sheet -> CSV -> spec is identity to 1e-12, and the
    SI-unit simulation rescales onto the dimensionless trace."""
    with budget(60.0):
        sheet = hardware.map_spec_to_hardware(BURSTER, i_app=-0.95)
        spec2, i2 = hardware.spec_from_sheet(hardware.sheet_from_csv(sheet.to_csv()))
        assert i2 == pytest.approx(-0.95, rel=1e-12)
        for a, b in zip(BURSTER.elements, spec2.elements):
            assert b.alpha == pytest.approx(a.alpha, rel=1e-12)
            assert b.delta == pytest.approx(a.delta, rel=1e-12, abs=1e-14)
            assert b.tau == pytest.approx(a.tau, rel=1e-12, abs=1e-14)
            assert (b.sign, b.timescale, b.label) == (a.sign, a.timescale, a.label)

        sc = hardware.hardware_scales(BURSTER)
        ref = sim.simulate(BURSTER, i_app=-0.95, t_end=3000.0, dt=0.05)
        si = hardware.simulate_hardware(BURSTER, i_app=-0.95 * sc.current,
                                        t_end=3000.0 * sc.time,
                                        dt=0.05 * sc.time)
        back = hardware.rescale_trace(si)
        assert np.max(np.abs(back.y - ref.y)) < 1e-9
        assert np.max(np.abs(back.t - ref.t)) < 1e-9


# -- determinism and integrator order ---------------------------------------------------

def test_fixture_reruns_byte_identical_and_rk4_order(tmp_path):
    """Two full passes over every bundled experiment produce byte-identical
    manifests, and step halving on linear decay cuts the error 16 +- 2."""
    with budget(60.0):
        decay = NeuronSpec(c=1.0, passive=PassiveElement(), elements=[],
                           name="decay")
        exact = math.exp(-1.0)
        errs = [abs(float(sim.simulate(decay, t_end=1.0, dt=dt,
                                       y0=np.array([1.0])).v()[-1]) - exact)
                for dt in (0.1, 0.05)]
        assert errs[0] / errs[1] == pytest.approx(16.0, abs=2.0)

        names = [name for name, _, _ in cli.list_fixtures()]
        assert len(names) >= 18
        manifests = []
        for tag in ("first", "second"):
            out = tmp_path / tag
            rc = cli.main(["run", *names, "--out", str(out), "--jobs", "1"])
            assert rc == 0
            manifests.append({n: (out / n / "manifest.json").read_bytes()
                              for n in names})
        assert manifests[0] == manifests[1]
