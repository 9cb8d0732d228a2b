"""End-to-end acceptance criteria for the dual-model toolkit.

Each test prints a single PASS line with its headline numbers so a full run
doubles as an acceptance report.
"""

import numpy as np

from mmcdyn import analysis, frames, sim
from mmcdyn.analysis import (scaled_closed_loop, state_scales)
from mmcdyn.control import Refs
from mmcdyn.sim import rk4_step, steady_windows

OPERATING_POINTS = [(1.0, 0.0), (1.0, -0.1), (0.5, -0.1)]


def test_acceptance_1_reference_scenario_power_tracking(headline, sc):
    """Both models track the scripted P/Q references in every steady window
    to better than 1e-3 pu, and the paired runs finish well under budget."""
    worst = 0.0
    for tr in (headline["aam"], headline["ssti"]):
        p_pu = tr.in_pu("p_ac")
        q_pu = tr.in_pu("q_ac")
        for t0, t1 in steady_windows(sc):
            mask = tr.window_mask(t0, t1)
            p_err = abs(float(np.mean(p_pu[mask] - tr.channels["p_ref"][mask])))
            q_err = abs(float(np.mean(q_pu[mask] - tr.channels["q_ref"][mask])))
            worst = max(worst, p_err, q_err)
            assert p_err < 1e-3, (tr.meta["model"], t0, "P")
            assert q_err < 1e-3, (tr.meta["model"], t0, "Q")
    runtime = headline["runtime_aam"] + headline["runtime_ssti"]
    assert runtime < 30.0
    print("\nACCEPTANCE 1 PASS: worst steady P/Q bias %.2e pu, "
          "runtime %.1f s < 30 s" % (worst, runtime))


def test_acceptance_2_cross_model_agreement(headline):
    """Projected AAM vs SSTI: rms error bounds on every shared channel and
    steady-state bias bounds on iSigma dq, over the full reference run."""
    report = headline["report"]
    assert headline["violations"] == []
    for name, bound in analysis.RMS_BOUNDS.items():
        assert report.row(name)["rms"] < bound, name
    for name, bound in analysis.BIAS_BOUNDS.items():
        assert report.row(name)["ss_bias"] < bound, name
    worst = max(report.row(n)["rms"] / b
                for n, b in analysis.RMS_BOUNDS.items())
    print("\nACCEPTANCE 2 PASS: all cross-model bounds hold "
          "(worst rms at %.0f%% of its bound)" % (100.0 * worst))


def test_acceptance_3_zero_sequence_reconstruction(headline):
    """The 3w reconstruction of vCDelta-z matches the stationary-frame phase
    mean to 2e-3 pu rms outside the post-step transients."""
    rms = headline["report"].row("v_c_delta_z")["rms"]
    assert rms < analysis.VCDZ_RMS_BOUND
    print("\nACCEPTANCE 3 PASS: vCDelta-z reconstruction rms %.2e pu "
          "< %.0e pu" % (rms, analysis.VCDZ_RMS_BOUND))


def test_acceptance_4_ssti_states_are_time_invariant(p, eq_at):
    """At fixed references the SSTI trajectory is genuinely static: the
    scaled field stays below 1e-6 pu/s and the 3w-frame pair is constant."""
    worst = 0.0
    for p_ref, q_ref in OPERATING_POINTS:
        eq = eq_at(p_ref, q_ref)
        refs = Refs(p_ref, q_ref)
        rhs = sim.make_ssti_closed_loop(p, refs)
        g = scaled_closed_loop(p, refs)
        scales = state_scales(p)
        y = eq.y_star.copy()
        dt = 5e-5
        z0_pair = (y[2], y[3])
        for k in range(2000):
            y = rk4_step(rhs, y, k * dt, dt)
            if k % 50 == 0:
                worst = max(worst, float(np.max(np.abs(g(y / scales)))))
        worst = max(worst, float(np.max(np.abs(g(y / scales)))))
        assert worst < 1e-6, (p_ref, q_ref)
        assert abs(y[2] - z0_pair[0]) / p.v_base_dc < 1e-7
        assert abs(y[3] - z0_pair[1]) / p.v_base_dc < 1e-7
    print("\nACCEPTANCE 4 PASS: max |dx/dt| %.2e pu/s < 1e-6 across %d "
          "operating points" % (worst, len(OPERATING_POINTS)))


def test_acceptance_5_equilibria_and_stability(p, eq_at):
    """Newton equilibria at three operating points: tight residuals, matching
    long-run limits, strictly stable spectra and decaying perturbations."""
    worst_res = 0.0
    for p_ref, q_ref in OPERATING_POINTS:
        eq = eq_at(p_ref, q_ref)
        worst_res = max(worst_res, eq.residual_norm)
        assert eq.residual_norm < 1e-10, (p_ref, q_ref)
        lm = analysis.closed_loop_linear_model(p, Refs(p_ref, q_ref), eq)
        vals = analysis.eigenvalues(lm.a_matrix)
        assert np.all(vals.real < 0.0), (p_ref, q_ref)

    # long flat-start run lands on the Newton point
    eq = eq_at(1.0, 0.0)
    refs = Refs(1.0, 0.0)
    rhs = sim.make_ssti_closed_loop(p, refs)
    scales = state_scales(p)
    y = sim.flat_start("ssti", p)
    dt = 1e-4
    for k in range(25000):  # 2.5 s
        y = rk4_step(rhs, y, k * dt, dt)
    land = float(np.max(np.abs((y - eq.y_star) / scales)))
    assert land < 1e-6

    # a 1e-4 pu perturbation decays
    rng = np.random.default_rng(11)
    v = rng.standard_normal(16)
    v /= np.linalg.norm(v)
    y = eq.y_star + 1e-4 * scales * v
    dev0 = float(np.linalg.norm((y - eq.y_star) / scales))
    for k in range(4000):  # 0.4 s
        y = rk4_step(rhs, y, k * dt, dt)
    dev = float(np.linalg.norm((y - eq.y_star) / scales))
    assert dev < 0.1 * dev0
    print("\nACCEPTANCE 5 PASS: residuals <= %.1e pu/s, long-run gap "
          "%.1e pu, perturbation decayed %.0fx" % (worst_res, land,
                                                   dev0 / max(dev, 1e-300)))


def test_acceptance_6_transform_identities(p, rng):
    """Park round trips, the frame-coupling identity and the involutory 3w
    map hold to tight numerical tolerance."""
    shift = np.array([0.0, -2 * np.pi / 3, 2 * np.pi / 3])
    w = p.omega
    for _ in range(200):
        theta = rng.uniform(-20, 20)
        for k in (1, -2):
            x = rng.standard_normal(3)
            back = frames.to_abc(frames.to_dqz(x, k, theta), k, theta)
            assert np.max(np.abs(back - x)) < 1e-13
    for _ in range(50):
        t = rng.uniform(0, 0.1)
        ang = w * t + shift
        dpinv = np.column_stack([-w * np.sin(ang), w * np.cos(ang),
                                 np.zeros(3)])
        lhs = frames.park_matrix(1, w * t) @ dpinv
        assert np.max(np.abs(lhs - frames.coupling_matrix("w", w))) < 1e-9
        ang = 2 * w * t - shift
        dpinv = np.column_stack([-2 * w * np.sin(ang), 2 * w * np.cos(ang),
                                 np.zeros(3)])
        lhs = frames.park_matrix(-2, -2 * w * t) @ dpinv
        assert np.max(np.abs(lhs - frames.coupling_matrix("2w", w))) < 1e-9
    for theta in rng.uniform(-30, 30, size=1000):
        m = frames.t3w(theta)
        assert np.max(np.abs(m @ m - np.eye(2))) < 1e-12
    print("\nACCEPTANCE 6 PASS: round trips < 1e-13, coupling identity "
          "< 1e-9, t3w involutory < 1e-12")


def test_acceptance_7_rk4_order(p):
    """Step-halving on the stiff AAM closed loop shows the classical
    fourth-order error ratio (16, accepted band [12, 20])."""
    refs = Refs(1.0, 0.0)
    rhs = sim.make_aam_closed_loop(p, refs)
    scales = np.concatenate([np.full(6, p.i_base_ac),
                             np.full(6, p.v_base_dc), np.ones(4)])

    def integrate(dt, t_end=0.02):
        y = sim.flat_start("aam", p)
        n = int(round(t_end / dt))
        for k in range(n):
            y = rk4_step(rhs, y, k * dt, dt)
        return y

    y1 = integrate(2e-4)
    y2 = integrate(1e-4)
    y3 = integrate(5e-5)
    ratio = (np.linalg.norm((y1 - y2) / scales)
             / np.linalg.norm((y2 - y3) / scales))
    assert 12.0 <= ratio <= 20.0
    print("\nACCEPTANCE 7 PASS: step-halving error ratio %.2f in [12, 20]"
          % ratio)


def test_acceptance_8_aam_ripple_is_small(headline, sc):
    """Steady-window peak-to-peak ripple of the projected AAM channels stays
    below 2% (denominator floored at 1 pu for near-zero channels)."""
    proj = headline["proj"]
    channels = ["i_delta_d", "i_delta_q", "i_sigma_d", "i_sigma_q",
                "i_sigma_z", "v_c_sigma_d", "v_c_sigma_q", "v_c_sigma_z",
                "v_c_delta_d", "v_c_delta_q"]
    worst = 0.0
    for t0, t1 in steady_windows(sc):
        mask = proj.window_mask(t0, t1)
        for name in channels:
            seg = proj.in_pu(name)[mask]
            denom = max(abs(float(np.mean(seg))), 1.0)
            ripple = (float(np.max(seg)) - float(np.min(seg))) / denom
            worst = max(worst, ripple)
            assert ripple < 0.02, (name, t0)
    print("\nACCEPTANCE 8 PASS: worst steady-window ripple %.2f%% < 2%%"
          % (100.0 * worst))
