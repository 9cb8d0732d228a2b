"""Equilibrium finding, linearization, eigenvalues, and the cross-model
validation harness (frame projection + channel-wise trace comparison).

Equilibria and linear models are computed on the *closed-loop* augmented SSTI
field (12 plant states + 4 PI integrators): with fixed modulation the
open-loop plant has no isolated operating point, while the closed loop pins
one down. The Newton residual is measured on the per-unit-scaled field
(currents over i_base_ac, voltages over v_base_dc, integrators native), so
`residual_norm` is in pu/s.
"""

from dataclasses import dataclass, field

import numpy as np

from mmcdyn import frames
from mmcdyn.control import CtrlState, controller_modulation
from mmcdyn.sim import (TraceLog, make_ssti_closed_loop, make_aam_closed_loop,
                        flat_start, rk4_step, steady_windows)
from mmcdyn.ssti import SstiState, SstiInputs, STATE_LABELS


class NewtonError(RuntimeError):
    """Equilibrium iteration failed to converge."""


@dataclass
class Equilibrium:
    x_star: SstiState
    u_star: SstiInputs
    ctrl_star: CtrlState
    residual_norm: float      # pu/s, inf-norm of the scaled closed-loop field
    y_star: np.ndarray = None  # augmented 16-vector (SI states + integrators)


@dataclass
class LinearModel:
    a_matrix: np.ndarray
    b_matrix: np.ndarray
    state_labels: list
    input_labels: list
    x0: np.ndarray
    u0: np.ndarray


def state_scales(p):
    """Per-unit scale of each augmented closed-loop state."""
    s = np.ones(16)
    s[0:7] = p.v_base_dc
    s[7:12] = p.i_base_ac
    return s


def scaled_closed_loop(p, refs):
    """Closed-loop field in per-unit coordinates: g(z) = f(S z)/S."""
    rhs = make_ssti_closed_loop(p, refs)
    s = state_scales(p)

    def g(z):
        return rhs(0.0, s * np.asarray(z, dtype=float)) / s

    return g


def _fd_jacobian(g, z0, f0=None, h_factor=1.0):
    z0 = np.asarray(z0, dtype=float)
    n = z0.size
    if f0 is None:
        f0 = g(z0)
    jac = np.empty((f0.size, n))
    for i in range(n):
        h = h_factor * max(1e-6, 1e-6 * abs(z0[i]))
        zp, zm = z0.copy(), z0.copy()
        zp[i] += h
        zm[i] -= h
        jac[:, i] = (g(zp) - g(zm)) / (2.0 * h)
    return jac


def find_equilibrium(p, refs, tol=1e-10, max_iter=40, prime_time=1.0,
                     prime_dt=1e-4, y0=None):
    """Newton solve of the closed-loop SSTI field at fixed references.

    The iteration is primed by a short closed-loop simulation from the flat
    start (deterministic, keeps the solve inside the physical basin); pass an
    augmented 16-vector `y0` (SI) to skip the priming run and start there.
    """
    g = scaled_closed_loop(p, refs)
    s = state_scales(p)

    if y0 is None:
        rhs = make_ssti_closed_loop(p, refs)
        y = flat_start("ssti", p)
        n_prime = int(round(prime_time / prime_dt))
        for k in range(n_prime):
            y = rk4_step(rhs, y, k * prime_dt, prime_dt)
    else:
        y = np.asarray(y0, dtype=float)

    z = y / s
    best = np.inf
    for _ in range(max_iter):
        f0 = g(z)
        res = float(np.max(np.abs(f0)))
        best = min(best, res)
        if res < tol:
            break
        jac = _fd_jacobian(g, z, f0)
        try:
            step = np.linalg.solve(jac, -f0)
        except np.linalg.LinAlgError:
            raise NewtonError("singular Jacobian at residual %.3g pu/s"
                              % res) from None
        z = z + step
    else:
        raise NewtonError("no convergence after %d iterations; best residual "
                          "%.3g pu/s (tol %.3g)" % (max_iter, best, tol))

    y_star = s * z
    x_star = SstiState.from_vector(y_star[:12])
    ctrl_star = CtrlState.from_vector(y_star[12:16])
    i_b = p.i_base_ac
    m_sigma, m_delta, _e = controller_modulation(
        y_star[10:12] / i_b, y_star[7:9] / i_b, refs, y_star[12:16], p)
    u_star = SstiInputs(m_sigma_dqz=m_sigma, m_delta_dqZ=m_delta,
                        v_g_dq=np.array([p.v_base_ac, 0.0]),
                        v_dc=p.v_dc_nominal)
    return Equilibrium(x_star=x_star, u_star=u_star, ctrl_star=ctrl_star,
                       residual_norm=float(np.max(np.abs(g(z)))),
                       y_star=y_star)


def linearize(f, x0, u0=None, state_labels=None, input_labels=None,
              h_factor=1.0):
    """Central finite-difference linearization of f(x[, u]) at (x0, u0).

    Steps are h_factor * max(1e-6, 1e-6*|x_i|) per coordinate. Returns a
    LinearModel with A = df/dx and B = df/du (B empty when u0 is None).
    """
    x0 = np.asarray(x0, dtype=float)
    if u0 is None:
        fx = lambda x: np.asarray(f(x), dtype=float)
        u0_arr = np.zeros(0)
        b = np.zeros((x0.size, 0))
    else:
        u0_arr = np.asarray(u0, dtype=float)
        fx = lambda x: np.asarray(f(x, u0_arr), dtype=float)
        b = _fd_jacobian(lambda u: np.asarray(f(x0, u), dtype=float), u0_arr,
                         h_factor=h_factor)
    a = _fd_jacobian(fx, x0, h_factor=h_factor)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite entries in the linearization")
    n, m = a.shape[0], b.shape[1]
    return LinearModel(
        a_matrix=a, b_matrix=b,
        state_labels=state_labels or ["x%d" % i for i in range(n)],
        input_labels=input_labels or ["u%d" % i for i in range(m)],
        x0=x0, u0=u0_arr)


def closed_loop_linear_model(p, refs, eq):
    """LinearModel of the pu-scaled closed loop at an equilibrium."""
    g = scaled_closed_loop(p, refs)
    labels = STATE_LABELS + ["ctrl_int_id", "ctrl_int_iq",
                             "ctrl_int_isd", "ctrl_int_isq"]
    return linearize(g, eq.y_star / state_scales(p), state_labels=labels)


def eigenvalues(a_matrix):
    """Complex spectrum sorted by real part (descending), then imag part."""
    a = np.asarray(a_matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix, got shape %r"
                         % (a.shape,))
    try:
        vals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("eigenvalue iteration failed (cond estimate "
                           "%.3g): %s" % (np.linalg.cond(a), exc)) from None
    order = np.lexsort((-vals.imag, -vals.real))
    return vals[order]


# ---------------------------------------------------------------------------
# cross-model comparison
# ---------------------------------------------------------------------------

def project_aam_trace(tr, p):
    """Project an AAM trace into the SSTI frames for channel-wise overlay.

    iDelta/vCDelta go to the +w frame, iSigma/vCSigma to the -2w frame; the
    zero-sequence vCDelta-z (phase mean) is kept as the raw waveform so the
    SSTI side can be overlaid via its 3w reconstruction.
    """
    needed = ["i_delta_a", "i_sigma_a", "v_c_sigma_a", "v_c_delta_a"]
    for name in needed:
        if name not in tr.channels:
            raise KeyError("missing AAM channel %r" % name)
    t = tr.t
    w = p.omega

    def stack(prefix):
        return np.vstack([tr.channels[prefix + ph] for ph in "abc"])

    channels, units, bases = {}, {}, {}

    def add(name, values, unit, base):
        channels[name] = values
        units[name] = unit
        bases[name] = base

    i_b, v_bdc = p.i_base_ac, p.v_base_dc
    idqz = frames.to_dqz(stack("i_delta_"), 1, w * t)
    add("i_delta_d", idqz[0], "A", i_b)
    add("i_delta_q", idqz[1], "A", i_b)
    vd = stack("v_c_delta_")
    vddqz = frames.to_dqz(vd, 1, w * t)
    add("v_c_delta_d", vddqz[0], "V", v_bdc)
    add("v_c_delta_q", vddqz[1], "V", v_bdc)
    add("v_c_delta_z", np.mean(vd, axis=0), "V", v_bdc)
    vsdqz = frames.to_dqz(stack("v_c_sigma_"), -2, -2.0 * w * t)
    isdqz = frames.to_dqz(stack("i_sigma_"), -2, -2.0 * w * t)
    for j, ax in enumerate("dqz"):
        add("v_c_sigma_" + ax, vsdqz[j], "V", v_bdc)
        add("i_sigma_" + ax, isdqz[j], "A", i_b)
    for name in ("m_delta_d", "m_delta_q", "m_sigma_d", "m_sigma_q",
                 "p_ac", "q_ac", "p_ref", "q_ref"):
        if name in tr.channels:
            add(name, tr.channels[name], tr.units[name], tr.bases[name])
    meta = dict(tr.meta)
    meta["model"] = "aam-projected"
    return TraceLog(t=t, channels=channels, units=units, bases=bases,
                    meta=meta)


@dataclass
class CompareReport:
    """Per-channel error metrics between two traces (all in pu)."""

    rows: list                # dicts: channel, rms, max_abs, ss_bias
    meta: dict = field(default_factory=dict)

    def row(self, channel):
        for r in self.rows:
            if r["channel"] == channel:
                return r
        raise KeyError(channel)

    def to_csv_text(self):
        lines = ["channel,rms_pu,max_abs_pu,ss_bias_pu"]
        for r in self.rows:
            lines.append("%s,%.6e,%.6e,%.6e"
                         % (r["channel"], r["rms"], r["max_abs"],
                            r["ss_bias"]))
        return "\n".join(lines) + "\n"

    def summary_text(self):
        lines = ["%-16s %12s %12s %12s" % ("channel", "rms[pu]",
                                           "max[pu]", "ss_bias[pu]")]
        for r in self.rows:
            lines.append("%-16s %12.3e %12.3e %12.3e"
                         % (r["channel"], r["rms"], r["max_abs"],
                            r["ss_bias"]))
        return "\n".join(lines) + "\n"


def _common_base(a, b):
    """Align two uniform traces whose steps are integer multiples."""
    ratio = b.dt / a.dt
    if abs(ratio - round(ratio)) / max(ratio, 1.0) < 1e-9 and ratio >= 1:
        step_a, step_b = int(round(ratio)), 1
    else:
        ratio = a.dt / b.dt
        if abs(ratio - round(ratio)) / max(ratio, 1.0) > 1e-9:
            raise ValueError("incompatible time bases: dt %g vs %g"
                             % (a.dt, b.dt))
        step_a, step_b = 1, int(round(ratio))
    n = min((a.t.size - 1) // step_a, (b.t.size - 1) // step_b)
    idx_a = np.arange(n + 1) * step_a
    idx_b = np.arange(n + 1) * step_b
    if not np.allclose(a.t[idx_a], b.t[idx_b], atol=1e-12):
        raise ValueError("incompatible time bases (origin mismatch)")
    return idx_a, idx_b


def compare_traces(a, b, channels, ss_windows=None, exclude=None):
    """Channel-wise error report between traces a and b (per-unit metrics).

    rms/max_abs are over the full run minus `exclude` windows; ss_bias is the
    largest per-window mean difference over `ss_windows`.
    """
    idx_a, idx_b = _common_base(a, b)
    t = a.t[idx_a]
    keep = np.ones(t.size, dtype=bool)
    for t0, t1 in (exclude or []):
        keep &= ~((t >= t0) & (t <= t1))
    if not np.any(keep):
        raise ValueError("exclusion windows cover the whole trace "
                         "(%.4g s); nothing left to compare" % t[-1])
    rows = []
    for name in channels:
        if name not in a.channels or name not in b.channels:
            raise KeyError("channel %r missing from one of the traces" % name)
        da = a.in_pu(name)[idx_a]
        db = b.in_pu(name)[idx_b]
        diff = da - db
        rms = float(np.sqrt(np.mean(diff[keep] ** 2)))
        max_abs = float(np.max(np.abs(diff[keep])))
        ss_bias = 0.0
        for t0, t1 in (ss_windows or []):
            mask = (t >= t0 - 1e-12) & (t <= t1 + 1e-12)
            if np.any(mask):
                ss_bias = max(ss_bias, abs(float(np.mean(diff[mask]))))
        rows.append({"channel": name, "rms": rms, "max_abs": max_abs,
                     "ss_bias": ss_bias})
    return CompareReport(rows=rows, meta={"n_samples": int(t.size)})


# acceptance bounds for the reference scenario (per-unit)
RMS_BOUNDS = {"i_delta_d": 1e-3, "i_delta_q": 1e-3,
              "v_c_delta_d": 2e-3, "v_c_delta_q": 2e-3,
              "v_c_sigma_d": 5e-3, "v_c_sigma_q": 5e-3, "v_c_sigma_z": 5e-3,
              "i_sigma_z": 1e-3}
BIAS_BOUNDS = {"i_sigma_d": 1e-3, "i_sigma_q": 1e-3}
VCDZ_RMS_BOUND = 2e-3
TRANSIENT_EXCLUDE = 0.025  # s after start and after each reference step


def transient_windows(sc, width=TRANSIENT_EXCLUDE):
    """Exclusion windows after the run start and after each event."""
    starts = [0.0] + [t for t, _f, _v in sc.events]
    return [(t0, t0 + width) for t0 in starts]


def check_bounds(report):
    """Bound violations (list of strings) for a cross-model CompareReport."""
    violations = []
    for name, bound in RMS_BOUNDS.items():
        value = report.row(name)["rms"]
        if value >= bound:
            violations.append("%s rms %.3e >= %.1e pu" % (name, value, bound))
    for name, bound in BIAS_BOUNDS.items():
        value = report.row(name)["ss_bias"]
        if value >= bound:
            violations.append("%s ss_bias %.3e >= %.1e pu"
                              % (name, value, bound))
    value = report.row("v_c_delta_z")["rms"]
    if value >= VCDZ_RMS_BOUND:
        violations.append("v_c_delta_z rms %.3e >= %.1e pu"
                          % (value, VCDZ_RMS_BOUND))
    return violations


def evaluate_comparison(aam_trace, ssti_trace, sc, p):
    """Run the full cross-model acceptance comparison.

    `aam_trace` may be raw (abc channels) or already projected. Returns
    (report, violations); empty violations means every bound holds.
    """
    if "i_delta_a" in aam_trace.channels:
        proj = project_aam_trace(aam_trace, p)
    else:
        proj = aam_trace
    windows = steady_windows(sc)
    excl = transient_windows(sc)
    all_channels = (list(RMS_BOUNDS) + list(BIAS_BOUNDS) + ["v_c_delta_z"])
    report = compare_traces(proj, ssti_trace, all_channels,
                            ss_windows=windows, exclude=excl)
    violations = check_bounds(report)
    report.meta["violations"] = violations
    return report, violations


def prepare_warm_start(p, refs, settle_time=0.4, dt_aam=1e-5):
    """Warm-start states for both models at the given operating point.

    The SSTI start is the Newton equilibrium itself. The AAM start projects
    that equilibrium to the stationary frame at t = 0 and then runs a settle
    prefix (discarded) so the harmonic ripple the dqz equilibrium cannot
    represent is established.
    """
    eq = find_equilibrium(p, refs)
    y_ssti = eq.y_star.copy()
    x = eq.y_star
    i_delta = frames.to_abc(np.array([x[10], x[11], 0.0]), 1, 0.0)
    i_sigma = frames.to_abc(x[7:10], -2, 0.0)
    v_sigma = frames.to_abc(x[4:7], -2, 0.0)
    # the zero-sequence column feeds the instantaneous vCDelta-z, which at
    # t = 0 is its 3w-frame cosine component
    v_delta = frames.to_abc(np.array([x[0], x[1], x[2]]), 1, 0.0)
    y_aam = np.concatenate([i_delta, i_sigma, v_sigma, v_delta, x[12:16]])
    if settle_time > 0:
        rhs = make_aam_closed_loop(p, refs)
        n = int(round(settle_time / dt_aam))
        # start the prefix so that it ends on the fundamental-period grid:
        # integrate from t = -settle to 0 to keep phase continuity at t = 0
        t0 = -n * dt_aam
        y = y_aam
        for k in range(n):
            y = rk4_step(rhs, y, t0 + k * dt_aam, dt_aam)
        y_aam = y
    return y_aam, y_ssti, eq
