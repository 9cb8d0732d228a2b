"""Fixed-step closed-loop simulation of either model under a scripted
reference scenario, producing comparable trace logs.

The PI integrators are appended to the plant state and the whole closed loop
is integrated as one smooth ODE with classical RK4 (the controller is
evaluated at every integration stage). Augmented state layouts:

* aam:  [i_delta_abc(3), i_sigma_abc(3), v_c_sigma_abc(3), v_c_delta_abc(3),
         pi_integrators(4)]                                    -> 16 entries
* ssti: [the 12 SSTI states, pi_integrators(4)]                -> 16 entries

Scenario files are flat key-value text::

    duration = 0.3
    dt       = 5e-5          # optional; per-model default otherwise
    p_ref    = 1.0
    q_ref    = 0.0
    event    = 0.05 q_ref -0.1
    event    = 0.15 p_ref 0.5
"""

import math
from dataclasses import dataclass, field

import numpy as np

from mmcdyn import frames
from mmcdyn.control import Refs, power_to_current_refs
from mmcdyn.ssti import ssti_rhs, reconstruct_vcdz

DT_DEFAULT = {"aam": 1e-5, "ssti": 5e-5}

_SQ32 = math.sqrt(3.0) / 2.0


class BlowupError(RuntimeError):
    """Trajectory produced a non-finite state."""


class ScenarioError(ValueError):
    """Invalid scenario definition."""


@dataclass
class Scenario:
    """Reference schedule: duration, optional dt, initial refs, step events."""

    duration: float
    initial_refs: tuple                  # (p_ref, q_ref)
    events: list = field(default_factory=list)  # [(t, field, value), ...]
    dt: float = None

    def validate(self):
        if not (self.duration > 0):
            raise ScenarioError("duration must be positive")
        if self.dt is not None and not (0 < self.dt < self.duration):
            raise ScenarioError("need 0 < dt < duration")
        last = 0.0
        for t_ev, name, _value in self.events:
            if name not in ("p_ref", "q_ref"):
                raise ScenarioError("unknown event field %r" % (name,))
            if not (0.0 <= t_ev <= self.duration):
                raise ScenarioError("event time %g outside [0, duration]"
                                    % t_ev)
            if t_ev < last:
                raise ScenarioError("events must be time-sorted")
            last = t_ev
        return self


def load_scenario(path):
    """Parse a scenario file."""
    raw = {"event": []}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ScenarioError("%s:%d: expected 'key = value'"
                                    % (path, lineno))
            key, value = (part.strip() for part in text.split("=", 1))
            if key == "event":
                parts = value.split()
                if len(parts) != 3:
                    raise ScenarioError("%s:%d: event needs 'time field value'"
                                        % (path, lineno))
                raw["event"].append((float(parts[0]), parts[1],
                                     float(parts[2])))
            else:
                raw[key] = value
    try:
        sc = Scenario(duration=float(raw["duration"]),
                      initial_refs=(float(raw.get("p_ref", 0.0)),
                                    float(raw.get("q_ref", 0.0))),
                      events=raw["event"],
                      dt=float(raw["dt"]) if "dt" in raw else None)
    except KeyError as exc:
        raise ScenarioError("missing scenario key %s" % exc) from None
    return sc.validate()


def steady_windows(sc, fraction=0.3):
    """Last-`fraction` windows of each inter-event segment, as (t0, t1)."""
    bounds = [0.0] + [t for t, _f, _v in sc.events] + [sc.duration]
    out = []
    for left, right in zip(bounds[:-1], bounds[1:]):
        if right > left:
            out.append((right - fraction * (right - left), right))
    return out


@dataclass
class TraceLog:
    """Uniformly sampled named channels over a common time vector."""

    t: np.ndarray
    channels: dict            # name -> np.ndarray
    units: dict               # name -> unit string ("A", "V", "W", "-", ...)
    bases: dict               # name -> SI value of 1 pu (1.0 if unitless)
    meta: dict = field(default_factory=dict)

    @property
    def dt(self):
        return float(self.t[1] - self.t[0])

    def window_mask(self, t0, t1):
        return (self.t >= t0 - 1e-12) & (self.t <= t1 + 1e-12)

    def in_pu(self, name):
        return self.channels[name] / self.bases.get(name, 1.0)


def rk4_step(f, x, t, dt):
    """One classical 4th-order Runge-Kutta step of dx/dt = f(t, x).

    Raises BlowupError on a non-finite result; intermediate overflow is
    silenced since the final isfinite check is authoritative.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = f(t, x)
        k2 = f(t + 0.5 * dt, x + (0.5 * dt) * k1)
        k3 = f(t + 0.5 * dt, x + (0.5 * dt) * k2)
        k4 = f(t + dt, x + dt * k3)
        x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_next)):
        raise BlowupError("non-finite state at t = %.6g s" % (t + dt))
    return x_next


# ---------------------------------------------------------------------------
# closed-loop vector fields
# ---------------------------------------------------------------------------

def _ctrl_constants(p):
    return dict(
        i_b=p.i_base_ac, v_bac=p.v_base_ac, vdc=p.v_dc_nominal,
        x_eq=p.omega * p.l_eq_ac / p.z_base_ac,
        x_2arm=2.0 * p.omega * p.l_arm / p.z_base_ac,
        kp_d=p.kp_delta, tau_d=p.tau_i_delta,
        kp_s=p.kp_sigma, tau_s=p.tau_i_sigma)


def make_ssti_closed_loop(p, refs):
    """Augmented 16-state field f(t, y) for the SSTI model under `refs`."""
    c = _ctrl_constants(p)
    i_ref = power_to_current_refs(refs.p_ref, refs.q_ref, (1.0, 0.0))
    ird, irq = float(i_ref[0]), float(i_ref[1])
    isr_d, isr_q = refs.i_sigma_dq_ref
    i_b, v_bac, vdc = c["i_b"], c["v_bac"], c["vdc"]
    x_eq, x_2arm = c["x_eq"], c["x_2arm"]
    kp_d, tau_d, kp_s, tau_s = c["kp_d"], c["tau_d"], c["kp_s"], c["tau_s"]
    scale = 2.0 * v_bac / vdc

    def rhs(t, y):
        isd_pu, isq_pu = y[7] / i_b, y[8] / i_b
        idd_pu, idq_pu = y[10] / i_b, y[11] / i_b
        e_d, e_q = ird - idd_pu, irq - idq_pu
        vmd_d = 1.0 + x_eq * idq_pu + kp_d * (e_d + y[12] / tau_d)
        vmd_q = -x_eq * idd_pu + kp_d * (e_q + y[13] / tau_d)
        e_sd, e_sq = isr_d - isd_pu, isr_q - isq_pu
        vms_d = -kp_s * (e_sd + y[14] / tau_s) - x_2arm * isq_pu
        vms_q = -kp_s * (e_sq + y[15] / tau_s) + x_2arm * isd_pu
        dx = ssti_rhs(y, scale * vms_d, scale * vms_q, 1.0,
                      -scale * vmd_d, -scale * vmd_q, 0.0, 0.0,
                      v_bac, 0.0, vdc, p)
        out = np.empty(16)
        out[:12] = dx
        out[12], out[13], out[14], out[15] = e_d, e_q, e_sd, e_sq
        return out

    return rhs


def _phase_trig(w, t):
    """cos/sin of the +w phase angles and of the -2w frame angles at time t."""
    c1, s1 = math.cos(w * t), math.sin(w * t)
    c2, s2 = c1 * c1 - s1 * s1, 2.0 * s1 * c1
    cw = np.array([c1, -0.5 * c1 + _SQ32 * s1, -0.5 * c1 - _SQ32 * s1])
    sw = np.array([s1, -0.5 * s1 - _SQ32 * c1, -0.5 * s1 + _SQ32 * c1])
    c2w = np.array([c2, -0.5 * c2 - _SQ32 * s2, -0.5 * c2 + _SQ32 * s2])
    s2w = np.array([s2, -0.5 * s2 + _SQ32 * c2, -0.5 * s2 - _SQ32 * c2])
    return cw, sw, c2w, s2w


def make_aam_closed_loop(p, refs):
    """Augmented 16-state field f(t, y) for the arm-averaged model."""
    c = _ctrl_constants(p)
    i_ref = power_to_current_refs(refs.p_ref, refs.q_ref, (1.0, 0.0))
    ird, irq = float(i_ref[0]), float(i_ref[1])
    isr_d, isr_q = refs.i_sigma_dq_ref
    i_b, v_bac, vdc = c["i_b"], c["v_bac"], c["vdc"]
    x_eq, x_2arm = c["x_eq"], c["x_2arm"]
    kp_d, tau_d, kp_s, tau_s = c["kp_d"], c["tau_d"], c["kp_s"], c["tau_s"]
    scale = 2.0 * v_bac / vdc
    w = p.omega
    r_eq, l_eq = p.r_eq_ac, p.l_eq_ac
    r_arm, l_arm, two_c = p.r_arm, p.l_arm, 2.0 * p.c_arm

    def rhs(t, y):
        cw, sw, c2w, s2w = _phase_trig(w, t)
        i_d = y[0:3]
        i_s = y[3:6]
        v_s = y[6:9]
        v_d = y[9:12]
        # measurements (pu)
        idd_pu = (2.0 / 3.0) * (cw @ i_d) / i_b
        idq_pu = (2.0 / 3.0) * (sw @ i_d) / i_b
        isd_pu = (2.0 / 3.0) * (c2w @ i_s) / i_b
        isq_pu = (2.0 / 3.0) * (s2w @ i_s) / i_b
        # control law (identical to the SSTI loop)
        e_d, e_q = ird - idd_pu, irq - idq_pu
        vmd_d = 1.0 + x_eq * idq_pu + kp_d * (e_d + y[12] / tau_d)
        vmd_q = -x_eq * idd_pu + kp_d * (e_q + y[13] / tau_d)
        e_sd, e_sq = isr_d - isd_pu, isr_q - isq_pu
        vms_d = -kp_s * (e_sd + y[14] / tau_s) - x_2arm * isq_pu
        vms_q = -kp_s * (e_sq + y[15] / tau_s) + x_2arm * isd_pu
        mdd, mdq = -scale * vmd_d, -scale * vmd_q
        msd, msq = scale * vms_d, scale * vms_q
        # rotate modulation back to abc (m_sigma_z = 1, m_delta_z = 0)
        m_s = msd * c2w + msq * s2w + 1.0
        m_d = mdd * cw + mdq * sw
        v_g = v_bac * cw
        # plant
        vm_delta = -(m_d * v_s + m_s * v_d) * 0.5
        vm_sigma = (m_s * v_s + m_d * v_d) * 0.5
        drive = vm_delta - v_g
        drive = drive - (drive[0] + drive[1] + drive[2]) / 3.0
        out = np.empty(16)
        out[0:3] = (drive - r_eq * i_d) / l_eq
        out[3:6] = (vdc * 0.5 - vm_sigma - r_arm * i_s) / l_arm
        out[6:9] = (m_d * i_d * 0.5 + m_s * i_s) / two_c
        out[9:12] = (m_s * i_d * 0.5 + m_d * i_s) / two_c
        out[12], out[13], out[14], out[15] = e_d, e_q, e_sd, e_sq
        return out

    return rhs


def make_closed_loop(model, p, refs):
    if model == "aam":
        return make_aam_closed_loop(p, refs)
    if model == "ssti":
        return make_ssti_closed_loop(p, refs)
    raise ValueError("unknown model %r (expected 'aam' or 'ssti')" % (model,))


def flat_start(model, p):
    """Augmented initial state: currents zero, vCSigma = vdc, vCDelta = 0."""
    y = np.zeros(16)
    if model == "aam":
        y[6:9] = p.v_dc_nominal
    elif model == "ssti":
        y[6] = p.v_dc_nominal
    else:
        raise ValueError("unknown model %r" % (model,))
    return y


# ---------------------------------------------------------------------------
# scenario runner
# ---------------------------------------------------------------------------

def _ref_arrays(sc, t):
    """Piecewise-constant reference channels sampled on t."""
    p_ref = np.full(t.shape, sc.initial_refs[0])
    q_ref = np.full(t.shape, sc.initial_refs[1])
    for t_ev, name, value in sc.events:
        mask = t >= t_ev - 1e-12
        (p_ref if name == "p_ref" else q_ref)[mask] = value
    return p_ref, q_ref


def _control_channels(p, t, idd_pu, idq_pu, isd_pu, isq_pu, g, p_ref, q_ref):
    """Vectorized re-evaluation of the control law along a trajectory."""
    x_eq = p.omega * p.l_eq_ac / p.z_base_ac
    x_2arm = 2.0 * p.omega * p.l_arm / p.z_base_ac
    ird = p_ref  # vg = (1, 0) pu
    irq = -q_ref
    vmd_d = 1.0 + x_eq * idq_pu + p.kp_delta * (ird - idd_pu
                                                + g[:, 0] / p.tau_i_delta)
    vmd_q = -x_eq * idd_pu + p.kp_delta * (irq - idq_pu
                                           + g[:, 1] / p.tau_i_delta)
    vms_d = -p.kp_sigma * (-isd_pu + g[:, 2] / p.tau_i_sigma) - x_2arm * isq_pu
    vms_q = -p.kp_sigma * (-isq_pu + g[:, 3] / p.tau_i_sigma) + x_2arm * isd_pu
    scale = 2.0 * p.v_base_ac / p.v_dc_nominal
    return (-scale * vmd_d, -scale * vmd_q, scale * vms_d, scale * vms_q)


def _index_violations(p, t, msd, msq, mdd, mdq):
    """Times where any per-arm insertion index leaves [0, 1]."""
    w = p.omega
    m_s = frames.to_abc(np.vstack([msd, msq, np.ones_like(msd)]), -2,
                        -2.0 * w * t)
    m_d = frames.to_abc(np.vstack([mdd, mdq, np.zeros_like(mdd)]), 1, w * t)
    m_u = (m_s + m_d) / 2.0
    m_l = (m_s - m_d) / 2.0
    bad = np.any((m_u < 0.0) | (m_u > 1.0) | (m_l < 0.0) | (m_l > 1.0),
                 axis=0)
    return t[bad]


def run_scenario(model, sc, p, dt=None, warm_start=None):
    """Closed-loop run of `model` in {aam, ssti} under scenario `sc`.

    Returns a TraceLog with state, modulation, reference and power channels.
    Insertion-index range violations are logged in meta (never clipped).
    """
    sc.validate()
    if dt is None:
        dt = sc.dt if sc.dt is not None else DT_DEFAULT[model]
    if sc.duration <= dt:
        raise ScenarioError("duration (%g s) must exceed dt (%g s)"
                            % (sc.duration, dt))
    n = int(round(sc.duration / dt))
    # event times snapped to the step grid
    ev_steps = []
    for t_ev, name, value in sc.events:
        ev_steps.append((int(round(t_ev / dt)), name, value))

    y = flat_start(model, p) if warm_start is None \
        else np.asarray(warm_start, dtype=float).copy()
    big = np.empty((n + 1, 16))
    big[0] = y
    p_now, q_now = sc.initial_refs
    k = 0
    boundaries = ev_steps + [(n, None, None)]
    for k_end, name, value in boundaries:
        if k_end > k:
            rhs = make_closed_loop(model, p, Refs(p_now, q_now))
            while k < k_end:
                y = rk4_step(rhs, y, k * dt, dt)
                k += 1
                big[k] = y
        if name == "p_ref":
            p_now = value
        elif name == "q_ref":
            q_now = value

    t = np.arange(n + 1) * dt
    p_ref, q_ref = _ref_arrays(sc, t)
    g = big[:, 12:16]

    channels, units, bases = {}, {}, {}

    def add(name, values, unit, base):
        channels[name] = values
        units[name] = unit
        bases[name] = base

    i_b, v_bdc, s_b = p.i_base_ac, p.v_base_dc, p.s_base
    if model == "aam":
        names = (["i_delta_" + ph for ph in "abc"]
                 + ["i_sigma_" + ph for ph in "abc"]
                 + ["v_c_sigma_" + ph for ph in "abc"]
                 + ["v_c_delta_" + ph for ph in "abc"])
        for j, name in enumerate(names):
            unit = "A" if name.startswith("i_") else "V"
            add(name, big[:, j].copy(), unit, i_b if unit == "A" else v_bdc)
        idqz = frames.to_dqz(big[:, 0:3].T, 1, p.omega * t)
        isdqz = frames.to_dqz(big[:, 3:6].T, -2, -2.0 * p.omega * t)
        idd_pu, idq_pu = idqz[0] / i_b, idqz[1] / i_b
        isd_pu, isq_pu = isdqz[0] / i_b, isdqz[1] / i_b
    else:
        from mmcdyn.ssti import STATE_LABELS
        for j, name in enumerate(STATE_LABELS):
            unit = "A" if name.startswith("i_") else "V"
            add(name, big[:, j].copy(), unit, i_b if unit == "A" else v_bdc)
        add("v_c_delta_z",
            reconstruct_vcdz((big[:, 2], big[:, 3]), 3.0 * p.omega * t),
            "V", v_bdc)
        idd_pu, idq_pu = big[:, 10] / i_b, big[:, 11] / i_b
        isd_pu, isq_pu = big[:, 7] / i_b, big[:, 8] / i_b

    for j, name in enumerate(["ctrl_int_id", "ctrl_int_iq",
                              "ctrl_int_isd", "ctrl_int_isq"]):
        add(name, g[:, j].copy(), "pu*s", 1.0)

    mdd, mdq, msd, msq = _control_channels(p, t, idd_pu, idq_pu,
                                           isd_pu, isq_pu, g, p_ref, q_ref)
    add("m_delta_d", mdd, "-", 1.0)
    add("m_delta_q", mdq, "-", 1.0)
    add("m_sigma_d", msd, "-", 1.0)
    add("m_sigma_q", msq, "-", 1.0)

    # delivered ac power: vg is the ideal 1 pu d-axis source
    add("p_ac", 1.5 * p.v_base_ac * (idd_pu * i_b), "W", s_b)
    add("q_ac", 1.5 * p.v_base_ac * (-idq_pu * i_b), "W", s_b)
    add("p_ref", p_ref, "pu", 1.0)
    add("q_ref", q_ref, "pu", 1.0)

    viol = _index_violations(p, t, msd, msq, mdd, mdq)
    meta = {"model": model, "dt": dt, "duration": sc.duration,
            "events": list(sc.events),
            "index_violation": bool(viol.size),
            "index_violation_times": viol[:10].tolist()}
    return TraceLog(t=t, channels=channels, units=units, bases=bases,
                    meta=meta)
