"""Shared controller: SRRF grid-current vector control plus the circulating
current suppression controller (CCSC) in the -2w frame, and modulation-index
synthesis for both plant models.

All control arithmetic is per-unit (amplitude-invariant bases from MmcParams):
currents in i_base_ac, ac voltages in v_base_ac. The PI law is
kp*(e + integral(e)/tau) with voltage feed-forward and inductive decoupling:

    vmDelta_d* = vgd + x_eq*iq + kpD*(ed + Ied/tauD)
    vmDelta_q* = vgq - x_eq*id + kpD*(eq + Ieq/tauD)
    vmSigma_d* = -kpS*(esd + Isd/tauS) - x_2arm*isq
    vmSigma_q* = -kpS*(esq + Isq/tauS) + x_2arm*isd

with x_eq = w*l_eq_ac/z_base and x_2arm = 2*w*l_arm/z_base. The discrete
operations advance the integrators by explicit Euler; the pure laws
(grid_current_law / ccsc_law) are also exposed so the simulator can embed the
controller in one smooth closed-loop ODE.
"""

from dataclasses import dataclass, field

import numpy as np

from mmcdyn import frames
from mmcdyn.ssti import m_delta_z_waveform


@dataclass
class CtrlState:
    """PI integrator states (per-unit times seconds)."""

    int_i_delta_dq: np.ndarray = field(
        default_factory=lambda: np.zeros(2))
    int_i_sigma_dq: np.ndarray = field(
        default_factory=lambda: np.zeros(2))

    def as_vector(self):
        return np.concatenate([self.int_i_delta_dq, self.int_i_sigma_dq])

    @classmethod
    def from_vector(cls, g):
        g = np.asarray(g, dtype=float)
        return cls(g[0:2].copy(), g[2:4].copy())


@dataclass
class Refs:
    """Power references (per-unit) and the CCSC current reference."""

    p_ref: float
    q_ref: float
    i_sigma_dq_ref: tuple = (0.0, 0.0)


def power_to_current_refs(p_ref, q_ref, v_g_dq):
    """Invert p = vgd*id + vgq*iq, q = vgq*id - vgd*iq for (id, iq) (pu)."""
    vgd, vgq = float(v_g_dq[0]), float(v_g_dq[1])
    norm2 = vgd * vgd + vgq * vgq
    if norm2 <= 0.01:  # |vg| < 0.1 pu
        raise ValueError("grid voltage collapse: |v_g_dq| = %.3g pu < 0.1"
                         % norm2 ** 0.5)
    i_d = (vgd * p_ref + vgq * q_ref) / norm2
    i_q = (vgq * p_ref - vgd * q_ref) / norm2
    return np.array([i_d, i_q])


def grid_current_law(i_dq, i_dq_ref, v_g_dq, int_dq, p):
    """Grid-current PI output vmDelta*_dq (pu) for given integrator values."""
    x_eq = p.omega * p.l_eq_ac / p.z_base_ac
    e = np.asarray(i_dq_ref, dtype=float) - np.asarray(i_dq, dtype=float)
    vm_d = v_g_dq[0] + x_eq * i_dq[1] \
        + p.kp_delta * (e[0] + int_dq[0] / p.tau_i_delta)
    vm_q = v_g_dq[1] - x_eq * i_dq[0] \
        + p.kp_delta * (e[1] + int_dq[1] / p.tau_i_delta)
    return np.array([vm_d, vm_q]), e


def ccsc_law(i_sigma_dq, ref, int_dq, p):
    """CCSC PI output vmSigma*_dq (pu) for given integrator values."""
    x_2arm = 2.0 * p.omega * p.l_arm / p.z_base_ac
    e = np.asarray(ref, dtype=float) - np.asarray(i_sigma_dq, dtype=float)
    vm_d = -p.kp_sigma * (e[0] + int_dq[0] / p.tau_i_sigma) \
        - x_2arm * i_sigma_dq[1]
    vm_q = -p.kp_sigma * (e[1] + int_dq[1] / p.tau_i_sigma) \
        + x_2arm * i_sigma_dq[0]
    return np.array([vm_d, vm_q]), e


def grid_current_pi(i_dq, i_dq_ref, v_g_dq, st, dt, p):
    """Discrete grid-current PI step: returns (vmDelta*_dq pu, new CtrlState).

    The integrator advances by explicit Euler with step dt.
    """
    vm, e = grid_current_law(i_dq, i_dq_ref, v_g_dq, st.int_i_delta_dq, p)
    new = CtrlState(st.int_i_delta_dq + dt * e, st.int_i_sigma_dq.copy())
    return vm, new


def ccsc_pi(i_sigma_dq, ref, st, dt, p):
    """Discrete CCSC PI step: returns (vmSigma*_dq pu, new CtrlState)."""
    vm, e = ccsc_law(i_sigma_dq, ref, st.int_i_sigma_dq, p)
    new = CtrlState(st.int_i_delta_dq.copy(), st.int_i_sigma_dq + dt * e)
    return vm, new


def synthesize_modulation(vm_delta_dq_ref, vm_sigma_dq_ref, p,
                          m_sigma_z=1.0, m_delta_Z=(0.0, 0.0)):
    """Direct (uncompensated) modulation from SI voltage references.

    mDelta_dq = -2*vmDelta*/v_dc_nominal, mSigma_dq = 2*vmSigma*/v_dc_nominal,
    mSigma_z = 1 and mDelta_Zd = mDelta_Zq = 0 unless overridden.
    Returns (m_sigma_dqz, m_delta_dqZ).
    """
    if p.v_dc_nominal <= 0:
        raise ValueError("v_dc_nominal must be positive")
    vdc = p.v_dc_nominal
    m_sigma = np.array([2.0 * vm_sigma_dq_ref[0] / vdc,
                        2.0 * vm_sigma_dq_ref[1] / vdc,
                        m_sigma_z])
    m_delta = np.array([-2.0 * vm_delta_dq_ref[0] / vdc,
                        -2.0 * vm_delta_dq_ref[1] / vdc,
                        m_delta_Z[0], m_delta_Z[1]])
    return m_sigma, m_delta


def modulation_to_abc(m_sigma_dqz, m_delta_dqZ, t, p):
    """Stationary-frame insertion-index sums/differences at time t.

    This is the bridge that lets the one controller drive the arm-averaged
    model: the Sigma indices rotate in the -2w frame, the Delta dq indices in
    the +w frame, and the Delta zero sequence is the 3w injection waveform.
    """
    w = p.omega
    m_sigma_abc = frames.to_abc(np.asarray(m_sigma_dqz, dtype=float), -2,
                                -2.0 * w * t)
    m_delta_z = m_delta_z_waveform(m_delta_dqZ[2:4], 3.0 * w * t)
    m_delta_abc = frames.to_abc(
        np.array([m_delta_dqZ[0], m_delta_dqZ[1], m_delta_z]), 1, w * t)
    return m_sigma_abc, m_delta_abc


def controller_modulation(i_delta_dq_pu, i_sigma_dq_pu, refs, int_vec, p):
    """Full control law: measurements (pu) -> (SstiInputs modulation, errors).

    int_vec is the flat 4-vector of PI integrator states
    (grid d, grid q, ccsc d, ccsc q); errors is the matching derivative.
    Grid voltage is the ideal stiff source at 1 pu on the d axis.
    """
    v_g_dq_pu = np.array([1.0, 0.0])
    i_ref = power_to_current_refs(refs.p_ref, refs.q_ref, v_g_dq_pu)
    vm_delta_pu, e_delta = grid_current_law(i_delta_dq_pu, i_ref, v_g_dq_pu,
                                            int_vec[0:2], p)
    vm_sigma_pu, e_sigma = ccsc_law(i_sigma_dq_pu, refs.i_sigma_dq_ref,
                                    int_vec[2:4], p)
    m_sigma, m_delta = synthesize_modulation(vm_delta_pu * p.v_base_ac,
                                             vm_sigma_pu * p.v_base_ac, p)
    errors = np.concatenate([e_delta, e_sigma])
    return m_sigma, m_delta, errors
