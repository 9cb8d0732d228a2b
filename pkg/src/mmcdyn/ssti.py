"""The 12-state steady-state-time-invariant (SSTI) dqz model.

States (flat-vector order used throughout):

    x[0:4]  v_c_delta_dqZ : vCDelta d, q, Zd, Zq   [V]
    x[4:7]  v_c_sigma_dqz : vCSigma d, q, z        [V]
    x[7:10] i_sigma_dqz   : iSigma d, q, z         [A]
    x[10:12] i_delta_dq   : iDelta d, q            [A]

Frames: Delta quantities live in the fundamental (+w) frame, Sigma quantities
in the -2w frame, and the zero-sequence capacitor-voltage difference is
carried as a constant 2-vector (Zd, Zq) in the 3w frame via the virtual
quadrature construction; its instantaneous value is
``reconstruct_vcdz((Zd, Zq), 3wt)``.

The products of modulation indices and states are period-averaged in their
target frames; the residual sixth-harmonic terms are dropped by construction
(the arm-averaged model in :mod:`mmcdyn.aam` retains them and serves as the
reference). The coefficient tables below were derived independently by
symbolic period-averaging and cross-checked against the stationary-frame
model by numerical quadrature; they are exact up to the dropped 6w content.

Inputs: 7 modulation components mSigma(d,q,z) and mDelta(d,q,Zd,Zq), the grid
voltage (vgd, vgq) and the dc-bus voltage. iDelta has no z component (stiff
three-wire assumption).
"""

from dataclasses import dataclass

import numpy as np

N_STATES = 12

STATE_LABELS = ["v_c_delta_d", "v_c_delta_q", "v_c_delta_zd", "v_c_delta_zq",
                "v_c_sigma_d", "v_c_sigma_q", "v_c_sigma_z",
                "i_sigma_d", "i_sigma_q", "i_sigma_z",
                "i_delta_d", "i_delta_q"]

INPUT_LABELS = ["m_sigma_d", "m_sigma_q", "m_sigma_z",
                "m_delta_d", "m_delta_q", "m_delta_zd", "m_delta_zq",
                "v_g_d", "v_g_q", "v_dc"]


@dataclass
class SstiState:
    """SSTI state split into its four vectors (SI units)."""

    v_c_delta_dqZ: np.ndarray  # V, (d, q, Zd, Zq)
    v_c_sigma_dqz: np.ndarray  # V, (d, q, z)
    i_sigma_dqz: np.ndarray    # A, (d, q, z)
    i_delta_dq: np.ndarray     # A, (d, q)

    def as_vector(self):
        return np.concatenate([self.v_c_delta_dqZ, self.v_c_sigma_dqz,
                               self.i_sigma_dqz, self.i_delta_dq])

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[0:4].copy(), x[4:7].copy(), x[7:10].copy(),
                   x[10:12].copy())


@dataclass
class SstiInputs:
    """7 modulation inputs + grid voltage + dc voltage (SI units)."""

    m_sigma_dqz: np.ndarray   # (d, q, z)
    m_delta_dqZ: np.ndarray   # (d, q, Zd, Zq)
    v_g_dq: np.ndarray        # V, (d, q)
    v_dc: float               # V


def m_delta_z_waveform(m_dZ, theta3):
    """Instantaneous zero-sequence modulation difference at theta3 = 3wt:
    mDelta-z = mDeltaZd*cos(theta3) + mDeltaZq*sin(theta3)."""
    return m_dZ[0] * np.cos(theta3) + m_dZ[1] * np.sin(theta3)


def reconstruct_vcdz(v_cZ, theta3):
    """Instantaneous zero-sequence capacitor-voltage difference at
    theta3 = 3wt from its constant 3w-frame components."""
    return v_cZ[0] * np.cos(theta3) + v_cZ[1] * np.sin(theta3)


def vm_sigma_dqz(m_sigma_dqz, m_delta_dqZ, v_c_sigma_dqz, v_c_delta_dqZ):
    """Modulated voltage driving the circulating current, in the -2w frame."""
    msd, msq, msz = m_sigma_dqz
    mdd, mdq, mzd, mzq = m_delta_dqZ
    vsd, vsq, vsz = v_c_sigma_dqz
    vdd, vdq, vzd, vzq = v_c_delta_dqZ
    out_d = (mzd * vdd + mzq * vdq + mdd * (vzd + vdd)
             + mdq * (vzq - vdq)) / 4.0 + (msd * vsz + msz * vsd) / 2.0
    out_q = (-mzd * vdq + mzq * vdd + mdd * (vzq + vdq)
             + mdq * (vdd - vzd)) / 4.0 + (msq * vsz + msz * vsq) / 2.0
    out_z = (mzd * vzd + mzq * vzq + mdd * vdd + mdq * vdq
             + msd * vsd + msq * vsq) / 4.0 + msz * vsz / 2.0
    return np.array([out_d, out_q, out_z])


def vm_delta_dq(m_sigma_dqz, m_delta_dqZ, v_c_sigma_dqz, v_c_delta_dqZ):
    """Modulated voltage driving the grid current, in the +w frame."""
    msd, msq, msz = m_sigma_dqz
    mdd, mdq, mzd, mzq = m_delta_dqZ
    vsd, vsq, vsz = v_c_sigma_dqz
    vdd, vdq, vzd, vzq = v_c_delta_dqZ
    out_d = -((mdd + mzd) * vsd + (mdq + mzq) * vsq) / 4.0 \
        - mdd * vsz / 2.0 \
        - (msd * (vzd + vdd) + msq * (vzq + vdq)) / 4.0 - msz * vdd / 2.0
    out_q = ((mdq - mzq) * vsd + (mzd - mdd) * vsq) / 4.0 \
        - mdq * vsz / 2.0 \
        + (msd * (vdq - vzq) + msq * (vzd - vdd)) / 4.0 - msz * vdq / 2.0
    return np.array([out_d, out_q])


def ssti_rhs(x, msd, msq, msz, mdd, mdq, mzd, mzq, vgd, vgq, vdc, p):
    """Flat derivative of the 12-state vector (list of floats, SI/s).

    Scalar hot path shared by ssti_derivatives and the closed-loop simulator.
    """
    vdd, vdq, vzd, vzq = x[0], x[1], x[2], x[3]
    vsd, vsq, vsz = x[4], x[5], x[6]
    isd, isq, isz = x[7], x[8], x[9]
    idd, idq = x[10], x[11]
    w = p.omega
    two_c = 2.0 * p.c_arm

    # modulated voltages (period-averaged products, 6w terms dropped)
    vms_d = (mzd * vdd + mzq * vdq + mdd * (vzd + vdd)
             + mdq * (vzq - vdq)) / 4.0 + (msd * vsz + msz * vsd) / 2.0
    vms_q = (-mzd * vdq + mzq * vdd + mdd * (vzq + vdq)
             + mdq * (vdd - vzd)) / 4.0 + (msq * vsz + msz * vsq) / 2.0
    vms_z = (mzd * vzd + mzq * vzq + mdd * vdd + mdq * vdq
             + msd * vsd + msq * vsq) / 4.0 + msz * vsz / 2.0
    vmd_d = -((mdd + mzd) * vsd + (mdq + mzq) * vsq) / 4.0 - mdd * vsz / 2.0 \
        - (msd * (vzd + vdd) + msq * (vzq + vdq)) / 4.0 - msz * vdd / 2.0
    vmd_q = ((mdq - mzq) * vsd + (mzd - mdd) * vsq) / 4.0 - mdq * vsz / 2.0 \
        + (msd * (vdq - vzq) + msq * (vzd - vdd)) / 4.0 - msz * vdq / 2.0

    # capacitor charge balance (products averaged into each target frame)
    dvd_d = (idd * (msd / 4.0 + msz / 2.0) + idq * msq / 4.0
             + isd * (mzd + mdd) / 2.0 + isq * (mzq + mdq) / 2.0
             + isz * mdd) / two_c - w * vdq
    dvd_q = (idd * msq / 4.0 + idq * (msz / 2.0 - msd / 4.0)
             + isd * (mzq - mdq) / 2.0 + isq * (mdd - mzd) / 2.0
             + isz * mdq) / two_c + w * vdd
    dvd_zd = (idd * msd / 4.0 - idq * msq / 4.0
              + isd * mdd / 2.0 - isq * mdq / 2.0
              + isz * mzd) / two_c - 3.0 * w * vzq
    dvd_zq = (idd * msq / 4.0 + idq * msd / 4.0
              + isd * mdq / 2.0 + isq * mdd / 2.0
              + isz * mzq) / two_c + 3.0 * w * vzd
    dvs_d = (idd * (mzd + mdd) / 4.0 + idq * (mzq - mdq) / 4.0
             + isd * msz + isz * msd) / two_c - 2.0 * w * vsq
    dvs_q = (idd * (mzq + mdq) / 4.0 + idq * (mdd - mzd) / 4.0
             + isq * msz + isz * msq) / two_c + 2.0 * w * vsd
    dvs_z = (idd * mdd / 4.0 + idq * mdq / 4.0
             + (isd * msd + isq * msq) / 2.0 + isz * msz) / two_c

    # current dynamics
    dis_d = (-p.r_arm * isd - vms_d) / p.l_arm - 2.0 * w * isq
    dis_q = (-p.r_arm * isq - vms_q) / p.l_arm + 2.0 * w * isd
    dis_z = (vdc / 2.0 - p.r_arm * isz - vms_z) / p.l_arm
    did_d = (vmd_d - vgd - p.r_eq_ac * idd) / p.l_eq_ac - w * idq
    did_q = (vmd_q - vgq - p.r_eq_ac * idq) / p.l_eq_ac + w * idd

    return [dvd_d, dvd_q, dvd_zd, dvd_zq, dvs_d, dvs_q, dvs_z,
            dis_d, dis_q, dis_z, did_d, did_q]


def ssti_derivatives(s, u, p):
    """Time derivative of an SstiState under inputs u and parameters p."""
    x = s.as_vector()
    msd, msq, msz = u.m_sigma_dqz
    mdd, mdq, mzd, mzq = u.m_delta_dqZ
    vgd, vgq = u.v_g_dq
    dx = ssti_rhs(x, msd, msq, msz, mdd, mdq, mzd, mzq, vgd, vgq, u.v_dc, p)
    return SstiState.from_vector(np.array(dx))
