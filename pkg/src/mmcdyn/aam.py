"""Stationary-frame arm-averaged model (AAM) in Sigma/Delta variables.

States per phase j in {a, b, c}:

* i_delta   = iU - iL          (grid current)
* i_sigma   = (iU + iL)/2      (circulating current)
* v_c_sigma = (vCU + vCL)/2    (capacitor voltage sum, per-unit-arm average)
* v_c_delta = (vCU - vCL)/2    (capacitor voltage difference)

so vCU = v_c_sigma + v_c_delta and vCL = v_c_sigma - v_c_delta.

Dynamics (per phase, element-wise products):

    l_eq_ac * d(i_delta)/dt   = vm_delta - v_g - r_eq_ac * i_delta
    l_arm   * d(i_sigma)/dt   = v_dc/2 - vm_sigma - r_arm * i_sigma
    2 c_arm * d(v_c_sigma)/dt = m_delta*i_delta/2 + m_sigma*i_sigma
    2 c_arm * d(v_c_delta)/dt = m_sigma*i_delta/2 + m_delta*i_sigma

where vm_delta = -(m_delta*v_c_sigma + m_sigma*v_c_delta)/2 and
vm_sigma = (m_sigma*v_c_sigma + m_delta*v_c_delta)/2.

The grid connection is three-wire, so the common mode (phase mean) of
(vm_delta - v_g) is subtracted in the i_delta equation: it appears across the
floating neutral and cannot drive zero-sequence grid current. This keeps
sum(i_delta) = 0 exact, matching the model's 11 independent states.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class AamState:
    """Stationary-frame state: four three-phase vectors (SI units)."""

    i_delta: np.ndarray    # A, grid currents, zero-sum
    i_sigma: np.ndarray    # A, circulating currents
    v_c_sigma: np.ndarray  # V, capacitor voltage sums
    v_c_delta: np.ndarray  # V, capacitor voltage differences

    def as_vector(self):
        return np.concatenate([self.i_delta, self.i_sigma,
                               self.v_c_sigma, self.v_c_delta])

    @classmethod
    def from_vector(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[0:3].copy(), x[3:6].copy(), x[6:9].copy(), x[9:12].copy())


@dataclass
class AamInputs:
    """Modulation, grid voltage and dc-bus input (SI units)."""

    m_sigma: np.ndarray  # insertion-index sums
    m_delta: np.ndarray  # insertion-index differences
    v_g: np.ndarray      # V, grid phase voltages
    v_dc: float          # V


def modulated_voltages(m_sigma, m_delta, v_c_sigma, v_c_delta):
    """Return (vm_delta, vm_sigma): the modulated voltages driving the grid
    and circulating currents."""
    m_sigma = np.asarray(m_sigma, dtype=float)
    m_delta = np.asarray(m_delta, dtype=float)
    v_c_sigma = np.asarray(v_c_sigma, dtype=float)
    v_c_delta = np.asarray(v_c_delta, dtype=float)
    vm_delta = -(m_delta * v_c_sigma + m_sigma * v_c_delta) / 2.0
    vm_sigma = (m_sigma * v_c_sigma + m_delta * v_c_delta) / 2.0
    return vm_delta, vm_sigma


def aam_derivatives(s, u, p):
    """Time derivative of an AamState under inputs u and parameters p."""
    vm_delta, vm_sigma = modulated_voltages(u.m_sigma, u.m_delta,
                                            s.v_c_sigma, s.v_c_delta)
    drive = vm_delta - u.v_g
    drive = drive - np.mean(drive)  # three-wire: no zero-sequence drive
    di_delta = (drive - p.r_eq_ac * s.i_delta) / p.l_eq_ac
    di_sigma = (u.v_dc / 2.0 - vm_sigma - p.r_arm * s.i_sigma) / p.l_arm
    dv_c_sigma = (u.m_delta * s.i_delta / 2.0
                  + u.m_sigma * s.i_sigma) / (2.0 * p.c_arm)
    dv_c_delta = (u.m_sigma * s.i_delta / 2.0
                  + u.m_delta * s.i_sigma) / (2.0 * p.c_arm)
    return AamState(di_delta, di_sigma, dv_c_sigma, dv_c_delta)


def arm_quantities(s):
    """Per-arm currents and capacitor voltages (iU, iL, vCU, vCL)."""
    i_u = s.i_sigma + s.i_delta / 2.0
    i_l = s.i_sigma - s.i_delta / 2.0
    v_cu = s.v_c_sigma + s.v_c_delta
    v_cl = s.v_c_sigma - s.v_c_delta
    return i_u, i_l, v_cu, v_cl


def insertion_indices(m_sigma, m_delta):
    """Per-arm insertion indices (mU, mL) from the Sigma/Delta indices."""
    m_sigma = np.asarray(m_sigma, dtype=float)
    m_delta = np.asarray(m_delta, dtype=float)
    return (m_sigma + m_delta) / 2.0, (m_sigma - m_delta) / 2.0


def index_violation(m_sigma, m_delta, tol=0.0):
    """True if any per-arm insertion index leaves [0, 1] by more than tol.

    Violations are reported (trajectory events), never silently clipped.
    """
    m_u, m_l = insertion_indices(m_sigma, m_delta)
    lo, hi = -tol, 1.0 + tol
    return bool(np.any(m_u < lo) or np.any(m_u > hi)
                or np.any(m_l < lo) or np.any(m_l > hi))
