"""Arm-averaged model: modulated voltages, derivatives, arm mappings and
trajectory invariants."""

import numpy as np
import pytest

from mmcdyn import sim
from mmcdyn.aam import (AamInputs, AamState, aam_derivatives, arm_quantities,
                        index_violation, insertion_indices,
                        modulated_voltages)

Z3 = np.zeros(3)


def test_modulated_voltages_example():
    vm_delta, vm_sigma = modulated_voltages(
        m_sigma=[1.0, 1.0, 1.0], m_delta=Z3,
        v_c_sigma=[640e3, 640e3, 640e3], v_c_delta=Z3)
    np.testing.assert_allclose(vm_sigma, [320e3, 320e3, 320e3])
    np.testing.assert_allclose(vm_delta, 0.0)


def test_modulated_voltages_per_arm_oracle(rng):
    """Same voltages from the per-arm picture: vmDelta = (mL vCL - mU vCU)/2,
    vmSigma = (mU vCU + mL vCL)/2."""
    for _ in range(20):
        s = AamState(rng.standard_normal(3), rng.standard_normal(3),
                     640e3 * (1 + 0.1 * rng.standard_normal(3)),
                     10e3 * rng.standard_normal(3))
        m_sigma = rng.uniform(0.5, 1.5, 3)
        m_delta = rng.uniform(-0.9, 0.9, 3)
        m_u, m_l = insertion_indices(m_sigma, m_delta)
        _iu, _il, v_cu, v_cl = arm_quantities(s)
        vm_delta, vm_sigma = modulated_voltages(m_sigma, m_delta,
                                                s.v_c_sigma, s.v_c_delta)
        np.testing.assert_allclose(vm_delta, (m_l * v_cl - m_u * v_cu) / 2.0,
                                   rtol=1e-12)
        np.testing.assert_allclose(vm_sigma, (m_u * v_cu + m_l * v_cl) / 2.0,
                                   rtol=1e-12)


def test_zero_state_zero_modulation_derivative(p):
    """Only the dc bus drives anything: di_sigma = v_dc / (2 l_arm)."""
    s = AamState(Z3.copy(), Z3.copy(), Z3.copy(), Z3.copy())
    u = AamInputs(m_sigma=Z3, m_delta=Z3, v_g=Z3, v_dc=640e3)
    d = aam_derivatives(s, u, p)
    np.testing.assert_allclose(d.i_sigma, 640e3 / (2.0 * p.l_arm), rtol=1e-14)
    np.testing.assert_allclose(d.i_delta, 0.0)
    np.testing.assert_allclose(d.v_c_sigma, 0.0)
    np.testing.assert_allclose(d.v_c_delta, 0.0)


def test_dc_bus_cancellation(p):
    """With m_sigma = 1 and vCSigma = v_dc the circulating drive vanishes."""
    s = AamState(Z3.copy(), Z3.copy(), np.full(3, 640e3), Z3.copy())
    u = AamInputs(m_sigma=np.ones(3), m_delta=Z3, v_g=Z3, v_dc=640e3)
    d = aam_derivatives(s, u, p)
    np.testing.assert_allclose(d.i_sigma, 0.0, atol=1e-12)


def test_three_wire_common_mode_removed(p):
    """A pure common-mode drive cannot move the grid currents."""
    s = AamState(Z3.copy(), Z3.copy(), Z3.copy(), Z3.copy())
    u = AamInputs(m_sigma=Z3, m_delta=Z3, v_g=np.full(3, 123e3), v_dc=0.0)
    d = aam_derivatives(s, u, p)
    np.testing.assert_allclose(d.i_delta, 0.0, atol=1e-15)


def test_capacitor_charge_dc_component_quadrature(p):
    """Period-averaged vCSigma charging rate equals the phasor-product
    average, computed by independent uniform-grid quadrature."""
    w = p.omega
    n = 4096
    t = np.arange(n) / n * (2.0 * np.pi / w)
    md_amp, id_amp, phi = 0.9, 1600.0, 0.4
    ms2, is0, is2, psi = 0.08, 210.0, 190.0, -1.1
    th = w * t
    m_delta = md_amp * np.cos(th)
    i_delta = id_amp * np.cos(th - phi)
    m_sigma = 1.0 + ms2 * np.cos(2 * th)
    i_sigma = is0 + is2 * np.cos(2 * th - psi)
    samples = (m_delta * i_delta / 2.0 + m_sigma * i_sigma) / (2.0 * p.c_arm)
    analytic = (md_amp * id_amp * np.cos(phi) / 4.0
                + is0 + ms2 * is2 * np.cos(psi) / 2.0) / (2.0 * p.c_arm)
    assert np.mean(samples) == pytest.approx(analytic, rel=1e-9)


def test_arm_quantities_example():
    s = AamState(i_delta=np.array([2.0, 0.0, -2.0]),
                 i_sigma=np.array([1.0, 1.0, 1.0]),
                 v_c_sigma=np.array([5.0, 5.0, 5.0]),
                 v_c_delta=np.array([1.0, 0.0, -1.0]))
    i_u, i_l, v_cu, v_cl = arm_quantities(s)
    np.testing.assert_allclose(i_u, [2.0, 1.0, 0.0])
    np.testing.assert_allclose(i_l, [0.0, 1.0, 2.0])
    np.testing.assert_allclose(v_cu, [6.0, 5.0, 4.0])
    np.testing.assert_allclose(v_cl, [4.0, 5.0, 6.0])


def test_arm_round_trip(rng):
    s = AamState(*(rng.standard_normal(3) for _ in range(4)))
    i_u, i_l, v_cu, v_cl = arm_quantities(s)
    np.testing.assert_allclose(i_u - i_l, s.i_delta, atol=1e-12)
    np.testing.assert_allclose((i_u + i_l) / 2, s.i_sigma, atol=1e-12)
    np.testing.assert_allclose((v_cu + v_cl) / 2, s.v_c_sigma, atol=1e-12)
    np.testing.assert_allclose((v_cu - v_cl) / 2, s.v_c_delta, atol=1e-12)


def test_per_arm_power_balance(p, rng):
    """c_arm * vC * dvC/dt equals the modulated arm power m * i * vC for each
    of the six arms, at random states and inputs."""
    for _ in range(20):
        s = AamState(rng.standard_normal(3) * 2000,
                     rng.standard_normal(3) * 500,
                     640e3 * (1 + 0.05 * rng.standard_normal(3)),
                     20e3 * rng.standard_normal(3))
        u = AamInputs(m_sigma=rng.uniform(0.6, 1.4, 3),
                      m_delta=rng.uniform(-0.9, 0.9, 3),
                      v_g=260e3 * rng.standard_normal(3),
                      v_dc=640e3)
        d = aam_derivatives(s, u, p)
        i_u, i_l, v_cu, v_cl = arm_quantities(s)
        m_u, m_l = insertion_indices(u.m_sigma, u.m_delta)
        dv_cu = d.v_c_sigma + d.v_c_delta
        dv_cl = d.v_c_sigma - d.v_c_delta
        np.testing.assert_allclose(p.c_arm * v_cu * dv_cu, m_u * i_u * v_cu,
                                   rtol=1e-8)
        np.testing.assert_allclose(p.c_arm * v_cl * dv_cl, m_l * i_l * v_cl,
                                   rtol=1e-8)


def test_insertion_index_example_and_violation():
    m_u, m_l = insertion_indices([1.0, 1.0, 1.0], [0.5, 0.0, -0.5])
    np.testing.assert_allclose(m_u, [0.75, 0.5, 0.25])
    np.testing.assert_allclose(m_l, [0.25, 0.5, 0.75])
    assert not index_violation([1.0, 1.0, 1.0], [0.5, 0.0, -0.5])
    assert index_violation([1.0, 1.0, 1.0], [1.5, 0.0, 0.0])
    assert index_violation([2.5, 1.0, 1.0], [0.0, 0.0, 0.0])
    assert not index_violation([2.0, 1.0, 1.0], [0.0, 0.0, 0.0], tol=1.0)


def test_zero_sequence_current_stays_zero(p):
    """Closed-loop run: sum of grid currents stays at machine zero."""
    sc = sim.Scenario(duration=0.5, initial_refs=(1.0, 0.0))
    tr = sim.run_scenario("aam", sc, p, dt=2.5e-5)
    total = (tr.channels["i_delta_a"] + tr.channels["i_delta_b"]
             + tr.channels["i_delta_c"])
    assert np.max(np.abs(total)) / p.i_base_ac < 1e-9
