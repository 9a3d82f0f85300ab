"""Closed-loop harness: integrator oracles, determinism, abort handling."""

import math

import numpy as np
import pytest

from slungsim.dynamics import VehicleParams, quad_derivative_array
from slungsim.simloop import SimConfig, SimLog, make_controller, rk4_step, run
from slungsim.controllers import PdController, SmcController
from slungsim.mpc import MpcController


class TestConfig:
    def test_defaults_valid(self):
        cfg = SimConfig()
        assert cfg.n_sub == 10
        assert cfg.n_ticks == 7500

    def test_unknown_controller(self):
        with pytest.raises(ValueError):
            SimConfig(controller="LQR")

    def test_unknown_trajectory(self):
        with pytest.raises(ValueError):
            SimConfig(trajectory="helix")

    def test_overweight_load(self):
        with pytest.raises(ValueError):
            SimConfig(m_L=0.7)

    def test_negative_mass(self):
        with pytest.raises(ValueError):
            SimConfig(m_L=-0.1)

    def test_non_multiple_steps(self):
        with pytest.raises(ValueError):
            SimConfig(dt_physics=3e-3, dt_control=1e-2)

    def test_factory_dispatch(self):
        assert isinstance(make_controller(SimConfig(controller="PD")),
                          PdController)
        assert isinstance(make_controller(SimConfig(controller="SMC")),
                          SmcController)
        assert isinstance(make_controller(SimConfig(controller="MPC")),
                          MpcController)


class TestRk4Step:
    def test_constant_derivative_exact(self):
        f = lambda y, u: np.array([3.0, -2.0])
        y1 = rk4_step(f, np.array([1.0, 1.0]), None, 0.25)
        assert np.array_equal(y1, [1.75, 0.5])

    def test_harmonic_oscillator_amplitude(self):
        # y = (q, v), q'' = -q; amplitude after one period should hold
        f = lambda y, u: np.array([y[1], -y[0]])
        y = np.array([1.0, 0.0])
        dt = 0.01
        n = int(round(2.0 * math.pi / dt))
        for _ in range(n):
            y = rk4_step(f, y, None, dt)
        # land exactly on 2*pi by taking the fractional remainder step
        rem = 2.0 * math.pi - n * dt
        y = rk4_step(f, y, None, rem)
        amplitude = math.hypot(y[0], y[1])
        assert abs(amplitude - 1.0) < 1e-8
        assert abs(y[0] - 1.0) < 1e-8

    def test_free_fall_quartic_exact(self):
        # gravity-only quad state: z(t) = z0 - g t^2 / 2, polynomial in t
        # of degree 2, integrated exactly by a 4th-order rule
        p = VehicleParams()
        f = lambda y, u: quad_derivative_array(y, u, p)
        y = np.zeros(12)
        y[2] = 10.0
        u = np.zeros(4)
        for _ in range(100):
            y = rk4_step(f, y, u, 0.01)
        assert abs(y[2] - (10.0 - 0.5 * p.g)) < 1e-10

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            rk4_step(lambda y, u: y, np.zeros(2), None, 0.0)


class TestRun:
    def test_row_count_and_times(self):
        log = run(SimConfig(controller="PD", duration=2.0))
        assert log.n_rows == 201
        assert np.all(np.diff(log.t) > 0)
        assert log.t[0] == 0.0
        assert abs(log.t[-1] - 2.0) < 1e-12
        assert not log.failed

    def test_determinism_bitwise(self):
        cfg = SimConfig(controller="SMC", m_L=0.25, duration=5.0)
        a = run(cfg)
        b = run(cfg)
        assert np.array_equal(a.quad, b.quad)
        assert np.array_equal(a.load, b.load)
        assert np.array_equal(a.u, b.u)
        assert np.array_equal(a.sat, b.sat)

    @pytest.mark.parametrize("name", ["PD", "SMC", "MPC"])
    def test_hover_equilibrium_hold(self, name):
        cfg = SimConfig(controller=name, m_L=0.0, duration=10.0,
                        trajectory="hover")
        log = run(cfg)
        drift = np.abs(log.quad[:, 0:3] - [0.0, 0.0, 1.5]).max()
        assert drift < 1e-6

    def test_nominal_model_firewall(self):
        # controllers only see QuadState; the load mass must not leak into
        # the first-tick command
        outs = []
        for m in (0.0, 0.3):
            cfg = SimConfig(controller="SMC", m_L=m, duration=1.0)
            ctrl = make_controller(cfg)
            from slungsim.dynamics import QuadState
            from slungsim.trajectory import square_reference
            out = ctrl.step(0.0, QuadState(z=1.5), square_reference(0.0))
            outs.append(out.u.as_array())
        assert np.array_equal(outs[0], outs[1])

    def test_abort_returns_partial_log(self):
        # a wildly overgained attitude loop escapes the attitude envelope
        # within a few ticks and the run must stop cleanly
        from slungsim.controllers import PdGains
        bad = PdGains(Kpp=5e4, Kpt=5e4, Kdp=1e-3, Kdt=1e-3)
        cfg = SimConfig(controller="PD", m_L=0.5, duration=75.0,
                        pd_gains=bad)
        log = run(cfg)
        assert log.failed
        assert log.failure_reason
        assert 0 < log.n_rows < 7501
        # rows logged before the abort are still coherent
        assert np.all(np.isfinite(log.quad))

    def test_smc_square_roll_bound(self):
        log = run(SimConfig(controller="SMC", m_L=0.3))
        assert not log.failed
        roll_deg = np.degrees(np.abs(log.quad[:, 6])).max()
        assert roll_deg <= 4.0

    def test_refinement_convergence(self):
        base = SimConfig(controller="PD", m_L=0.3, duration=75.0)
        fine = SimConfig(controller="PD", m_L=0.3, duration=75.0,
                         dt_physics=5e-4)
        ya = run(base)
        yb = run(fine)
        gap = np.linalg.norm(ya.quad[-1] - yb.quad[-1])
        assert gap < 1e-6

    def test_thrust_clamped_to_envelope(self):
        log = run(SimConfig(controller="SMC", m_L=0.5, duration=20.0,
                            trajectory="single_leg"))
        p = VehicleParams()
        assert np.all(log.u[:, 0] >= 0.0)
        assert np.all(log.u[:, 0] <= p.U1_max + 1e-12)
