import math

import numpy as np
import pytest

from gitsmc_lfc import bench39
from gitsmc_lfc.control import (ControllerState, GitsmcController, GitsmcGains, PiController,
                                PiGains, SingularSurfaceError, area_control_error,
                                equivalent_control, finite_reaching_gain, gitsmc_step, pi_step,
                                saturate, signed_power, sliding_surface, switching_control)
from gitsmc_lfc.plant import N_STATES, PlantMatrices


def published_area1() -> PlantMatrices:
    return bench39.published_matrices()[0]


def test_signed_power_examples():
    assert signed_power(0.0, 1.7) == 0.0
    assert signed_power(1.0, 1.7) == 1.0
    assert signed_power(-2.0, 1.7) == pytest.approx(-3.249009585424942, rel=1e-14)


def test_gain_validation():
    for bad in (dict(alpha=1.0), dict(alpha=2.0), dict(eta1=0.0), dict(eta2=-1.0),
                dict(lambda1=-1.0), dict(boundary_eps=-1e-3), dict(mu_max=0.0)):
        with pytest.raises(ValueError):
            GitsmcGains(**bad)
    g = GitsmcGains()
    assert (g.lambda1, g.lambda2, g.alpha) == (24.0, 24.0, 1.7)


def test_sliding_surface_examples():
    th = published_area1().theta
    cs = ControllerState()
    assert sliding_surface(np.zeros(N_STATES), cs, th, GitsmcGains()) == 0.0
    x = np.zeros(N_STATES)
    x[4] = 12.43
    assert sliding_surface(x, cs, th, GitsmcGains()) == pytest.approx(1.0, rel=1e-14)


def test_rectangle_rule_surface_growth():
    m = published_area1()
    g = GitsmcGains()
    x = np.array([0.01, -0.02, 0.03, 0.0, 0.2, -0.1, 0.05])
    dt = 0.01
    sig, cs = gitsmc_step(x, ControllerState(), dt, m, g)
    expected = m.theta @ x + m.theta @ (g.lambda1 * x + g.lambda2 * np.sign(x) * np.abs(x) ** 1.7) * dt
    assert sig.theta == pytest.approx(expected, rel=1e-13)
    np.testing.assert_allclose(cs.integral_x, x * dt)


def test_equivalent_control_examples():
    m = published_area1()
    g = GitsmcGains()
    assert equivalent_control(np.zeros(N_STATES), ControllerState(), m, g) == 0.0
    for pm in bench39.published_matrices():
        assert pm.theta @ pm.B0 == pytest.approx(1.0, rel=1e-12)


def test_equivalent_control_duplicate_formula():
    m = published_area1()
    g = GitsmcGains()
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.uniform(-0.2, 0.2, N_STATES)
        # written out without numpy broadcasting helpers
        thA = [sum(m.theta[r] * m.A0[r, c] for r in range(7)) for c in range(7)]
        num = sum(thA[c] * x[c] for c in range(7))
        num += g.lambda1 * sum(m.theta[c] * x[c] for c in range(7))
        num += g.lambda2 * sum(m.theta[c] * math.copysign(abs(x[c]) ** 1.7, x[c]) for c in range(7))
        tb = sum(m.theta[c] * m.B0[c] for c in range(7))
        assert abs(equivalent_control(x, ControllerState(), m, g) - (-num / tb)) < 1e-12


def test_singular_surface():
    m = published_area1()
    with pytest.raises(SingularSurfaceError):
        PlantMatrices(m.A0, np.eye(N_STATES)[0], m.psi0, theta=np.eye(N_STATES)[4])
    with pytest.raises(SingularSurfaceError):
        m.with_theta(np.eye(N_STATES)[0])


def test_switching_control_examples():
    m = published_area1()
    g = GitsmcGains(eta1=2.0, eta2=0.5, boundary_eps=1e-3)
    assert switching_control(0.0, m, g) == 0.0
    assert switching_control(0.1, m, g) == pytest.approx(-0.7, rel=1e-12)
    eps = g.boundary_eps
    lo = switching_control(eps * (1 - 1e-12), m, g)
    hi = switching_control(eps * (1 + 1e-12), m, g)
    assert lo == pytest.approx(hi, abs=1e-9)


def test_pure_sign_mode():
    assert saturate(0.0, 0.0) == 0.0
    assert saturate(-1e-9, 0.0) == -1.0
    assert saturate(5e-4, 1e-3) == pytest.approx(0.5)


def test_mu_limit_keeps_decomposition():
    m = published_area1()
    g = GitsmcGains(mu_max=0.1)
    x = np.full(N_STATES, 0.3)
    sig, _ = gitsmc_step(x, ControllerState(), 0.01, m, g)
    assert abs(sig.mu) == pytest.approx(0.1, rel=1e-12)
    assert sig.mu == sig.mu_eq + sig.mu_sw


def test_gitsmc_step_requires_positive_dt():
    with pytest.raises(ValueError):
        gitsmc_step(np.zeros(N_STATES), ControllerState(), 0.0, published_area1(), GitsmcGains())


def test_pi_examples():
    mu, cs = pi_step(0.0, 0.0, 20.0, PiGains(1.0, 2.0), ControllerState(), 0.01)
    assert mu == 0.0
    # constant ACE = c for T = n*dt
    beta, c, dt, n = 20.0, 0.3, 0.01, 250
    df = c / beta
    ctl = PiController(beta, PiGains(1.5, 2.0))
    for _ in range(n):
        sig = ctl.step(np.array([0.0, df, 0, 0, 0, 0, 0]), dt)
    assert sig.mu == pytest.approx(-(1.5 * c + 2.0 * c * n * dt), rel=1e-12)
    # clamp on |ki * integral|
    M = 0.4
    ctl = PiController(beta, PiGains(1.5, 2.0, integral_limit=M))
    for _ in range(n):
        sig = ctl.step(np.array([0.0, df, 0, 0, 0, 0, 0]), dt)
    assert sig.mu == pytest.approx(-(1.5 * c + M), rel=1e-12)
    ctl.reset()
    assert ctl.state.pi_integral == 0.0


def test_ace():
    assert area_control_error(0.01, 0.2, 20.0) == pytest.approx(0.4)


def test_controller_reset_and_finite_gain():
    ctl = GitsmcController(published_area1(), GitsmcGains())
    ctl.step(np.full(N_STATES, 0.1), 0.01)
    assert ctl.state.integral_x.any()
    ctl.reset()
    assert not ctl.state.integral_x.any()
    assert finite_reaching_gain(GitsmcGains(eta1=2, eta2=0.5, boundary_eps=0.01)) == pytest.approx(52.0)
    assert finite_reaching_gain(GitsmcGains(boundary_eps=0.0)) == math.inf


def test_manifold_follows_reaching_law():
    """On the nominal decoupled plant, Theta' = -eta1*Theta - eta2*sat(Theta)."""
    m = published_area1()
    g = GitsmcGains(eta1=2.0, eta2=0.5, boundary_eps=1e-3)
    x = np.array([0.0, 0.001, 0.002, 0.0, 0.01, 0.0, 0.0])
    cs = ControllerState()
    dt = 1e-6
    sig, cs = gitsmc_step(x, cs, dt, m, g)
    xdot = m.A0 @ x + m.B0 * sig.mu
    x2 = x + dt * xdot
    sig2, _ = gitsmc_step(x2, cs, dt, m, g)
    theta_dot = (sig2.theta - sig.theta) / dt
    expected = -g.eta1 * sig.theta - g.eta2 * saturate(sig.theta, g.boundary_eps)
    assert theta_dot == pytest.approx(expected, rel=1e-3)
