"""Randomized invariants of the building blocks."""
import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gitsmc_lfc import bench39
from gitsmc_lfc.control import (ControllerState, GitsmcController, GitsmcGains, gitsmc_step,
                                saturate, signed_power, switching_control)
from gitsmc_lfc.metrics import compare_controllers, indices_from_arrays
from gitsmc_lfc.plant import (FREQ, TIE, GeneratorParameters, MultiAreaPlant, TieLineTopology,
                              aggregate_area_parameters, plant_derivative)
from gitsmc_lfc.sim import SimTrace, finite_time_estimate, reaching_monitor, rk4_step

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
alphas = st.floats(1.01, 1.99)
positive = st.floats(1e-3, 1e2)

PLANT = bench39.formula_plant()
GAINS = bench39.benchmark_gitsmc_gains()[0]


def _state(n=4):
    return arrays(np.float64, (n, 7), elements=st.floats(-0.5, 0.5))


@given(finite, alphas)
def test_signed_power_inverts(x, a):
    y = signed_power(signed_power(x, a), 1.0 / a)
    assert math.isclose(float(y), x, rel_tol=1e-9, abs_tol=1e-12)


@given(finite, alphas)
def test_signed_power_is_odd_and_monotone(x, a):
    assert float(signed_power(-x, a)) == -float(signed_power(x, a))
    assert float(signed_power(x + 1.0, a)) >= float(signed_power(x, a))


@given(finite, st.floats(0, 10))
def test_saturation_is_odd_and_bounded(s, eps):
    v = float(saturate(s, eps))
    assert float(saturate(-s, eps)) == -v
    assert abs(v) <= 1.0


@given(st.floats(-10, 10), st.integers(0, 3))
def test_switching_term_opposes_surface(theta, area):
    m = PLANT.areas[area]
    sw = switching_control(theta, m, GAINS)
    # theta . B0 * mu_sw has the opposite sign of theta
    assert m.theta_b * sw * theta <= 0
    assert switching_control(-theta, m, GAINS) == -sw


@given(_state(), _state(), st.integers(0, 3))
def test_plant_is_decentralized_except_through_frequency(x, other, area):
    """Another area's states reach area i only via its frequency on the tie row."""
    u, d = np.zeros(4), np.zeros((4, 3))
    y = other.copy()
    y[area] = x[area]
    y[:, FREQ] = x[:, FREQ]
    np.testing.assert_array_equal(plant_derivative(x, u, d, PLANT)[area],
                                  plant_derivative(y, u, d, PLANT)[area])


@given(_state(), st.integers(0, 3))
def test_controller_sees_only_its_area(x, area):
    """The control of area i is a function of x_i and its own integrals."""
    m = PLANT.areas[area]
    a, _ = gitsmc_step(x[area], ControllerState(), 0.01, m, GAINS)
    b, _ = gitsmc_step(x[area].copy(), ControllerState(), 0.01, m, GAINS)
    assert a == b
    ctl = GitsmcController(m, GAINS)
    assert ctl.step(x[area], 0.01) == a


@given(_state(), arrays(np.float64, 4, elements=st.floats(-1, 1)),
       arrays(np.float64, (4, 3), elements=st.floats(-0.2, 0.2)),
       arrays(np.float64, 6, elements=st.floats(0, 5)))
def test_tie_flows_sum_to_zero(x, u, d, ties):
    T = np.zeros((4, 4))
    T[np.triu_indices(4, 1)] = ties
    topo = TieLineTopology(T + T.T)
    plant = MultiAreaPlant(PLANT.areas, topo)
    dx = plant_derivative(x, u, d, plant)
    assert abs(dx[:, TIE].sum()) <= 1e-12 * max(1.0, np.abs(dx[:, TIE]).max())


@given(arrays(np.float64, (20, 2), elements=st.floats(-1, 1)),
       arrays(np.float64, (20, 2), elements=st.floats(-1, 1)),
       st.floats(0.01, 100))
def test_index_scaling(df, tie, c):
    t = np.linspace(0, 5, 20)
    base = indices_from_arrays(t, df, tie)
    scaled = indices_from_arrays(t, c * df, c * tie)
    for name, power in (("iae", 1), ("itae", 1), ("ise", 2), ("itse", 2)):
        assert math.isclose(getattr(scaled, name), c ** power * getattr(base, name),
                            rel_tol=1e-9, abs_tol=1e-300)
        assert getattr(base, name) >= 0


@given(arrays(np.float64, (20, 2), elements=st.floats(-1, 1)))
def test_identical_reports_show_no_improvement(df):
    r = indices_from_arrays(np.linspace(0, 1, 20), df, np.zeros_like(df))
    comp = compare_controllers(r, r)
    for name in ("itae", "itse", "ise", "iae"):
        assert comp[name].improvement_pct == 0.0


# squares of values below ~1e-162 underflow to zero, so keep clear of them
@given(arrays(np.float64, (30, 3), elements=st.floats(-1e3, 1e3).filter(
    lambda v: v == 0 or abs(v) > 1e-150)))
def test_lyapunov_nonnegative_and_zero_only_on_surface(theta):
    n = len(theta)
    tr = SimTrace(t=np.arange(n) * 0.1, x=np.zeros((n, 3, 7)), mu=np.zeros((n, 3)),
                  theta=theta, disturbance=np.zeros((n, 3, 3)), controller="gitsmc", dt=0.1)
    L = tr.lyapunov
    assert np.all(L >= 0)
    np.testing.assert_array_equal(L == 0, theta == 0)


@given(st.floats(0.1, 5), st.floats(0.1, 3))
def test_decaying_surface_never_violates_reaching(c, rate):
    t = np.linspace(0, 10, 501)
    theta = c * np.exp(-rate * t)
    tr = SimTrace(t=t, x=np.zeros((501, 1, 7)), mu=np.zeros((501, 1)),
                  theta=theta[:, None], disturbance=np.zeros((501, 1, 3)),
                  controller="gitsmc", dt=t[1])
    assert reaching_monitor(tr, delta=1e-6).violations.sum() == 0


@given(st.lists(st.tuples(st.floats(50, 1000), st.floats(0.1, 1), st.floats(1, 20),
                          st.floats(0.01, 0.1)), min_size=1, max_size=5))
def test_aggregated_bias_matches_droop(gens):
    ps = [GeneratorParameters(f"G{k}", s, 0.3, tg, r, h)
          for k, (s, tg, h, r) in enumerate(gens)]
    area = aggregate_area_parameters(ps)
    assert math.isclose(area.beta, area.damping_D + 1.0 / area.droop_R, rel_tol=1e-12)
    rs = [g[3] for g in gens]
    assert min(rs) * (1 - 1e-12) <= area.droop_R <= max(rs) * (1 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(1e-3, 0.02), st.floats(5, 40), alphas)
def test_terminal_subsystem_reaches_band_by_estimate(x0, eps, lam, alpha):
    assume(x0 > 2 * eps)
    tf = finite_time_estimate(x0, eps, lam, alpha)
    assume(tf < 60)
    dt = min(0.01, tf / 200)
    # the fast initial transient needs resolving when lam * x0**(alpha-1) is large
    dt = min(dt, 0.05 / (lam * x0 ** (alpha - 1)))
    f = lambda x: -lam * signed_power(x, alpha)
    x, k = np.array([x0]), 0
    while abs(x[0]) > eps:
        x = rk4_step(f, x, dt)
        k += 1
        assert k * dt <= tf + dt * (1 + 1e-9)
    assert k * dt >= tf - dt * (1 + 1e-9)
