"""Decentralized GITSMC law and the PI baseline.

Both controllers act on a single area: they see only that area's 7-state
vector and their own integrator state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .plant import FREQ, N_STATES, TIE, PlantMatrices, SingularSurfaceError


@dataclass(frozen=True)
class GitsmcGains:
    lambda1: float = 24.0
    lambda2: float = 24.0
    alpha: float = 1.7
    eta1: float = 2.0
    eta2: float = 0.5
    boundary_eps: float = 1e-3
    mu_max: float | None = None

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must satisfy 1 < alpha < 2, got {self.alpha}")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be non-negative")
        if not (self.eta1 > 0 and self.eta2 > 0):
            raise ValueError("eta1 and eta2 must be positive")
        if self.boundary_eps < 0:
            raise ValueError("boundary_eps must be non-negative")
        if self.mu_max is not None and not self.mu_max > 0:
            raise ValueError("mu_max must be positive when given")


@dataclass(frozen=True)
class PiGains:
    kp: float
    ki: float
    integral_limit: float | None = None  # bound on |ki * integral|

    def __post_init__(self):
        if self.integral_limit is not None and not self.integral_limit > 0:
            raise ValueError("integral_limit must be positive when given")


@dataclass(frozen=True)
class ControllerState:
    integral_x: np.ndarray = field(default_factory=lambda: np.zeros(N_STATES))
    integral_xalpha: np.ndarray = field(default_factory=lambda: np.zeros(N_STATES))
    pi_integral: float = 0.0


class ControlSignal(NamedTuple):
    mu: float
    mu_eq: float
    mu_sw: float
    theta: float


def signed_power(x, alpha):
    """Elementwise ``sign(x) * |x|**alpha``; real-valued for negative x."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** alpha


def saturate(s, eps: float):
    """Boundary-layer sign: ``s/eps`` inside ``|s| <= eps``, ``sign(s)`` outside."""
    s = np.asarray(s, dtype=float)
    if eps == 0:
        return np.sign(s)
    return np.sign(s) * (np.minimum(np.abs(s), eps) / eps)


def _theta_b(model: PlantMatrices) -> float:
    tb = model.theta_b
    if tb == 0.0:
        raise SingularSurfaceError("theta . B0 = 0")
    return tb


def sliding_surface(x, cs: ControllerState, theta_row, gains: GitsmcGains) -> float:
    theta_row = np.asarray(theta_row, dtype=float)
    return float(theta_row @ np.asarray(x, dtype=float)
                 + gains.lambda1 * (theta_row @ cs.integral_x)
                 + gains.lambda2 * (theta_row @ cs.integral_xalpha))


def equivalent_control(x, cs: ControllerState, model: PlantMatrices, gains: GitsmcGains) -> float:
    """Nominal control holding the surface still.

    The lumped perturbation is unmeasurable online and is left to the
    reaching law.  ``cs`` is unused and kept for call symmetry.
    """
    x = np.asarray(x, dtype=float)
    th = model.theta
    tb = _theta_b(model)
    return float(-(th @ model.A0 @ x + gains.lambda1 * (th @ x)
                   + gains.lambda2 * (th @ signed_power(x, gains.alpha))) / tb)


def switching_control(theta: float, model: PlantMatrices, gains: GitsmcGains) -> float:
    tb = _theta_b(model)
    return float(-(gains.eta1 * theta + gains.eta2 * saturate(theta, gains.boundary_eps)) / tb)


def _limit(mu: float, mu_max: float | None) -> float:
    if mu_max is None:
        return mu
    return min(max(mu, -mu_max), mu_max)


def gitsmc_step(x, cs: ControllerState, dt: float, model: PlantMatrices, gains: GitsmcGains):
    """Advance the surface integrals by one rectangle step and evaluate the law.

    Returns ``(ControlSignal, new_state)``; ``cs`` is not modified.  With a
    control limit the equivalent part is reported unclipped and the
    switching part absorbs the clipping, so ``mu == mu_eq + mu_sw`` holds.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    new = replace(cs, integral_x=cs.integral_x + x * dt,
                  integral_xalpha=cs.integral_xalpha + signed_power(x, gains.alpha) * dt)
    theta = sliding_surface(x, new, model.theta, gains)
    mu_eq = equivalent_control(x, new, model, gains)
    mu_sw = switching_control(theta, model, gains)
    mu = mu_eq + mu_sw
    limited = _limit(mu, gains.mu_max)
    if limited != mu:
        mu_sw = limited - mu_eq
        mu = mu_eq + mu_sw
    return ControlSignal(mu, mu_eq, mu_sw, theta), new


def area_control_error(delta_f: float, delta_p_tie: float, beta: float) -> float:
    return beta * delta_f + delta_p_tie


def pi_step(delta_f: float, delta_p_tie: float, beta: float, gains: PiGains,
            cs: ControllerState, dt: float):
    """PI on the area control error; returns ``(mu, new_state)``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    ace = area_control_error(delta_f, delta_p_tie, beta)
    integral = cs.pi_integral + ace * dt
    if gains.integral_limit is not None and gains.ki != 0:
        bound = gains.integral_limit / abs(gains.ki)
        integral = min(max(integral, -bound), bound)
    mu = -(gains.kp * ace + gains.ki * integral)
    return mu, replace(cs, pi_integral=integral)


class GitsmcController:
    """Stateful per-area wrapper around :func:`gitsmc_step`."""

    kind = "gitsmc"

    def __init__(self, model: PlantMatrices, gains: GitsmcGains):
        _theta_b(model)
        self.model = model
        self.gains = gains
        self.state = ControllerState()

    def reset(self):
        self.state = ControllerState()

    def step(self, x, dt: float) -> ControlSignal:
        signal, self.state = gitsmc_step(x, self.state, dt, self.model, self.gains)
        return signal


class PiController:
    kind = "pi"

    def __init__(self, beta: float, gains: PiGains):
        self.beta = beta
        self.gains = gains
        self.state = ControllerState()

    def reset(self):
        self.state = ControllerState()

    def step(self, x, dt: float) -> ControlSignal:
        mu, self.state = pi_step(x[FREQ], x[TIE], self.beta, self.gains, self.state, dt)
        return ControlSignal(mu, 0.0, mu, 0.0)


def finite_reaching_gain(gains: GitsmcGains) -> float:
    """Largest decay rate of the surface inside the boundary layer, 1/s."""
    if gains.boundary_eps == 0:
        return math.inf
    return gains.eta1 + gains.eta2 / gains.boundary_eps
