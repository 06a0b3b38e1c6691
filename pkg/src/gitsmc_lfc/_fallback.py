"""Pure numpy closed-loop integrator; same contract as the compiled ``_kernels``.

``simulate`` integrates the coupled plant with classical RK4.  The
disturbance row for step k is held over ``[t_k, t_k + dt)``.

``control_every == 0`` (quasi-continuous): the controller integrators are
appended to the ODE state and the law is re-evaluated at every RK4 stage.
``control_every == m > 0``: the controller is sampled every m steps with
rectangle-rule integrators and its output held in between.

Returns ``(x, mu, theta, fail_step, fail_index)``.  ``fail_step`` is -1 on
success; otherwise integration stopped after that step because the state left
``[-state_limit, state_limit]`` or went non-finite at flat index
``fail_index`` (area * 7 + state).
"""
import math

import numpy as np

KIND_NONE = 0
KIND_GITSMC = 1
KIND_PI = 2

# params columns
LAM1, LAM2, ALPHA, ETA1, ETA2, EPS, MU_MAX = range(7)
KP, KI, BETA, INT_BOUND = range(4)
PI_MU_MAX = 4


def _sp(x, a):
    return np.sign(x) * np.abs(x) ** a


class _Law:
    def __init__(self, A0, B0, kind, theta, params):
        self.kind = kind
        self.p = params
        if kind == KIND_GITSMC:
            self.theta = theta
            self.tb = np.einsum("ij,ij->i", theta, B0)
            self.thA = np.einsum("ij,ijk->ik", theta, A0)
            self.mu_max = np.where(params[:, MU_MAX] > 0, params[:, MU_MAX], np.inf)
        elif kind == KIND_PI:
            ki = params[:, KI]
            with np.errstate(divide="ignore"):
                self.ibound = np.where((params[:, INT_BOUND] > 0) & (ki != 0),
                                       params[:, INT_BOUND] / np.abs(ki), np.inf)
            self.mu_max = np.where(params[:, PI_MU_MAX] > 0, params[:, PI_MU_MAX], np.inf)

    def nz(self):
        return {KIND_NONE: 0, KIND_GITSMC: 14, KIND_PI: 1}[self.kind]

    def surface(self, x, z):
        p = self.p
        return (np.einsum("ij,ij->i", self.theta, x)
                + p[:, LAM1] * np.einsum("ij,ij->i", self.theta, z[:, :7])
                + p[:, LAM2] * np.einsum("ij,ij->i", self.theta, z[:, 7:]))

    def gitsmc(self, x, xa, th_s):
        p = self.p
        th = self.theta
        mu_eq = -(np.einsum("ij,ij->i", self.thA, x)
                  + p[:, LAM1] * np.einsum("ij,ij->i", th, x)
                  + p[:, LAM2] * np.einsum("ij,ij->i", th, xa)) / self.tb
        eps = p[:, EPS]
        with np.errstate(divide="ignore", invalid="ignore"):
            sat = np.where((np.abs(th_s) > eps) | (eps == 0), np.sign(th_s), th_s / eps)
        mu_sw = -(p[:, ETA1] * th_s + p[:, ETA2] * sat) / self.tb
        return np.clip(mu_eq + mu_sw, -self.mu_max, self.mu_max)

    def ace(self, x):
        return self.p[:, BETA] * x[:, 1] + x[:, 0]

    def pi(self, x, zi):
        p = self.p
        return np.clip(-(p[:, KP] * self.ace(x) + p[:, KI] * zi), -self.mu_max, self.mu_max)

    def continuous(self, x, z):
        """(mu, dz/dt, theta) at an augmented state."""
        n = x.shape[0]
        if self.kind == KIND_GITSMC:
            xa = _sp(x, self.p[:, ALPHA][:, None])
            th_s = self.surface(x, z)
            return self.gitsmc(x, xa, th_s), np.concatenate([x, xa], axis=1), th_s
        if self.kind == KIND_PI:
            ace = self.ace(x)
            zi = z[:, 0]
            held = (np.abs(zi) >= self.ibound) & (np.sign(ace) == np.sign(zi))
            rate = np.where(held, 0.0, ace)
            return self.pi(x, zi), rate[:, None], np.zeros(n)
        return np.zeros(n), np.zeros((n, 0)), np.zeros(n)

    def sampled(self, x, z, h):
        """Advance the integrators by a rectangle step of length h, then evaluate."""
        n = x.shape[0]
        if self.kind == KIND_GITSMC:
            xa = _sp(x, self.p[:, ALPHA][:, None])
            z = z + h * np.concatenate([x, xa], axis=1)
            th_s = self.surface(x, z)
            return self.gitsmc(x, xa, th_s), z, th_s
        if self.kind == KIND_PI:
            zi = np.clip(z[:, 0] + h * self.ace(x), -self.ibound, self.ibound)
            z = zi[:, None]
            return self.pi(x, zi), z, np.zeros(n)
        return np.zeros(n), z, np.zeros(n)


def _plant(x, mu, d, A0, B0, psi, tie, tsum):
    dx = np.einsum("ijk,ik->ij", A0, x) + B0 * mu[:, None] + np.einsum("ijk,ik->ij", psi, d)
    f = x[:, 1]
    dx[:, 0] = (2.0 * math.pi * (tsum * f - tie @ f) + B0[:, 0] * mu
                + np.einsum("ik,ik->i", psi[:, 0], d))
    return dx


def simulate(A0, B0, psi, tie, dist, dt, x0, kind, theta, params, control_every,
             state_limit=1e3):
    A0 = np.ascontiguousarray(A0, dtype=float)
    B0 = np.ascontiguousarray(B0, dtype=float)
    psi = np.ascontiguousarray(psi, dtype=float)
    tie = np.ascontiguousarray(tie, dtype=float)
    dist = np.ascontiguousarray(dist, dtype=float)
    params = np.ascontiguousarray(params, dtype=float)
    theta = np.ascontiguousarray(theta, dtype=float)
    n_steps, n = dist.shape[0], dist.shape[1]
    tsum = tie.sum(axis=1)
    law = _Law(A0, B0, kind, theta, params)

    X = np.zeros((n_steps + 1, n, 7))
    MU = np.zeros((n_steps + 1, n))
    TH = np.zeros((n_steps + 1, n))
    x = np.array(x0, dtype=float)
    z = np.zeros((n, law.nz()))
    X[0] = x

    def f(xs, d, mu):
        return _plant(xs, mu, d, A0, B0, psi, tie, tsum)

    mu = np.zeros(n)
    fail_step, fail_index = -1, -1
    for k in range(n_steps):
        d = dist[k]
        if control_every == 0:
            mu, r1, th_s = law.continuous(x, z)
            MU[k], TH[k] = mu, th_s
            k1 = f(x, d, mu)
            xs, zs = x + 0.5 * dt * k1, z + 0.5 * dt * r1
            mu2, r2, _ = law.continuous(xs, zs)
            k2 = f(xs, d, mu2)
            xs, zs = x + 0.5 * dt * k2, z + 0.5 * dt * r2
            mu3, r3, _ = law.continuous(xs, zs)
            k3 = f(xs, d, mu3)
            xs, zs = x + dt * k3, z + dt * r3
            mu4, r4, _ = law.continuous(xs, zs)
            k4 = f(xs, d, mu4)
            x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            z = z + dt / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4)
        else:
            if k % control_every == 0:
                mu, z, th_s = law.sampled(x, z, control_every * dt)
            MU[k] = mu
            TH[k] = th_s
            k1 = f(x, d, mu)
            k2 = f(x + 0.5 * dt * k1, d, mu)
            k3 = f(x + 0.5 * dt * k2, d, mu)
            k4 = f(x + dt * k3, d, mu)
            x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        X[k + 1] = x
        bad = ~(np.abs(x) <= state_limit)
        if bad.any():
            fail_step, fail_index = k, int(np.flatnonzero(bad.ravel())[0])
            break

    if fail_step < 0:
        if control_every == 0:
            mu, _, th_s = law.continuous(x, z)
            MU[n_steps], TH[n_steps] = mu, th_s
        else:
            MU[n_steps] = mu
            TH[n_steps] = law.surface(x, z) if kind == KIND_GITSMC else 0.0
    return X, MU, TH, fail_step, fail_index
