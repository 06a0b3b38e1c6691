# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled closed-loop integrator; contract documented in ``_fallback``."""
import numpy as np

from libc.math cimport fabs, pow, M_PI, INFINITY, isfinite

cdef enum:
    NS = 7


cdef inline double _sign(double v) nogil:
    if v > 0:
        return 1.0
    if v < 0:
        return -1.0
    return 0.0


cdef inline double _sp(double v, double a) nogil:
    if v == 0:
        return 0.0
    if v > 0:
        return pow(v, a)
    return -pow(-v, a)


cdef inline double _clip(double v, double lim) nogil:
    if v > lim:
        return lim
    if v < -lim:
        return -lim
    return v


cdef class _Ctx:
    cdef int n, kind
    cdef double[:, :, ::1] A0
    cdef double[:, ::1] B0
    cdef double[:, :, ::1] psi
    cdef double[:, ::1] tie
    cdef double[::1] tsum
    cdef double[:, ::1] theta
    cdef double[:, ::1] thA
    cdef double[::1] tb
    cdef double[:, ::1] p
    cdef double[::1] mu_max
    cdef double[::1] ibound

    cdef void plant(self, double[:, ::1] x, double[::1] mu, double[:, ::1] d,
                    double[:, ::1] out) nogil:
        cdef int i, j, r, c
        cdef double acc, f
        for i in range(self.n):
            for r in range(NS):
                acc = self.B0[i, r] * mu[i]
                for c in range(3):
                    acc = acc + self.psi[i, r, c] * d[i, c]
                if r == 0:
                    f = x[i, 1]
                    acc = acc + 2.0 * M_PI * self.tsum[i] * f
                    for j in range(self.n):
                        acc = acc - 2.0 * M_PI * self.tie[i, j] * x[j, 1]
                else:
                    for c in range(NS):
                        acc = acc + self.A0[i, r, c] * x[i, c]
                out[i, r] = acc

    cdef double surface(self, int i, double[:, ::1] x, double[:, ::1] z) nogil:
        cdef int c
        cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0
        for c in range(NS):
            s0 = s0 + self.theta[i, c] * x[i, c]
            s1 = s1 + self.theta[i, c] * z[i, c]
            s2 = s2 + self.theta[i, c] * z[i, NS + c]
        return s0 + self.p[i, 0] * s1 + self.p[i, 1] * s2

    cdef double gitsmc(self, int i, double[:, ::1] x, double th_s) nogil:
        cdef int c
        cdef double a = 0.0, b = 0.0, e = 0.0, sat, eps, mu
        cdef double alpha = self.p[i, 2]
        for c in range(NS):
            a = a + self.thA[i, c] * x[i, c]
            b = b + self.theta[i, c] * x[i, c]
            e = e + self.theta[i, c] * _sp(x[i, c], alpha)
        eps = self.p[i, 5]
        if eps == 0 or fabs(th_s) > eps:
            sat = _sign(th_s)
        else:
            sat = th_s / eps
        mu = -(a + self.p[i, 0] * b + self.p[i, 1] * e) / self.tb[i]
        mu = mu - (self.p[i, 3] * th_s + self.p[i, 4] * sat) / self.tb[i]
        return _clip(mu, self.mu_max[i])

    cdef inline double ace(self, int i, double[:, ::1] x) nogil:
        return self.p[i, 2] * x[i, 1] + x[i, 0]

    cdef void continuous(self, double[:, ::1] x, double[:, ::1] z, double[::1] mu,
                         double[:, ::1] rate, double[::1] th) nogil:
        cdef int i, c
        cdef double s, a, zi
        for i in range(self.n):
            if self.kind == 1:
                s = self.surface(i, x, z)
                th[i] = s
                mu[i] = self.gitsmc(i, x, s)
                for c in range(NS):
                    rate[i, c] = x[i, c]
                    rate[i, NS + c] = _sp(x[i, c], self.p[i, 2])
            elif self.kind == 2:
                th[i] = 0.0
                a = self.ace(i, x)
                zi = z[i, 0]
                mu[i] = _clip(-(self.p[i, 0] * a + self.p[i, 1] * zi), self.mu_max[i])
                if fabs(zi) >= self.ibound[i] and _sign(a) == _sign(zi):
                    rate[i, 0] = 0.0
                else:
                    rate[i, 0] = a
            else:
                th[i] = 0.0
                mu[i] = 0.0

    cdef void sampled(self, double[:, ::1] x, double[:, ::1] z, double h, double[::1] mu,
                      double[::1] th) nogil:
        cdef int i, c
        cdef double s, a, zi
        for i in range(self.n):
            if self.kind == 1:
                for c in range(NS):
                    z[i, NS + c] = z[i, NS + c] + h * _sp(x[i, c], self.p[i, 2])
                    z[i, c] = z[i, c] + h * x[i, c]
                s = self.surface(i, x, z)
                th[i] = s
                mu[i] = self.gitsmc(i, x, s)
            elif self.kind == 2:
                th[i] = 0.0
                a = self.ace(i, x)
                zi = _clip(z[i, 0] + h * a, self.ibound[i])
                z[i, 0] = zi
                mu[i] = _clip(-(self.p[i, 0] * a + self.p[i, 1] * zi), self.mu_max[i])
            else:
                th[i] = 0.0
                mu[i] = 0.0


def simulate(A0, B0, psi, tie, dist, double dt, x0, int kind, theta, params,
             int control_every, double state_limit=1e3):
    cdef _Ctx ctx = _Ctx()
    A0 = np.array(A0, dtype=np.float64, order="C")
    B0 = np.array(B0, dtype=np.float64, order="C")
    theta = np.array(theta, dtype=np.float64, order="C")
    params = np.array(params, dtype=np.float64, order="C")
    tie = np.array(tie, dtype=np.float64, order="C")
    cdef double[:, :, ::1] D = np.array(dist, dtype=np.float64, order="C")
    cdef int n_steps = D.shape[0]
    cdef int n = D.shape[1]
    ctx.n = n
    ctx.kind = kind
    ctx.A0 = A0
    ctx.B0 = B0
    ctx.psi = np.array(psi, dtype=np.float64, order="C")
    ctx.tie = tie
    ctx.tsum = np.ascontiguousarray(tie.sum(axis=1))
    ctx.theta = theta
    ctx.thA = np.ascontiguousarray(np.einsum("ij,ijk->ik", theta, A0))
    ctx.tb = np.ascontiguousarray(np.einsum("ij,ij->i", theta, B0))
    ctx.p = params
    if kind == 1:
        ctx.mu_max = np.where(params[:, 6] > 0, params[:, 6], np.inf)
        ctx.ibound = np.full(n, np.inf)
    elif kind == 2:
        ctx.mu_max = np.where(params[:, 4] > 0, params[:, 4], np.inf)
        ki = np.abs(params[:, 1])
        with np.errstate(divide="ignore"):
            ctx.ibound = np.where((params[:, 3] > 0) & (ki != 0), params[:, 3] / ki, np.inf)
    else:
        ctx.mu_max = np.full(n, np.inf)
        ctx.ibound = np.full(n, np.inf)

    X_np = np.zeros((n_steps + 1, n, NS))
    MU_np = np.zeros((n_steps + 1, n))
    TH_np = np.zeros((n_steps + 1, n))
    cdef double[:, :, ::1] X = X_np
    cdef double[:, ::1] MU = MU_np
    cdef double[:, ::1] TH = TH_np

    cdef int nz = 14 if kind == 1 else (1 if kind == 2 else 0)
    cdef int nzc = nz if nz > 0 else 1
    cdef double[:, ::1] x = np.array(x0, dtype=np.float64, order="C")
    cdef double[:, ::1] xs = np.zeros((n, NS))
    cdef double[:, ::1] z = np.zeros((n, nzc))
    cdef double[:, ::1] zs = np.zeros((n, nzc))
    cdef double[:, :, ::1] K = np.zeros((4, n, NS))
    cdef double[:, :, ::1] R = np.zeros((4, n, nzc))
    cdef double[::1] mu = np.zeros(n)
    cdef double[::1] th = np.zeros(n)
    cdef double[::1] th_tmp = np.zeros(n)
    cdef double[:, ::1] dk
    cdef int k, i, c, s, fail_step = -1, fail_index = -1
    cdef double h2 = 0.5 * dt, v
    cdef double coef[4]
    coef[0] = 0.0
    coef[1] = 0.5 * dt
    coef[2] = 0.5 * dt
    coef[3] = dt

    X[0, :, :] = x
    with nogil:
        for k in range(n_steps):
            dk = D[k]
            if control_every == 0:
                for s in range(4):
                    if s == 0:
                        ctx.continuous(x, z, mu, R[0], th)
                        ctx.plant(x, mu, dk, K[0])
                        for i in range(n):
                            MU[k, i] = mu[i]
                            TH[k, i] = th[i]
                    else:
                        for i in range(n):
                            for c in range(NS):
                                xs[i, c] = x[i, c] + coef[s] * K[s - 1, i, c]
                            for c in range(nz):
                                zs[i, c] = z[i, c] + coef[s] * R[s - 1, i, c]
                        ctx.continuous(xs, zs, mu, R[s], th_tmp)
                        ctx.plant(xs, mu, dk, K[s])
                for i in range(n):
                    for c in range(NS):
                        x[i, c] = x[i, c] + dt / 6.0 * (
                            K[0, i, c] + 2.0 * K[1, i, c] + 2.0 * K[2, i, c] + K[3, i, c])
                    for c in range(nz):
                        z[i, c] = z[i, c] + dt / 6.0 * (
                            R[0, i, c] + 2.0 * R[1, i, c] + 2.0 * R[2, i, c] + R[3, i, c])
            else:
                if k % control_every == 0:
                    ctx.sampled(x, z, control_every * dt, mu, th)
                for i in range(n):
                    MU[k, i] = mu[i]
                    TH[k, i] = th[i]
                ctx.plant(x, mu, dk, K[0])
                for s in range(1, 4):
                    for i in range(n):
                        for c in range(NS):
                            xs[i, c] = x[i, c] + coef[s] * K[s - 1, i, c]
                    ctx.plant(xs, mu, dk, K[s])
                for i in range(n):
                    for c in range(NS):
                        x[i, c] = x[i, c] + dt / 6.0 * (
                            K[0, i, c] + 2.0 * K[1, i, c] + 2.0 * K[2, i, c] + K[3, i, c])
            for i in range(n):
                for c in range(NS):
                    v = x[i, c]
                    X[k + 1, i, c] = v
                    if fail_step < 0 and not (fabs(v) <= state_limit):
                        fail_step = k
                        fail_index = i * NS + c
            if fail_step >= 0:
                break

        if fail_step < 0:
            if control_every == 0:
                ctx.continuous(x, z, mu, R[0], th)
                for i in range(n):
                    MU[n_steps, i] = mu[i]
                    TH[n_steps, i] = th[i]
            else:
                for i in range(n):
                    MU[n_steps, i] = mu[i]
                    TH[n_steps, i] = ctx.surface(i, x, z) if kind == 1 else 0.0

    return X_np, MU_np, TH_np, fail_step, fail_index
