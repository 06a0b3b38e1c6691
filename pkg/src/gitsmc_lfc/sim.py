"""Closed-loop scenario runner and trace monitors."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .control import GitsmcGains, PiGains
from .plant import N_DIST, N_STATES, MultiAreaPlant

CHANNELS = ("load", "pv", "wind")
EDGE_TOL = 1e-9


class DivergenceError(RuntimeError):
    """Integration left the admissible state range."""

    def __init__(self, time: float, area: int, state: int, value: float | None = None):
        self.time, self.area, self.state, self.value = time, area, state, value
        super().__init__(
            f"simulation diverged at t={time:.6g} s: area {area + 1}, state index {state} "
            f"(value {value})")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    level: float

    def __post_init__(self):
        if not self.end > self.start:
            raise ConfigError(f"segment end {self.end} must be after start {self.start}")
        if not math.isfinite(self.level):
            raise ConfigError("segment level must be finite")

    def active(self, t: float) -> bool:
        # half-open [start, end); tolerance absorbs grid rounding at the edges
        return self.start - EDGE_TOL <= t < self.end - EDGE_TOL


@dataclass(frozen=True)
class AreaSchedule:
    load: tuple = ()
    pv: tuple = ()
    wind: tuple = ()

    def __post_init__(self):
        for ch in CHANNELS:
            segs = tuple(sorted(getattr(self, ch), key=lambda s: s.start))
            for a, b in zip(segs, segs[1:]):
                if b.start < a.end - EDGE_TOL:
                    raise ConfigError(f"overlapping {ch} segments {a} and {b}")
            object.__setattr__(self, ch, segs)

    def levels(self, t: float) -> np.ndarray:
        return np.array([sum(s.level for s in getattr(self, ch) if s.active(t))
                         for ch in CHANNELS])


@dataclass(frozen=True)
class DisturbanceSchedule:
    areas: tuple
    noise_std: float = 0.0
    noise_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "areas", tuple(self.areas))
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        if not 0 <= self.noise_seed < 2**64:
            raise ConfigError("noise_seed must be an unsigned 64-bit integer")

    @property
    def n_areas(self) -> int:
        return len(self.areas)

    def edges(self) -> list[float]:
        """Sorted unique times where any piecewise-constant level changes."""
        times = set()
        for a in self.areas:
            for ch in CHANNELS:
                for s in getattr(a, ch):
                    if s.level != 0:
                        times.update((s.start, s.end))
        return sorted(times)

    def noise_stream(self) -> np.random.Generator:
        return np.random.default_rng(self.noise_seed)

    def truncated(self, horizon: float) -> "DisturbanceSchedule":
        """Drop or clip segments so that none extends past ``horizon``."""
        def clip(segs):
            return tuple(Segment(s.start, min(s.end, horizon), s.level) for s in segs
                         if s.start < horizon - EDGE_TOL)
        return DisturbanceSchedule(
            tuple(AreaSchedule(*(clip(getattr(a, ch)) for ch in CHANNELS)) for a in self.areas),
            self.noise_std, self.noise_seed)

    def quiet(self) -> "DisturbanceSchedule":
        return DisturbanceSchedule(self.areas, 0.0, self.noise_seed)


def disturbance_at(schedule: DisturbanceSchedule, t: float,
                   noise_stream: np.random.Generator | None = None) -> np.ndarray:
    """Per-area ``[dP_L, dP_phi, dP_wind]`` at time t.

    One standard-normal draw per channel per call is scaled by ``noise_std``;
    calling this once per step in order reproduces :func:`disturbance_samples`.
    """
    d = np.array([a.levels(t) for a in schedule.areas])
    if schedule.noise_std > 0 and noise_stream is not None:
        d = d + schedule.noise_std * noise_stream.standard_normal(d.shape)
    return d


def disturbance_samples(schedule: DisturbanceSchedule, n_steps: int, dt: float) -> np.ndarray:
    """Held disturbance for each step, shape ``(n_steps, n_areas, 3)``."""
    t = np.arange(n_steps) * dt
    d = np.zeros((n_steps, schedule.n_areas, N_DIST))
    for i, a in enumerate(schedule.areas):
        for c, ch in enumerate(CHANNELS):
            for s in getattr(a, ch):
                mask = (t >= s.start - EDGE_TOL) & (t < s.end - EDGE_TOL)
                d[mask, i, c] += s.level
    if schedule.noise_std > 0:
        d += schedule.noise_std * schedule.noise_stream().standard_normal(d.shape)
    return d


@dataclass(frozen=True)
class MonitorThresholds:
    reaching_delta: float | None = None    # default 10 * boundary_eps
    exclusion_window_s: float = 0.5
    zeta: float | None = None              # Assumption-1 bound on ||sigma||


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    plant: MultiAreaPlant
    schedule: DisturbanceSchedule
    horizon_s: float = 400.0
    dt_s: float = 0.005
    controller: str = "gitsmc"             # "gitsmc" | "pi" | "none"
    gitsmc_gains: tuple = ()
    pi_gains: tuple = ()
    betas: tuple = ()
    control_period_s: float = 0.0          # 0 = evaluated inside every RK4 stage
    initial_state: np.ndarray | None = None
    monitors: MonitorThresholds = field(default_factory=MonitorThresholds)
    state_limit: float = 1e3

    def __post_init__(self):
        self.validate()

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.horizon_s / self.dt_s + 1e-9))

    @property
    def control_every(self) -> int:
        if self.control_period_s == 0:
            return 0
        return max(1, int(round(self.control_period_s / self.dt_s)))

    def validate(self):
        n = self.plant.n_areas
        if not self.dt_s > 0:
            raise ConfigError(f"dt_s must be positive, got {self.dt_s}")
        if not self.horizon_s >= self.dt_s:
            raise ConfigError("horizon_s must be at least dt_s")
        if self.schedule.n_areas != n:
            raise ConfigError(f"schedule has {self.schedule.n_areas} areas, plant has {n}")
        if self.controller not in ("gitsmc", "pi", "none"):
            raise ConfigError(f"unknown controller {self.controller!r}")
        if self.controller == "gitsmc":
            if len(self.gitsmc_gains) != n or not all(
                    isinstance(g, GitsmcGains) for g in self.gitsmc_gains):
                raise ConfigError(f"need {n} GitsmcGains")
        if self.controller == "pi":
            if len(self.pi_gains) != n or not all(isinstance(g, PiGains) for g in self.pi_gains):
                raise ConfigError(f"need {n} PiGains")
            if len(self.betas) != n:
                raise ConfigError(f"need {n} frequency-bias values for the PI controller")
        if self.control_period_s < 0:
            raise ConfigError("control_period_s must be non-negative")
        if self.initial_state is not None and np.shape(self.initial_state) != (n, N_STATES):
            raise ConfigError(f"initial_state must have shape ({n}, {N_STATES})")
        for a in self.schedule.areas:
            for ch in CHANNELS:
                for s in getattr(a, ch):
                    if s.start < -EDGE_TOL or s.end > self.horizon_s + EDGE_TOL:
                        raise ConfigError(f"{ch} segment {s} outside [0, {self.horizon_s}]")

    def with_horizon(self, horizon_s: float) -> "ScenarioConfig":
        """Same scenario over a different horizon, clipping the schedule."""
        return self.with_(horizon_s=horizon_s, schedule=self.schedule.truncated(horizon_s))

    def with_(self, **changes) -> "ScenarioConfig":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass
class SimTrace:
    t: np.ndarray             # (N,)
    x: np.ndarray             # (N, areas, 7)
    mu: np.ndarray            # (N, areas)
    theta: np.ndarray         # (N, areas)
    disturbance: np.ndarray   # (N, areas, 3)
    controller: str
    dt: float
    edges: tuple = ()

    @property
    def lyapunov(self) -> np.ndarray:
        return 0.5 * self.theta ** 2

    @property
    def n_areas(self) -> int:
        return self.x.shape[1]

    @property
    def df(self) -> np.ndarray:
        return self.x[:, :, 1]

    @property
    def dp_tie(self) -> np.ndarray:
        return self.x[:, :, 0]


def rk4_step(f: Callable, x, dt: float, *inputs, t: float = 0.0):
    """One classical RK4 step of ``x' = f(x, *inputs)`` with inputs held.

    Raises :class:`DivergenceError` when a stage derivative is not finite.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)

    def g(y):
        dy = np.asarray(f(y, *inputs), dtype=float)
        if not np.all(np.isfinite(dy)):
            idx = int(np.flatnonzero(~np.isfinite(dy).ravel())[0])
            area, state = divmod(idx, N_STATES) if dy.ndim == 2 else (0, idx)
            raise DivergenceError(t, area, state, float(dy.ravel()[idx]))
        return dy

    k1 = g(x)
    k2 = g(x + 0.5 * dt * k1)
    k3 = g(x + 0.5 * dt * k2)
    k4 = g(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _law_arrays(config: ScenarioConfig):
    n = config.plant.n_areas
    theta = config.plant.theta
    if config.controller == "gitsmc":
        params = np.array([[g.lambda1, g.lambda2, g.alpha, g.eta1, g.eta2, g.boundary_eps,
                            g.mu_max or 0.0, 0.0] for g in config.gitsmc_gains])
        return kernels.KIND_GITSMC, theta, params
    if config.controller == "pi":
        params = np.array([[g.kp, g.ki, b, g.integral_limit or 0.0, 0.0, 0.0, 0.0, 0.0]
                           for g, b in zip(config.pi_gains, config.betas)])
        return kernels.KIND_PI, theta, params
    return kernels.KIND_NONE, theta, np.zeros((n, 8))


def run_scenario(config: ScenarioConfig, backend: str | None = None) -> SimTrace:
    """Integrate the closed loop over the horizon; deterministic given the seed."""
    config.validate()
    n_steps = config.n_steps
    dt = config.dt_s
    plant = config.plant
    dist = disturbance_samples(config.schedule, n_steps, dt)
    x0 = (np.zeros((plant.n_areas, N_STATES)) if config.initial_state is None
          else np.array(config.initial_state, dtype=float))
    kind, theta, params = _law_arrays(config)
    simulate = kernels.get_simulate(backend)
    X, MU, TH, fail_step, fail_index = simulate(
        plant.A0, plant.B0, plant.psi0, plant.topology.coefficients, dist, dt, x0,
        kind, theta, params, config.control_every, config.state_limit)
    if fail_step >= 0:
        area, state = divmod(fail_index, N_STATES)
        raise DivergenceError((fail_step + 1) * dt, area, state,
                              float(X[fail_step + 1, area, state]))
    t = np.arange(n_steps + 1) * dt
    d_last = disturbance_at(config.schedule.quiet(), n_steps * dt)
    disturbance = np.concatenate([dist, d_last[None]], axis=0)
    edges = tuple(e for e in config.schedule.edges() if 0 <= e < config.horizon_s)
    return SimTrace(t, X, MU, TH, disturbance, config.controller, dt, edges)


@dataclass(frozen=True)
class ReachingReport:
    delta: float
    exclusion_window_s: float
    violations: np.ndarray      # per area, count
    eligible: np.ndarray        # per area, samples with |theta| > delta outside exclusions
    samples: int                # samples considered (outside exclusions)

    @property
    def fraction(self) -> np.ndarray:
        """Violations as a fraction of all non-excluded samples, per area."""
        return self.violations / max(self.samples, 1)


def _exclusion_mask(t: np.ndarray, edges: Sequence[float], window: float) -> np.ndarray:
    mask = np.zeros(t.shape, dtype=bool)
    for e in edges:
        mask |= (t >= e - EDGE_TOL) & (t <= e + window + EDGE_TOL)
    return mask


def reaching_monitor(trace: SimTrace, delta: float, exclusion_window_s: float = 0.5,
                     edges: Sequence[float] | None = None) -> ReachingReport:
    """Count samples violating theta * dtheta/dt < 0 off the boundary layer."""
    if len(trace.t) < 2:
        raise ValueError("trace needs at least two samples")
    edges = trace.edges if edges is None else edges
    th = trace.theta
    dth = np.gradient(th, trace.t, axis=0)
    keep = ~_exclusion_mask(trace.t, edges, exclusion_window_s)
    off_layer = (np.abs(th) > delta) & keep[:, None]
    bad = off_layer & (th * dth >= 0)
    return ReachingReport(delta, exclusion_window_s, bad.sum(axis=0), off_layer.sum(axis=0),
                          int(keep.sum()))


@dataclass(frozen=True)
class UncertaintyTrace:
    sigma: np.ndarray          # (N, areas, 7)
    max_norm: np.ndarray       # per area
    running_max: np.ndarray    # (N, areas)
    zeta: float | None

    @property
    def bound_holds(self) -> np.ndarray | None:
        if self.zeta is None:
            return None
        return self.max_norm <= self.zeta


def residual_uncertainty(trace: SimTrace, plant: MultiAreaPlant,
                         zeta: float | None = None) -> UncertaintyTrace:
    """Reconstruct ``sigma = x' - A0 x - B0 mu`` with central differences."""
    xdot = np.gradient(trace.x, trace.t, axis=0)
    nominal = np.einsum("ajk,nak->naj", plant.A0, trace.x) + trace.mu[:, :, None] * plant.B0
    sigma = xdot - nominal
    norms = np.linalg.norm(sigma, axis=2)
    return UncertaintyTrace(sigma, norms.max(axis=0), np.maximum.accumulate(norms, axis=0), zeta)


def finite_time_estimate(x0_mag: float, eps: float, lam: float, alpha: float) -> float:
    """Time for ``x' = -lam * sign(x)|x|**alpha`` to shrink from x0_mag to eps."""
    if not eps > 0:
        raise ValueError("eps must be positive: the terminal term alone never reaches zero")
    if not alpha > 1:
        raise ValueError("alpha must exceed 1")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if x0_mag < eps:
        raise ValueError("x0_mag must be at least eps")
    return (eps ** (1 - alpha) - x0_mag ** (1 - alpha)) / (lam * (alpha - 1))
