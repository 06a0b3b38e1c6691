"""Per-area load frequency control plant and coupled multi-area dynamics.

Each area carries seven deviation states, in this order::

    [dP_tie, df, dP_m, dE, dP_g, dP_pv, dP_wt]

and three disturbance channels ``[dP_L, dP_phi, dP_wind]`` (load, solar
irradiance input, wind input).  Everything is per-unit on the area base.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

N_STATES = 7
N_DIST = 3

STATE_NAMES = ("dP_tie", "df", "dP_m", "dE", "dP_g", "dP_pv", "dP_wt")
DIST_NAMES = ("dP_L", "dP_phi", "dP_wind")

# state indices
TIE, FREQ, MECH, ACE_INT, GOV, PV, WT = range(N_STATES)


class ModelError(ValueError):
    """Invalid plant parameters or inconsistent model dimensions."""


class SingularSurfaceError(ModelError):
    """theta . B0 vanishes, so the equivalent control is undefined."""


@dataclass(frozen=True)
class GeneratorParameters:
    name: str
    rating_mva: float
    turbine_time_T_t: float
    governor_time_T_g: float
    droop_R: float
    inertia_H: float
    damping_D: float = 1.0

    def __post_init__(self):
        for attr in ("rating_mva", "turbine_time_T_t", "governor_time_T_g",
                     "droop_R", "inertia_H", "damping_D"):
            v = getattr(self, attr)
            if not (v > 0 and math.isfinite(v)):
                raise ModelError(f"generator {self.name!r}: {attr} must be positive, got {v}")


@dataclass(frozen=True)
class AreaParameters:
    """Equivalent constants of one control area.

    The frequency bias is not stored; it is always ``D + 1/R`` so the two can
    never disagree.
    """

    inertia_H: float
    damping_D: float
    droop_R: float
    turbine_T_t: float
    governor_T_g: float
    turbine_gain_K_t: float = 1.0
    governor_gain_K_g: float = 1.0
    integral_gain_K_E: float = 5.0
    pv_T: float = 1.8
    pv_K: float = 1.0
    wt_T: float = 1.5
    wt_K: float = 1.0

    def __post_init__(self):
        for attr in ("inertia_H", "droop_R", "turbine_T_t", "governor_T_g", "pv_T", "wt_T"):
            v = getattr(self, attr)
            if not (v > 0 and math.isfinite(v)):
                raise ModelError(f"{attr} must be positive, got {v}")
        if not self.damping_D >= 0:
            raise ModelError(f"damping_D must be non-negative, got {self.damping_D}")

    @property
    def beta(self) -> float:
        return self.damping_D + 1.0 / self.droop_R


def aggregate_area_parameters(
    generators: Sequence[GeneratorParameters], D_eqv: float = 1.0, **extra
) -> AreaParameters:
    """Collapse the generators of one area into equivalent area constants.

    Turbine and governor time constants are arithmetic means.  Inertia is the
    rating-weighted mean.  Droop is combined as parallel regulation,
    ``1/R = sum(S_k / R_k) / sum(S_k)``, which is the rating-weighted mean of
    the regulation gains 1/R_k.  Keyword arguments are passed through to
    :class:`AreaParameters` (``integral_gain_K_E``, ``pv_T``, ...).
    """
    if len(generators) == 0:
        raise ModelError("cannot aggregate an empty generator list")
    S = np.array([g.rating_mva for g in generators])
    Tt = np.array([g.turbine_time_T_t for g in generators])
    Tg = np.array([g.governor_time_T_g for g in generators])
    R = np.array([g.droop_R for g in generators])
    H = np.array([g.inertia_H for g in generators])
    return AreaParameters(
        inertia_H=float(S @ H / S.sum()),
        damping_D=D_eqv,
        droop_R=float(S.sum() / (S @ (1.0 / R))),
        turbine_T_t=float(Tt.mean()),
        governor_T_g=float(Tg.mean()),
        **extra,
    )


@dataclass(frozen=True)
class TieLineTopology:
    """Symmetric synchronizing coefficients T_ij in pu/rad."""

    coefficients: np.ndarray

    def __post_init__(self):
        T = np.array(self.coefficients, dtype=float)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise ModelError(f"tie coefficient matrix must be square, got shape {T.shape}")
        if not np.allclose(T, T.T, rtol=0, atol=0):
            raise ModelError("tie coefficient matrix must be symmetric")
        if np.any(np.diag(T) != 0):
            raise ModelError("tie coefficient matrix must have a zero diagonal")
        if np.any(T < 0):
            raise ModelError("tie coefficients must be non-negative")
        T.setflags(write=False)
        object.__setattr__(self, "coefficients", T)

    @classmethod
    def from_pairs(cls, n_areas: int, pairs: dict[tuple[int, int], float]) -> "TieLineTopology":
        """Build from 0-based ``{(i, j): T_ij}``; each pair is mirrored."""
        T = np.zeros((n_areas, n_areas))
        for (i, j), v in pairs.items():
            T[i, j] = T[j, i] = v
        return cls(T)

    @classmethod
    def isolated(cls, n_areas: int) -> "TieLineTopology":
        return cls(np.zeros((n_areas, n_areas)))

    @property
    def n_areas(self) -> int:
        return self.coefficients.shape[0]

    def row_sums(self) -> np.ndarray:
        return self.coefficients.sum(axis=1)

    def __eq__(self, other):
        return isinstance(other, TieLineTopology) and np.array_equal(
            self.coefficients, other.coefficients)

    def __hash__(self):
        return hash(self.coefficients.tobytes())


def _frozen(a, shape) -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.shape != shape:
        raise ModelError(f"expected shape {shape}, got {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PlantMatrices:
    """Nominal matrices of one area plus the sliding-surface row."""

    A0: np.ndarray
    B0: np.ndarray
    psi0: np.ndarray
    theta: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "A0", _frozen(self.A0, (N_STATES, N_STATES)))
        object.__setattr__(self, "B0", _frozen(self.B0, (N_STATES,)))
        object.__setattr__(self, "psi0", _frozen(self.psi0, (N_STATES, N_DIST)))
        theta = self.theta
        if theta is None:
            theta = default_surface_row(self.B0)
        object.__setattr__(self, "theta", _frozen(theta, (N_STATES,)))
        if self.theta_b == 0.0:
            raise SingularSurfaceError("surface row is orthogonal to the input vector (theta . B0 = 0)")

    @property
    def theta_b(self) -> float:
        return float(self.theta @ self.B0)

    def with_theta(self, theta) -> "PlantMatrices":
        return PlantMatrices(self.A0, self.B0, self.psi0, theta)

    def __eq__(self, other):
        if not isinstance(other, PlantMatrices):
            return NotImplemented
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("A0", "B0", "psi0", "theta"))

    __hash__ = None


def default_surface_row(B0) -> np.ndarray:
    """theta = [0, 0, 0, 0, 1/B0[gov], 0, 0], i.e. theta . B0 = 1."""
    B0 = np.asarray(B0, dtype=float)
    if B0[GOV] == 0:
        raise ModelError("governor input gain is zero")
    theta = np.zeros(N_STATES)
    theta[GOV] = 1.0 / B0[GOV]
    return theta


def surface_row_from_gains(B0, gains: Sequence[float]) -> np.ndarray:
    """Surface row with unit governor weight plus state weights.

    ``gains`` weights ``[dP_tie, df, dP_m, dE, dP_pv, dP_wt]`` relative to the
    governor state; the row is scaled by ``1/B0[gov]`` so ``theta . B0 = 1``.
    All-zero gains give :func:`default_surface_row`.
    """
    gains = np.asarray(gains, dtype=float)
    if gains.shape != (N_STATES - 1,):
        raise ModelError(f"expected {N_STATES - 1} surface gains, got {gains.shape}")
    row = np.insert(gains, GOV, 1.0)
    return row / float(np.asarray(B0)[GOV])


def build_plant_matrices(params: AreaParameters, tie_row_sum: float) -> PlantMatrices:
    if tie_row_sum < 0:
        raise ModelError(f"tie row sum must be non-negative, got {tie_row_sum}")
    p = params
    h = 1.0 / (2.0 * p.inertia_H)
    kt = p.turbine_gain_K_t / p.turbine_T_t
    kg = p.governor_gain_K_g / p.governor_T_g

    A = np.zeros((N_STATES, N_STATES))
    A[TIE, FREQ] = 2.0 * math.pi * tie_row_sum
    A[FREQ] = [-h, -p.damping_D * h, h, 0.0, 0.0, h, h]
    A[MECH, MECH] = -kt
    A[MECH, GOV] = kt
    A[ACE_INT, TIE] = p.integral_gain_K_E
    A[ACE_INT, FREQ] = p.integral_gain_K_E * p.beta
    A[GOV, FREQ] = -kg / p.droop_R
    A[GOV, ACE_INT] = -kg
    A[GOV, GOV] = -kg
    A[PV, PV] = -1.0 / p.pv_T
    A[WT, WT] = -1.0 / p.wt_T

    B = np.zeros(N_STATES)
    B[GOV] = kg

    psi = np.zeros((N_STATES, N_DIST))
    psi[FREQ, 0] = -h
    psi[PV, 1] = p.pv_K / p.pv_T
    psi[WT, 2] = p.wt_K / p.wt_T
    return PlantMatrices(A, B, psi)


@dataclass(frozen=True, eq=False)
class MultiAreaPlant:
    """All areas' nominal matrices together with the tie-line topology."""

    areas: tuple
    topology: TieLineTopology

    def __post_init__(self):
        object.__setattr__(self, "areas", tuple(self.areas))
        if len(self.areas) != self.topology.n_areas:
            raise ModelError(
                f"{len(self.areas)} areas but topology is {self.topology.n_areas}x{self.topology.n_areas}")
        if not self.areas:
            raise ModelError("plant needs at least one area")

    @property
    def n_areas(self) -> int:
        return len(self.areas)

    @property
    def A0(self) -> np.ndarray:
        return np.stack([a.A0 for a in self.areas])

    @property
    def B0(self) -> np.ndarray:
        return np.stack([a.B0 for a in self.areas])

    @property
    def psi0(self) -> np.ndarray:
        return np.stack([a.psi0 for a in self.areas])

    @property
    def theta(self) -> np.ndarray:
        return np.stack([a.theta for a in self.areas])

    def __eq__(self, other):
        if not isinstance(other, MultiAreaPlant):
            return NotImplemented
        return self.topology == other.topology and self.areas == other.areas

    __hash__ = None

    @classmethod
    def from_parameters(cls, params: Sequence[AreaParameters], topology: TieLineTopology):
        sums = topology.row_sums()
        return cls(tuple(build_plant_matrices(p, s) for p, s in zip(params, sums, strict=True)),
                   topology)


def plant_derivative(state, controls, disturbances, model: MultiAreaPlant) -> np.ndarray:
    """Time derivative of the stacked ``(n_areas, 7)`` state.

    Rows 2..7 of every area come from its nominal matrices.  The tie-line row
    is evaluated from the topology, ``2*pi*sum_j T_ij (df_i - df_j)``, and not
    from ``A0[0, 1]``: published matrices carry a rounded row sum, and only the
    topology form keeps the net tie flow exactly conserved.
    """
    x = np.asarray(state, dtype=float)
    u = np.asarray(controls, dtype=float)
    d = np.asarray(disturbances, dtype=float)
    n = model.n_areas
    if x.shape != (n, N_STATES) or u.shape != (n,) or d.shape != (n, N_DIST):
        raise ModelError(
            f"dimension mismatch: state {x.shape}, controls {u.shape}, disturbances {d.shape} "
            f"for {n} areas")
    dx = (np.einsum("ijk,ik->ij", model.A0, x) + model.B0 * u[:, None]
          + np.einsum("ijk,ik->ij", model.psi0, d))
    T = model.topology.coefficients
    f = x[:, FREQ]
    dx[:, TIE] = (2.0 * math.pi * (T.sum(axis=1) * f - T @ f)
                  + model.B0[:, TIE] * u + np.einsum("ik,ik->i", model.psi0[:, TIE], d))
    return dx
