"""Text scenario files.

INI-style sections with ``key = value`` lines, read with :mod:`configparser`.
Unknown sections and keys are rejected.  Areas are 1-based in the file::

    [scenario]
    name = bench39
    horizon_s = 400
    dt_s = 0.005
    controller = gitsmc          ; gitsmc | pi | none
    control_period_s = 0         ; 0 = controller evaluated inside every RK4 stage
    noise_std = 0.005
    noise_seed = 42
    areas = 4

    [topology]
    1-3 = 1.3272                 ; synchronizing coefficient T_ij (symmetric)

    [area.1]                     ; either parameters ...
    H = 10
    D = 1
    R = 0.0471
    T_t = 0.3742
    T_g = 0.0804
    theta = 0 0 0 0 0.0804 0 0   ; optional surface row (7 numbers)
    ; ... or explicit matrices: A0 (49 numbers, row-major), B0 (7), psi0 (21), beta

    [disturbance.1]
    load = 50:250:0.5            ; start:end:level, comma separated
    pv = 50:300:0.25
    wind = 0:100:0.8, 100:270:0.9

    [gitsmc]                     ; shared gains, [gitsmc.N] overrides per area
    lambda1 = 24
    [pi]
    kp = 3
    ki = -3

    [monitor]
    reaching_delta = 0.25
    exclusion_window_s = 0.5
    zeta = 5
"""
from __future__ import annotations

import configparser
from dataclasses import fields

import numpy as np

from .control import GitsmcGains, PiGains
from .plant import (N_DIST, N_STATES, AreaParameters, ModelError, MultiAreaPlant,
                    PlantMatrices, TieLineTopology, build_plant_matrices)
from .sim import (AreaSchedule, ConfigError, DisturbanceSchedule, MonitorThresholds,
                  ScenarioConfig, Segment)

_SCENARIO_KEYS = {"name", "horizon_s", "dt_s", "controller", "control_period_s", "noise_std",
                  "noise_seed", "areas", "state_limit"}
_AREA_PARAM_KEYS = {"H": "inertia_H", "D": "damping_D", "R": "droop_R", "T_t": "turbine_T_t",
                    "T_g": "governor_T_g", "K_t": "turbine_gain_K_t", "K_g": "governor_gain_K_g",
                    "K_E": "integral_gain_K_E", "pv_T": "pv_T", "pv_K": "pv_K", "wt_T": "wt_T",
                    "wt_K": "wt_K"}
_AREA_MATRIX_KEYS = {"A0", "B0", "psi0", "beta"}
_GITSMC_KEYS = {"lambda1", "lambda2", "alpha", "eta1", "eta2", "boundary_eps", "mu_max"}
_PI_KEYS = {"kp", "ki", "integral_limit"}
_MONITOR_KEYS = {"reaching_delta", "exclusion_window_s", "zeta"}
_CHANNELS = ("load", "pv", "wind")


def _parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    p.optionxform = str  # keys are case-sensitive (T_t vs T_g)
    return p


def _float(section, key, value) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number: {value!r}") from None


def _vector(section, key, value, n) -> np.ndarray:
    parts = value.replace(",", " ").split()
    if len(parts) != n:
        raise ConfigError(f"[{section}] {key}: expected {n} numbers, got {len(parts)}")
    return np.array([_float(section, key, v) for v in parts])


def _check_keys(section, present, allowed):
    unknown = set(present) - set(allowed)
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(sorted(unknown))}")


def _segments(section, key, value) -> tuple:
    out = []
    for item in value.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ConfigError(f"[{section}] {key}: segment {item!r} is not start:end:level")
        out.append(Segment(*(_float(section, key, v) for v in parts)))
    return tuple(out)


def _area_model(section, sec, tie_sum):
    keys = set(sec)
    if keys & _AREA_MATRIX_KEYS:
        _check_keys(section, keys, _AREA_MATRIX_KEYS | {"theta"})
        missing = {"A0", "B0", "psi0", "beta"} - keys
        if missing:
            raise ConfigError(f"[{section}] explicit matrices need {', '.join(sorted(missing))}")
        A = _vector(section, "A0", sec["A0"], N_STATES * N_STATES).reshape(N_STATES, N_STATES)
        B = _vector(section, "B0", sec["B0"], N_STATES)
        psi = _vector(section, "psi0", sec["psi0"], N_STATES * N_DIST).reshape(N_STATES, N_DIST)
        theta = _vector(section, "theta", sec["theta"], N_STATES) if "theta" in sec else None
        return PlantMatrices(A, B, psi, theta), _float(section, "beta", sec["beta"])
    _check_keys(section, keys, set(_AREA_PARAM_KEYS) | {"theta"})
    kwargs = {_AREA_PARAM_KEYS[k]: _float(section, k, v) for k, v in sec.items() if k != "theta"}
    missing = {"H", "R", "T_t", "T_g"} - keys
    if missing:
        raise ConfigError(f"[{section}] missing {', '.join(sorted(missing))}")
    kwargs.setdefault("damping_D", 1.0)
    params = AreaParameters(**kwargs)
    m = build_plant_matrices(params, tie_sum)
    if "theta" in sec:
        m = m.with_theta(_vector(section, "theta", sec["theta"], N_STATES))
    return m, params.beta


def loads(text: str) -> ScenarioConfig:
    """Parse scenario text into a validated :class:`ScenarioConfig`."""
    p = _parser()
    try:
        p.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if "scenario" not in p:
        raise ConfigError("missing [scenario] section")
    sc = p["scenario"]
    _check_keys("scenario", sc, _SCENARIO_KEYS)
    if "areas" not in sc:
        raise ConfigError("[scenario] areas is required")
    n = int(_float("scenario", "areas", sc["areas"]))
    if n < 1:
        raise ConfigError("[scenario] areas must be at least 1")

    allowed = {"scenario", "topology", "gitsmc", "pi", "monitor"}
    for i in range(1, n + 1):
        allowed |= {f"area.{i}", f"disturbance.{i}", f"gitsmc.{i}", f"pi.{i}"}
    unknown = set(p.sections()) - allowed
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")

    pairs = {}
    if "topology" in p:
        for key, value in p["topology"].items():
            try:
                i, j = (int(v) - 1 for v in key.split("-"))
            except ValueError:
                raise ConfigError(f"[topology] key {key!r} is not i-j") from None
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise ConfigError(f"[topology] bad area pair {key!r}")
            pairs[(i, j)] = _float("topology", key, value)
    try:
        topo = TieLineTopology.from_pairs(n, pairs)
    except ModelError as exc:
        raise ConfigError(str(exc)) from None

    models, betas = [], []
    sums = topo.row_sums()
    for i in range(n):
        name = f"area.{i + 1}"
        if name not in p:
            raise ConfigError(f"missing [{name}] section")
        try:
            m, b = _area_model(name, p[name], float(sums[i]))
        except ModelError as exc:
            raise ConfigError(f"[{name}] {exc}") from None
        models.append(m)
        betas.append(b)

    areas = []
    for i in range(n):
        name = f"disturbance.{i + 1}"
        sec = p[name] if name in p else {}
        _check_keys(name, sec, _CHANNELS)
        areas.append(AreaSchedule(**{ch: _segments(name, ch, sec.get(ch, "")) for ch in _CHANNELS}))
    sched = DisturbanceSchedule(tuple(areas),
                                _float("scenario", "noise_std", sc.get("noise_std", "0")),
                                int(_float("scenario", "noise_seed", sc.get("noise_seed", "0"))))

    def gains(kind, cls, keys, required=()):
        base = dict(p[kind]) if kind in p else {}
        _check_keys(kind, base, keys)
        out = []
        for i in range(n):
            over = dict(p[f"{kind}.{i + 1}"]) if f"{kind}.{i + 1}" in p else {}
            _check_keys(f"{kind}.{i + 1}", over, keys)
            merged = {**base, **over}
            if any(r not in merged for r in required):
                return ()
            try:
                out.append(cls(**{k: _float(kind, k, v) for k, v in merged.items()}))
            except ValueError as exc:
                raise ConfigError(f"[{kind}.{i + 1}] {exc}") from None
        return tuple(out)

    mon = p["monitor"] if "monitor" in p else {}
    _check_keys("monitor", mon, _MONITOR_KEYS)
    monitors = MonitorThresholds(**{k: _float("monitor", k, v) for k, v in mon.items()})

    kw = dict(
        name=sc.get("name", "custom"),
        plant=MultiAreaPlant(tuple(models), topo),
        schedule=sched,
        controller=sc.get("controller", "gitsmc"),
        gitsmc_gains=gains("gitsmc", GitsmcGains, _GITSMC_KEYS),
        pi_gains=gains("pi", PiGains, _PI_KEYS, ("kp", "ki")),
        betas=tuple(betas),
        monitors=monitors,
    )
    for key in ("horizon_s", "dt_s", "control_period_s", "state_limit"):
        if key in sc:
            kw[key] = _float("scenario", key, sc[key])
    return ScenarioConfig(**kw)


def load(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def _fmt(v) -> str:
    return repr(float(v))


def _fmt_vec(a) -> str:
    return " ".join(_fmt(v) for v in np.ravel(a))


def dumps(config: ScenarioConfig, area_params=None) -> str:
    """Serialize a scenario.  With ``area_params`` the areas are written as
    parameters (plus the surface row); otherwise as explicit matrices."""
    n = config.plant.n_areas
    lines = ["[scenario]", f"name = {config.name}", f"areas = {n}",
             f"horizon_s = {_fmt(config.horizon_s)}", f"dt_s = {_fmt(config.dt_s)}",
             f"controller = {config.controller}",
             f"control_period_s = {_fmt(config.control_period_s)}",
             f"noise_std = {_fmt(config.schedule.noise_std)}",
             f"noise_seed = {config.schedule.noise_seed}",
             f"state_limit = {_fmt(config.state_limit)}", "", "[topology]"]
    T = config.plant.topology.coefficients
    for i in range(n):
        for j in range(i + 1, n):
            if T[i, j] != 0:
                lines.append(f"{i + 1}-{j + 1} = {_fmt(T[i, j])}")
    inverse = {v: k for k, v in _AREA_PARAM_KEYS.items()}
    for i, m in enumerate(config.plant.areas):
        lines += ["", f"[area.{i + 1}]"]
        if area_params is not None:
            prm = area_params[i]
            lines += [f"{inverse[f.name]} = {_fmt(getattr(prm, f.name))}" for f in fields(prm)]
        else:
            lines += [f"A0 = {_fmt_vec(m.A0)}", f"B0 = {_fmt_vec(m.B0)}",
                      f"psi0 = {_fmt_vec(m.psi0)}", f"beta = {_fmt(config.betas[i])}"]
        lines.append(f"theta = {_fmt_vec(m.theta)}")
    for i, a in enumerate(config.schedule.areas):
        lines += ["", f"[disturbance.{i + 1}]"]
        for ch in _CHANNELS:
            segs = getattr(a, ch)
            if segs:
                lines.append(f"{ch} = " + ", ".join(
                    f"{_fmt(s.start)}:{_fmt(s.end)}:{_fmt(s.level)}" for s in segs))
    for kind, gains in (("gitsmc", config.gitsmc_gains), ("pi", config.pi_gains)):
        if not gains:
            continue
        shared = all(g == gains[0] for g in gains)
        for i, g in enumerate(gains):
            if shared and i > 0:
                break
            lines += ["", f"[{kind}]" if shared else f"[{kind}.{i + 1}]"]
            for f in fields(g):
                v = getattr(g, f.name)
                if v is not None:
                    lines.append(f"{f.name} = {_fmt(v)}")
    mon = config.monitors
    mon_lines = [f"{f.name} = {_fmt(getattr(mon, f.name))}" for f in fields(mon)
                 if getattr(mon, f.name) is not None]
    if mon_lines:
        lines += ["", "[monitor]"] + mon_lines
    return "\n".join(lines) + "\n"
