"""Command-line front end: ``gitsmc-lfc {run,compare,audit,sweep,export-config}``.

Exit codes: 0 success, 2 configuration error, 3 divergence, 4 I/O error.
The default output directory comes from ``GITSMC_LFC_OUTPUT_DIR``.
"""
from __future__ import annotations

import argparse
import io
import itertools
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import bench39, config as config_io, metrics, svgplot
from .plant import STATE_NAMES, DIST_NAMES
from .sim import (AreaSchedule, ConfigError, DisturbanceSchedule, DivergenceError,
                  reaching_monitor, residual_uncertainty, run_scenario)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4
OUTPUT_ENV = "GITSMC_LFC_OUTPUT_DIR"
DEFAULT_OUTPUT = "gitsmc_output"
SCENARIOS = ("bench39", "bench39-published")
CSV_HEADER = ("t", "area") + STATE_NAMES + ("mu", "theta", "L") + DIST_NAMES
SWEEP_PARAMS = ("eta1", "eta2", "lambda", "lambda1", "lambda2", "alpha", "boundary_eps",
                "kp", "ki")


# ------------------------------------------------------------------ output

def atomic_write(path: str, data) -> None:
    """Write through a temporary file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def trace_csv(trace) -> str:
    n, areas = trace.mu.shape
    cols = np.empty((n, areas, len(CSV_HEADER)))
    cols[:, :, 0] = trace.t[:, None]
    cols[:, :, 1] = np.arange(1, areas + 1)[None, :]
    cols[:, :, 2:9] = trace.x
    cols[:, :, 9] = trace.mu
    cols[:, :, 10] = trace.theta
    cols[:, :, 11] = trace.lyapunov
    cols[:, :, 12:15] = trace.disturbance
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    np.savetxt(buf, cols.reshape(n * areas, -1), fmt="%.17g", delimiter=",")
    return buf.getvalue()


def _bands(schedule, area):
    a = schedule.areas[area]
    return [(s.start, s.end, ch) for ch in ("wind", "pv", "load") for s in getattr(a, ch)
            if s.level != 0]


def plot_trace(trace, schedule, outdir, label=None) -> list[str]:
    paths = []
    for i in range(trace.n_areas):
        for key, arr, ylabel in (("df", trace.df, "frequency deviation (pu)"),
                                 ("tie", trace.dp_tie, "tie-line power deviation (pu)")):
            path = os.path.join(outdir, f"{key}_area{i + 1}.svg")
            svg = svgplot.line_plot(trace.t, [(label or trace.controller, arr[:, i])],
                                    f"Area {i + 1}: {ylabel}", ylabel, _bands(schedule, i),
                                    colors=[svgplot.AREA_COLORS[i % len(svgplot.AREA_COLORS)]])
            atomic_write(path, svg)
            paths.append(path)
    return paths


def index_table(report: metrics.IndexReport) -> str:
    return "index,value\n" + "".join(f"{k},{getattr(report, k):.17g}\n" for k in metrics.INDEX_NAMES)


def monitor_summary(trace, config) -> str:
    lines = [f"controller: {trace.controller}"]
    if trace.controller == "gitsmc":
        eps = max(g.boundary_eps for g in config.gitsmc_gains)
        delta = config.monitors.reaching_delta
        delta = 10 * eps if delta is None else delta
        rep = reaching_monitor(trace, delta, config.monitors.exclusion_window_s)
        lines.append(f"reaching monitor: delta={delta:g}, exclusion={rep.exclusion_window_s:g} s")
        for i, f in enumerate(rep.fraction):
            lines.append(f"  area {i + 1}: violation fraction {f:.6f} "
                         f"({int(rep.violations[i])} of {rep.samples} samples)")
    unc = residual_uncertainty(trace, config.plant, config.monitors.zeta)
    lines.append("lumped uncertainty max norm" + (
        f" (zeta={unc.zeta:g})" if unc.zeta is not None else ""))
    for i, v in enumerate(unc.max_norm):
        tail = "" if unc.zeta is None else ("  holds" if v <= unc.zeta else "  EXCEEDED")
        lines.append(f"  area {i + 1}: {v:.6g}{tail}")
    return "\n".join(lines) + "\n"


def write_run(trace, config, outdir) -> dict:
    os.makedirs(outdir, exist_ok=True)
    report = metrics.integral_indices(trace)
    csv_path = os.path.join(outdir, "trace.csv")
    atomic_write(csv_path, trace_csv(trace))
    plots = plot_trace(trace, config.schedule, outdir)
    idx_path = os.path.join(outdir, "indices.csv")
    atomic_write(idx_path, index_table(report))
    mon_path = os.path.join(outdir, "monitor.txt")
    atomic_write(mon_path, monitor_summary(trace, config))
    return {"trace": csv_path, "plots": plots, "indices": idx_path, "monitor": mon_path,
            "report": report}


# ------------------------------------------------------------------ config

def _output_dir(args) -> str:
    return args.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT


def build_config(args, controller=None):
    ctrl = controller or args.controller
    if args.config:
        cfg = config_io.load(args.config)
        if ctrl:
            cfg = cfg.with_(controller=ctrl)
    else:
        if args.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {args.scenario!r}; choose from {', '.join(SCENARIOS)}")
        plant = "published" if args.scenario == "bench39-published" else "formula"
        cfg = bench39.builtin_benchmark(ctrl or "gitsmc", plant=plant)
    sched = cfg.schedule
    if args.no_disturbance:
        sched = DisturbanceSchedule(tuple(AreaSchedule() for _ in sched.areas), 0.0,
                                    sched.noise_seed)
    if args.noise is not None:
        sched = replace(sched, noise_std=args.noise)
    if args.seed is not None:
        sched = replace(sched, noise_seed=args.seed)
    if args.horizon is not None:
        sched = sched.truncated(args.horizon)
    changes = {"schedule": sched}
    if args.dt is not None:
        changes["dt_s"] = args.dt
    if args.horizon is not None:
        changes["horizon_s"] = args.horizon
    if args.control_period is not None:
        changes["control_period_s"] = args.control_period
    return cfg.with_(**changes)


def _add_scenario_args(p, controller=True):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario", default="bench39", help="built-in scenario name")
    src.add_argument("--config", help="scenario file")
    if controller:
        p.add_argument("--controller", choices=("gitsmc", "pi", "none"))
    p.add_argument("--dt", type=float, help="integration step (s)")
    p.add_argument("--horizon", type=float, help="simulated time (s)")
    p.add_argument("--seed", type=int, help="noise seed")
    p.add_argument("--noise", type=float, help="noise standard deviation (pu); 0 disables")
    p.add_argument("--no-disturbance", action="store_true", help="remove every disturbance")
    p.add_argument("--control-period", type=float,
                   help="zero-order-hold control period (s); 0 evaluates every RK4 stage")
    p.add_argument("--output-dir", help=f"output directory (default ${OUTPUT_ENV} or {DEFAULT_OUTPUT})")
    p.add_argument("--backend", choices=("cython", "python"), help="integration kernel")


# ------------------------------------------------------------------ commands

def cmd_run(args) -> int:
    cfg = build_config(args)
    trace = run_scenario(cfg, backend=args.backend)
    art = write_run(trace, cfg, _output_dir(args))
    r = art["report"]
    print(f"{cfg.name} [{cfg.controller}] dt={cfg.dt_s:g} s, {len(trace.t)} samples")
    for k in metrics.INDEX_NAMES:
        print(f"  {k.upper():5s} {getattr(r, k):.6e}")
    print(f"wrote {art['trace']} and {len(art['plots'])} plots")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg_a = build_config(args, args.controller_a)
    cfg_b = build_config(args, args.controller_b)
    with ThreadPoolExecutor(max_workers=2) as pool:
        fa = pool.submit(run_scenario, cfg_a, args.backend)
        fb = pool.submit(run_scenario, cfg_b, args.backend)
        ta, tb = fa.result(), fb.result()
    out = _output_dir(args)
    names = (f"a_{args.controller_a}", f"b_{args.controller_b}")
    for name, tr, cfg in zip(names, (ta, tb), (cfg_a, cfg_b)):
        write_run(tr, cfg, os.path.join(out, name))
    cmp = metrics.compare_controllers(metrics.integral_indices(ta), metrics.integral_indices(tb))
    lines = ["index,a,b,improvement_pct"]
    for row in cmp.rows:
        imp = "undefined" if row.undefined else f"{row.improvement_pct:.6f}"
        lines.append(f"{row.name},{row.test:.17g},{row.baseline:.17g},{imp}")
    atomic_write(os.path.join(out, "comparison.csv"), "\n".join(lines) + "\n")
    for i in range(ta.n_areas):
        for key, getter, ylabel in (("df", lambda t: t.df, "frequency deviation (pu)"),
                                    ("tie", lambda t: t.dp_tie, "tie-line power deviation (pu)")):
            svg = svgplot.line_plot(ta.t, [(names[0], getter(ta)[:, i]), (names[1], getter(tb)[:, i])],
                                    f"Area {i + 1}: {ylabel}", ylabel,
                                    _bands(cfg_a.schedule, i), colors=["#1f77b4", "#d62728"])
            atomic_write(os.path.join(out, f"compare_{key}_area{i + 1}.svg"), svg)
    print(f"{'index':6s} {'A':>14s} {'B':>14s} {'improvement':>12s}")
    for row in cmp.rows:
        imp = "undefined" if row.undefined else f"{row.improvement_pct:.2f}%"
        print(f"{row.name.upper():6s} {row.test:14.6e} {row.baseline:14.6e} {imp:>12s}")
    return EXIT_OK


def _rel_tol(text: str) -> float:
    text = text.strip()
    if text.endswith("%"):
        return float(text[:-1]) / 100.0
    return float(text)


def _area_filter(text):
    if not text:
        return None
    try:
        return {int(v) - 1 for v in text.replace(",", " ").split()}
    except ValueError:
        raise ConfigError(f"bad area list {text!r}") from None


def cmd_audit(args) -> int:
    try:
        tol = _rel_tol(args.rel_tol)
    except ValueError:
        raise ConfigError(f"bad tolerance {args.rel_tol!r}") from None
    rep = bench39.audit_benchmark(tol, _area_filter(args.areas))
    print(f"audit at rel_tol={tol:g}: {len(rep.flagged)} flagged, {len(rep.matched)} matched")
    print(f"{'area':>4s} {'element':>10s} {'built':>12s} {'published':>12s} {'rel diff':>10s}  note")
    rows = list(rep.flagged) + (list(rep.matched) if args.all else [])
    for e in sorted(rows, key=lambda e: (e.area, e.row, str(e.col))):
        flag = "FLAG " if e in rep.flagged else "ok   "
        print(f"{e.area + 1:4d} {e.position:>10s} {e.built:12.5g} {e.published:12.5g} "
              f"{e.rel_diff:10.3%}  {flag}{e.note or ('(not in ledger)' if flag.strip() else '')}")
    return EXIT_OK


def _parse_grid(items):
    grid = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"grid entry {item!r} is not name=v1,v2,...")
        name, values = item.split("=", 1)
        name = name.strip()
        if name not in SWEEP_PARAMS:
            raise ConfigError(f"unknown sweep parameter {name!r}; choose from {', '.join(SWEEP_PARAMS)}")
        try:
            grid[name] = [float(v) for v in values.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"bad values in {item!r}") from None
        if not grid[name]:
            raise ConfigError(f"no values for {name}")
    return grid


def _apply_point(cfg, point):
    g_keys = {"eta1", "eta2", "alpha", "boundary_eps", "lambda1", "lambda2"}
    g_changes = {k: v for k, v in point.items() if k in g_keys}
    if "lambda" in point:
        g_changes.setdefault("lambda1", point["lambda"])
        g_changes.setdefault("lambda2", point["lambda"])
    p_changes = {k: v for k, v in point.items() if k in ("kp", "ki")}
    try:
        gains = tuple(replace(g, **g_changes) for g in cfg.gitsmc_gains) if g_changes else cfg.gitsmc_gains
        pis = tuple(replace(g, **p_changes) for g in cfg.pi_gains) if p_changes else cfg.pi_gains
    except ValueError as exc:
        raise ConfigError(f"grid point {point}: {exc}") from None
    return cfg.with_(gitsmc_gains=gains, pi_gains=pis)


def _sweep_one(cfg, backend):
    try:
        return metrics.integral_indices(run_scenario(cfg, backend=backend)), ""
    except DivergenceError as exc:
        return None, str(exc)


def cmd_sweep(args) -> int:
    grid = _parse_grid(args.grid)
    if not grid:
        raise ConfigError("empty grid")
    base = build_config(args)
    names = list(grid)
    points = [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]
    configs = [_apply_point(base, p) for p in points]   # validate everything before running
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(lambda c: _sweep_one(c, args.backend), configs))
    rows = list(zip(points, results))
    ok = sorted((r for r in rows if r[1][0] is not None), key=lambda r: getattr(r[1][0], args.rank_by))
    failed = [r for r in rows if r[1][0] is None]
    lines = [",".join(["rank"] + names + list(metrics.INDEX_NAMES) + ["status"])]
    for rank, (p, (rep, _)) in enumerate(ok, 1):
        lines.append(",".join([str(rank)] + [f"{p[n]:.17g}" for n in names]
                              + [f"{getattr(rep, k):.17g}" for k in metrics.INDEX_NAMES] + ["ok"]))
    for p, (_, msg) in failed:
        lines.append(",".join([""] + [f"{p[n]:.17g}" for n in names] + [""] * 4
                              + ['"failed: ' + msg.replace('"', "'") + '"']))
    out = _output_dir(args)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "sweep.csv")
    atomic_write(path, "\n".join(lines) + "\n")
    print(f"{len(ok)} ok, {len(failed)} failed; ranked by {args.rank_by}; wrote {path}")
    for line in lines[1:]:
        print("  " + line)
    return EXIT_OK


def cmd_export_config(args) -> int:
    plant = "published" if args.scenario == "bench39-published" else "formula"
    if args.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {args.scenario!r}")
    cfg = bench39.builtin_benchmark(args.controller, plant=plant)
    params = bench39.area_parameters() if plant == "formula" else None
    text = config_io.dumps(cfg, params)
    if args.output:
        atomic_write(args.output, text)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gitsmc-lfc", description="Multi-area load frequency "
                                 "control simulator with GITSMC and PI controllers.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario and write its artifacts")
    _add_scenario_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run two controllers on the same scenario")
    _add_scenario_args(p, controller=False)
    p.add_argument("--controller-a", default="gitsmc", choices=("gitsmc", "pi", "none"))
    p.add_argument("--controller-b", default="pi", choices=("gitsmc", "pi", "none"))
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("audit", help="compare formula-built matrices with the printed ones")
    p.add_argument("--areas", help="1-based area list, e.g. '2' or '1,3'")
    p.add_argument("--rel-tol", default="0.5%", help="relative tolerance, e.g. 0.005 or 0.5%%")
    p.add_argument("--all", action="store_true", help="also list matching elements")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("sweep", help="run a gain grid and rank it by an index")
    _add_scenario_args(p)
    p.add_argument("--grid", action="append", default=[], metavar="NAME=V1,V2",
                   help=f"grid axis; NAME in {{{', '.join(SWEEP_PARAMS)}}}")
    p.add_argument("--rank-by", default="itse", choices=metrics.INDEX_NAMES)
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export-config", help="write a built-in scenario as a config file")
    p.add_argument("--scenario", default="bench39")
    p.add_argument("--controller", default="gitsmc", choices=("gitsmc", "pi", "none"))
    p.add_argument("--output", help="file to write (default: stdout)")
    p.set_defaults(func=cmd_export_config)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
