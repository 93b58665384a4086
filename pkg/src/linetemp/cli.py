"""Command-line front end.

Every subcommand validates its inputs, writes plain data files (CSV numbers
at 6 significant digits) into the output directory and prints a one-line
summary.  Exit codes: 0 success, 1 input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import analytic, batch, clustering, geo, risk, scenarios
from .conductor import EnvironmentSample, get_conductor, load_catalog, solar_geometry
from .oracle import IntegrationConfig, TemperatureTrace, crossing_time, fmt, integrate, read_trace_csv

OUTPUT_ENV = "LINETEMP_OUTPUT_DIR"

EPILOG = """\
file formats (schema_version 1 for all):
  network JSON   {"schema_version": 1, "lines": [{id, waypoints, conductor_name, base_current_amps}]}
  weather CSV    timestamp_iso8601,lat,lon,temp_c,wind_u_ms,wind_v_ms,solar_wm2[,sun_alt_deg,sun_az_deg]
                 optional first line "# schema_version=1"
  states JSON    {"schema_version": 1, "states": [{state_id, description, line_currents | multipliers}]}
  catalog JSON   {"schema_version": 1, "conductors": [{name, diameter_mm, heat_capacity, ...}]}
  wind rose JSON {"schema_version": 1, "interpolation": "step"|"linear", "ambient": [lo, hi],
                  "sectors": [{lo, hi, shape, scale, probability}]}
  trace CSV      segment_id,state_id,t_s,temp_c
  region CSV     direction_deg,wind_speed_ms,time_to_limit_s,density (-1 never, -2 already exceeded)
exit codes: 0 success, 1 input error, 2 numerical failure
"""

NUMERICAL_ERRORS = (analytic.NonConvergence, analytic.NegativeDiscriminant, analytic.InvalidModel,
                    FloatingPointError)
INPUT_ERRORS = (KeyError, ValueError, FileNotFoundError, IsADirectoryError, json.JSONDecodeError)


# -- shared arguments ---------------------------------------------------------------

def _env_args(p, wind=True):
    g = p.add_argument_group("conductor and weather")
    g.add_argument("--preset", choices=["benchmark"], help="fill unset weather flags from the benchmark case")
    g.add_argument("--conductor", default="Drake")
    g.add_argument("--ambient", type=float, help="ambient temperature, C")
    if wind:
        g.add_argument("--wind-speed", type=float, help="m/s")
        g.add_argument("--wind-dir", type=float, help="degrees from north")
    g.add_argument("--line-azimuth", type=float)
    g.add_argument("--current", type=float, help="A per subconductor")
    g.add_argument("--solar", type=float, help="irradiance, W/m2")
    g.add_argument("--sun-alt", type=float, help="degrees; computed from --lat/--day/--hour if omitted")
    g.add_argument("--sun-az", type=float)
    g.add_argument("--lat", type=float, default=30.0)
    g.add_argument("--day", type=int, default=182)
    g.add_argument("--hour", type=float, default=12.0, help="local solar time")
    g.add_argument("--elevation", type=float, default=0.0)
    g.add_argument("--initial-temp", type=float, help="C; defaults to ambient")


def _fill(args, wind=True):
    """Resolve weather flags, applying the preset, then plain defaults."""
    preset = dict(ambient=40.0, wind_speed=0.8, wind_dir=90.0, line_azimuth=90.0, current=800.0,
                  solar=1000.0, initial_temp=50.0) if args.preset == "benchmark" else {}
    plain = dict(ambient=25.0, wind_speed=0.6, wind_dir=90.0, line_azimuth=90.0, current=0.0, solar=0.0)
    for k in list(plain) + ["initial_temp"]:
        if not hasattr(args, k):
            continue
        if getattr(args, k) is None:
            setattr(args, k, preset.get(k, plain.get(k)))
    if args.initial_temp is None:
        args.initial_temp = args.ambient
    if args.sun_alt is None or args.sun_az is None:
        alt, az = solar_geometry(args.lat, args.day, args.hour)
        args.sun_alt = float(alt) if args.sun_alt is None else args.sun_alt
        args.sun_az = float(az) if args.sun_az is None else args.sun_az
    return args


def _conductor(args):
    catalog = load_catalog(args.catalog) if args.catalog else None
    return get_conductor(args.conductor, catalog)


def _environment(args, speed=None, direction=None):
    return EnvironmentSample(args.ambient, args.wind_speed if speed is None else speed,
                             args.wind_dir if direction is None else direction,
                             args.solar, args.sun_alt, args.sun_az, args.elevation)


def _context(args):
    return risk.SegmentContext(args.line_azimuth, args.solar, args.sun_alt, args.sun_az, args.elevation)


def _outdir(args) -> Path:
    d = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _axis(text, name):
    """'a:b:step' (inclusive of b when it lands on the grid) or 'x,y,z'."""
    try:
        if ":" in text:
            a, b, s = (float(v) for v in text.split(":"))
            if s <= 0:
                raise ValueError
            return np.round(np.arange(a, b + s * 1e-9, s), 10)
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ValueError(f"bad {name} axis {text!r}; use start:stop:step or a comma list") from None


def _write_rows(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return Path(path)


def _json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return Path(path)


# -- subcommands ---------------------------------------------------------------------

def cmd_steady(args):
    _fill(args)
    cond = _conductor(args)
    env = _environment(args)
    ss = analytic.solve_steady_state(cond, env, args.line_azimuth, args.current, args.initial_temp)
    print(f"T_e = {fmt(ss.temp)} C  iterations = {ss.iterations}  residual = {fmt(ss.residual)} W/m")
    return 0


def error_summary(t, rk4, first_order, riccati, times_rk4, times_fo, times_ric):
    """Table-style error statistics; deltas are numerical minus analytical.

    dT_plus: analytical below numerical; dT_minus: analytical above.
    dt_plus: analytical reaches a temperature earlier; dt_minus: later.
    """
    out = {}
    for name, tr, tt in (("first_order", first_order, times_fo), ("riccati", riccati, times_ric)):
        d = rk4 - tr
        dt = times_rk4 - tt
        ok = np.isfinite(dt)
        out[name] = {
            "max_dT_minus_c": float(max(0.0, -d.min())),
            "max_dt_plus_s": float(max(0.0, dt[ok].max())) if ok.any() else 0.0,
            "max_dT_plus_c": float(max(0.0, d.max())),
            "max_dt_minus_s": float(max(0.0, -dt[ok].min())) if ok.any() else 0.0,
        }
    return out


def cmd_evolve(args):
    _fill(args)
    cond = _conductor(args)
    env = _environment(args)
    cfg = IntegrationConfig(args.step, "rk4", args.hours * 3600.0)
    tr = integrate(cond, env, args.line_azimuth, args.current, args.initial_temp, cfg)
    model = analytic.build_model(cond, env, args.line_azimuth, args.current, args.initial_temp)
    fo = np.asarray(analytic.eval_first_order(model, tr.t))
    ric = np.asarray(analytic.eval_riccati(model, tr.t))
    if args.threshold:
        th = np.array(args.threshold, dtype=float)
    else:
        lo, hi = sorted((args.initial_temp, float(tr.temp[-1])))
        th = np.arange(np.floor(lo) + 1.0, np.ceil(hi))
    if th.size == 0:
        th = np.array([args.initial_temp])
    t_rk4 = np.array([crossing_time(tr, x) for x in th])
    rising = model.steady_temp >= model.initial_temp
    if rising:
        t_fo = np.asarray(analytic.time_to_threshold(model, th, "first_order"))
        t_ric = np.asarray(analytic.time_to_threshold(model, th, "riccati"))
    else:
        # falling traces: time to drop to each threshold, read off the sampled curves
        t_fo = np.array([_fall_time(tr.t, fo, x) for x in th])
        t_ric = np.array([_fall_time(tr.t, ric, x) for x in th])
        t_rk4 = np.array([_fall_time(tr.t, tr.temp, x) for x in th])
    summary = error_summary(tr.t, tr.temp, fo, ric, t_rk4, t_fo, t_ric)
    summary.update(schema_version=1, steady_temp_c=float(model.steady_temp), thresholds_c=th.tolist(),
                   initial_temp_c=args.initial_temp, current_a=args.current, conductor=cond.name,
                   error_bound_c=float(analytic.error_bound(model)))
    out = _outdir(args)
    _write_rows(out / f"{args.name}.csv", ["t_s", "rk4_c", "riccati_c", "first_order_c"],
                zip(tr.t, tr.temp, ric, fo))
    _json(out / f"{args.name}_summary.json", summary)
    s = summary
    print(f"T_e = {fmt(model.steady_temp)} C  first-order max dT- = {fmt(s['first_order']['max_dT_minus_c'])} C  "
          f"Riccati max dT+ = {fmt(s['riccati']['max_dT_plus_c'])} C  -> {out / args.name}.csv")
    return 0


def _fall_time(t, temp, th):
    below = np.nonzero(np.asarray(temp) <= th)[0]
    if below.size == 0:
        return np.inf
    k = below[0]
    if k == 0:
        return 0.0
    a, b = temp[k - 1], temp[k]
    return float(t[k - 1] + (a - th) / (a - b) * (t[k] - t[k - 1]))


def cmd_update_current(args):
    _fill(args)
    cond = _conductor(args)
    env = _environment(args)
    refs = args.reference or [cond.rated_current * 1.5, cond.rated_current * 1.8]
    news = _axis(args.new_current, "current") if args.new_current else np.arange(0.0, 2 * cond.rated_current + 1e-9, 50.0)
    t = np.arange(0.0, args.hours * 3600.0 + 1e-9, 60.0)
    models = [analytic.build_model(cond, env, args.line_azimuth, r, args.initial_temp) for r in refs]
    rows = []
    worst = 0.0
    for i_new in news:
        k = int(np.argmin([abs(i_new - r) for r in refs]))
        upd = analytic.update_for_current(models[k], cond, i_new)
        full = analytic.build_model(cond, env, args.line_azimuth, i_new, args.initial_temp)
        err_ss = abs(upd.steady_temp - full.steady_temp)
        err_tr = float(np.max(np.abs(np.asarray(analytic.eval_first_order(upd, t))
                                     - np.asarray(analytic.eval_first_order(full, t)))))
        worst = max(worst, err_ss, err_tr)
        rows.append((float(i_new), float(refs[k]), float(upd.steady_temp), float(full.steady_temp), err_ss, err_tr))
    out = _outdir(args)
    path = _write_rows(out / "update_current.csv",
                       ["new_current_a", "reference_a", "steady_updated_c", "steady_rebuilt_c",
                        "steady_error_c", "trace_error_c"], rows)
    print(f"{len(rows)} currents, max error {fmt(worst)} C -> {path}")
    return 0


def _load_rose(args):
    if not args.wind_rose or args.wind_rose == "fixture":
        return scenarios.wind_rose("linear")
    doc = json.loads(Path(args.wind_rose).read_text())
    if doc.get("schema_version", 1) != 1:
        raise ValueError(f"{args.wind_rose}: unsupported schema_version")
    sectors = [risk.WindSector(s["lo"], s["hi"], s["shape"], s["scale"], s["probability"]) for s in doc["sectors"]]
    return risk.WindModel(sectors, tuple(doc.get("ambient", (30.0, 40.0))), doc.get("interpolation", "step"))


def cmd_region(args):
    _fill(args, wind=False)
    cond = _conductor(args)
    ctx = _context(args)
    dirs = _axis(args.directions, "direction")
    speeds = _axis(args.speeds, "speed")
    reg = risk.time_to_overtemp_region(cond, ctx, args.current, args.limit, args.ambient, args.initial_temp,
                                       dirs, speeds, min_speed=args.min_speed, form=args.form)
    if args.wind_rose:
        reg = risk.overlay_probability(reg, _load_rose(args))
    out = _outdir(args)
    csv_path, meta = risk.write_region(reg, out / "region.csv")
    finite = reg.status == risk.STATUS_FINITE
    tmin = fmt(reg.times[finite].min()) if finite.any() else "none"
    print(f"{int(finite.sum())}/{finite.size} cells reach {args.limit} C, fastest {tmin} s -> {csv_path}")
    return 0


def cmd_prob(args):
    _fill(args, wind=False)
    cond = _conductor(args)
    ctx = _context(args)
    rose = _load_rose(args)
    rows = []
    for n in args.bins:
        p = risk.overtemp_probability(cond, ctx, args.current, args.limit, rose, risk.BinningSpec(n, n))
        rows.append((f"{n}x{n}", p))
    out = _outdir(args)
    path = _write_rows(out / "probability.csv", ["binning", "probability"], rows)
    print("  ".join(f"{b}: {fmt(p)}" for b, p in rows) + f" -> {path}")
    return 0


def cmd_segment(args):
    routes = geo.load_network(args.network)
    segs = geo.segment_network(routes, args.max_length)
    out = _outdir(args)
    if args.format == "json":
        path = _json(out / "segments.json", {"schema_version": 1, "segments": [
            {"segment_id": s.segment_id, "line_id": s.line_id, "lat": s.midpoint[0], "lon": s.midpoint[1],
             "azimuth_deg": s.azimuth, "length_km": s.length_km, "conductor_name": s.conductor_name}
            for s in segs]})
    else:
        path = _write_rows(out / "segments.csv",
                           ["segment_id", "line_id", "lat", "lon", "azimuth_deg", "length_km", "conductor_name"],
                           ((s.segment_id, s.line_id, float(s.midpoint[0]), float(s.midpoint[1]), float(s.azimuth),
                             float(s.length_km), s.conductor_name) for s in segs))
    print(f"{len(routes)} lines -> {len(segs)} segments -> {path}")
    return 0


def _load_weather(path):
    series = geo.load_weather_series(path)
    for w in series.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return series


def cmd_cluster(args):
    routes = geo.load_network(args.network)
    series = _load_weather(args.weather)
    cfg = batch.BatchConfig(max_segment_length=args.max_length)
    system = batch.prepare_system(routes, series, load_catalog(args.catalog) if args.catalog else None, cfg)
    if not 0 <= args.snapshot < len(series):
        raise ValueError(f"snapshot {args.snapshot} outside 0..{len(series) - 1}")
    env = system.envs[args.snapshot]
    spec = clustering.ClusterSpec(k=args.k, seed=args.seed)
    lat = np.array([s.midpoint[0] for s in system.segments])
    lon = np.array([s.midpoint[1] for s in system.segments])
    feats = clustering.segment_features(lat, lon, env.ambient_temp, env.wind_speed, env.wind_direction,
                                        system.azimuth, system.conductor_names, spec)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = clustering.cluster_segments(feats, spec)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    q = clustering.cluster_quality(res.assignments, env.ambient_temp, env.wind_speed, env.wind_direction, res.k)
    out = _outdir(args)
    path, _ = clustering.write_clusters_csv(out / "clusters.csv", system.segment_ids, res)
    _json(out / "cluster_quality.json", {"schema_version": 1, **q.summary(), "iterations": res.iterations,
                                         "inertia": res.inertia_history})
    s = q.summary()
    print(f"{system.n_segments} segments -> {res.k} clusters, {s['violating']} over spread targets -> {path}")
    return 0


def cmd_batch(args):
    routes = geo.load_network(args.network)
    series = _load_weather(args.weather)
    states = batch.load_states(args.states) if args.states else []
    spec = None
    if args.k:
        spec = clustering.ClusterSpec(k=args.k, seed=args.seed)
    cfg = batch.BatchConfig(form=args.form, mode=args.mode, max_segment_length=args.max_length, clustering=spec,
                            interpolation=args.interpolation, refine_flagged=args.refine)
    catalog = load_catalog(args.catalog) if args.catalog else None
    report = batch.run_batch(routes, series, states, cfg, catalog)
    out = _outdir(args)
    batch.write_report_json(report, out / "report.json")
    if report.results:
        batch.write_traces_csv(list(report.results.values()), out / "traces.csv")
    if report.refined:
        batch.write_traces_csv(list(report.refined.values()), out / "traces_refined.csv")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{report.timings['segments']} segments, {report.model_count} models, {len(states)} states, "
          f"{len(report.flagged)} over-limit pairs -> {out / 'report.json'}")
    return 0


def traces_from_csv(path, state_id=None, limit=100.0) -> batch.StateTraces:
    """Rebuild one state's traces from a trace CSV; crossings are read off the samples."""
    rows = read_trace_csv(path)
    if not rows:
        raise ValueError(f"{path}: no trace rows")
    state_id = state_id or rows[0][1]
    rows = [r for r in rows if r[1] == state_id]
    if not rows:
        raise ValueError(f"{path}: no rows for state {state_id!r}")
    ids = list(dict.fromkeys(r[0] for r in rows))
    t = np.array(sorted({r[2] for r in rows}))
    temp = np.full((len(ids), t.size), np.nan)
    pos = {s: i for i, s in enumerate(ids)}
    tpos = {v: k for k, v in enumerate(t)}
    for sid, _, ts, v in rows:
        temp[pos[sid], tpos[ts]] = v
    if np.isnan(temp).any():
        raise ValueError(f"{path}: segments do not share one time axis")
    over = np.asarray(crossing_time(TemperatureTrace(t, temp), limit), dtype=float)
    return batch.StateTraces(state_id, ids, t, temp, np.where(np.isfinite(over), over, np.nan))


def cmd_snapshot(args):
    traces = traces_from_csv(args.traces, args.state, args.limit)
    snap = batch.snapshot_at(traces, args.time)
    out = _outdir(args)
    if args.format == "json":
        path = _json(out / "snapshot.json", {"schema_version": 1, "t_s": snap.t, "state_id": traces.state_id,
                                            "segments": [{"segment_id": s, "temp_c": float(v), "over_limit": bool(o)}
                                                         for s, v, o in zip(snap.segment_ids, snap.temp,
                                                                            snap.over_limit)]})
    else:
        path = _write_rows(out / "snapshot.csv", ["segment_id", "temp_c", "over_limit"],
                           ((s, float(v), int(o)) for s, v, o in zip(snap.segment_ids, snap.temp, snap.over_limit)))
    print(f"t = {fmt(snap.t)} s: {int(snap.over_limit.sum())}/{len(snap.segment_ids)} segments over limit -> {path}")
    return 0


def cmd_fixture(args):
    """Write the synthetic network, weather and states used in the examples."""
    routes = scenarios.synthetic_network(args.lines, args.seed)
    series = scenarios.synthetic_weather(seed=args.seed)
    states = scenarios.synthetic_states(routes, args.states, args.seed)
    out = _outdir(args)
    geo.save_network(routes, out / "network.json")
    geo.write_weather_series(series, out / "weather.csv")
    batch.save_states(states, out / "states.json")
    print(f"{len(routes)} lines, {len(series)} snapshots, {len(states)} states -> {out}")
    return 0


# -- parser --------------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors: exit 1, not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(suppress):
    c = _Parser(add_help=False)
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    c.add_argument("--output-dir", default=d(None), help=f"output directory (default ${OUTPUT_ENV} or .)")
    c.add_argument("--threads", type=int, default=d(os.cpu_count() or 1),
                   help="worker threads (default: available CPUs)")
    c.add_argument("--seed", type=int, default=d(0))
    c.add_argument("--catalog", default=d(None), help="conductor catalog JSON (default: packaged catalog)")
    return c


def build_parser():
    p = _Parser(prog="linetemp", description="Transmission-line conductor temperature tools.",
                epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter, parents=[_common(False)])
    sub = p.add_subparsers(dest="command", required=True)
    common = _common(True)

    s = sub.add_parser("steady", parents=[common], help="steady-state temperature")
    _env_args(s)
    s.set_defaults(func=cmd_steady)

    s = sub.add_parser("evolve", parents=[common], help="RK4 vs closed-form traces with error statistics")
    _env_args(s)
    s.add_argument("--hours", type=float, default=2.0)
    s.add_argument("--step", type=float, default=5.0)
    s.add_argument("--threshold", type=float, nargs="*", help="temperatures for the timing statistics")
    s.add_argument("--name", default="evolve")
    s.set_defaults(func=cmd_evolve)

    s = sub.add_parser("update-current", parents=[common], help="accuracy of re-targeting fitted models to other currents")
    _env_args(s)
    s.add_argument("--reference", type=float, nargs="*", help="reference currents (default 150%% and 180%% of rating)")
    s.add_argument("--new-current", help="currents to test, start:stop:step or list (default 0-200%% in 50 A)")
    s.add_argument("--hours", type=float, default=2.0)
    s.set_defaults(func=cmd_update_current)

    s = sub.add_parser("region", parents=[common], help="time-to-limit map over wind direction and speed")
    _env_args(s, wind=False)
    s.add_argument("--limit", type=float, default=100.0)
    s.add_argument("--directions", default="0:355:5")
    s.add_argument("--speeds", default="0.1:3:0.1")
    s.add_argument("--min-speed", type=float, default=0.05)
    s.add_argument("--form", choices=["first_order", "riccati"], default="first_order")
    s.add_argument("--wind-rose", help="wind rose JSON or 'fixture' to attach the probability overlay")
    s.set_defaults(func=cmd_region)

    s = sub.add_parser("prob", parents=[common], help="over-temperature probability under a wind rose")
    _env_args(s, wind=False)
    s.add_argument("--limit", type=float, default=100.0)
    s.add_argument("--wind-rose", default="fixture")
    s.add_argument("--bins", type=int, nargs="+", default=[25, 50, 100, 200, 500])
    s.set_defaults(func=cmd_prob)

    s = sub.add_parser("segment", parents=[common], help="split network lines into segments")
    s.add_argument("--network", required=True)
    s.add_argument("--max-length", type=float, default=3.0, help="km")
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("cluster", parents=[common], help="k-means clustering of segments at one snapshot")
    s.add_argument("--network", required=True)
    s.add_argument("--weather", required=True)
    s.add_argument("--snapshot", type=int, default=0)
    s.add_argument("--k", type=int, default=500)
    s.add_argument("--max-length", type=float, default=3.0)
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("batch", parents=[common], help="network-wide evaluation of operation states")
    s.add_argument("--network", required=True)
    s.add_argument("--weather", required=True)
    s.add_argument("--states", help="states JSON (omit for parameters only)")
    s.add_argument("--k", type=int, help="cluster count (default: no clustering)")
    s.add_argument("--mode", choices=list(batch.MODES), default="screen_15min")
    s.add_argument("--form", choices=["first_order", "riccati"], default="riccati")
    s.add_argument("--interpolation", choices=["nearest", "bilinear"], default="nearest")
    s.add_argument("--max-length", type=float, default=3.0)
    s.add_argument("--refine", action="store_true", help="dense traces for flagged pairs")
    s.set_defaults(func=cmd_batch)

    s = sub.add_parser("snapshot", parents=[common], help="temperature map at one time from a trace CSV")
    s.add_argument("--traces", required=True)
    s.add_argument("--time", type=float, required=True, help="seconds from series start")
    s.add_argument("--state", help="state id (default: first in file)")
    s.add_argument("--limit", type=float, default=100.0)
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.set_defaults(func=cmd_snapshot)

    s = sub.add_parser("fixture", parents=[common], help="write the synthetic network, weather and states")
    s.add_argument("--lines", type=int, default=100)
    s.add_argument("--states", type=int, default=10)
    s.set_defaults(func=cmd_fixture)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        with np.errstate(all="ignore"):
            return args.func(args)
    except NUMERICAL_ERRORS as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except (INPUT_ERRORS + (batch.OutOfRange, geo.OutOfBounds, geo.ParseError, geo.SchemaError)) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"error: {type(e).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
