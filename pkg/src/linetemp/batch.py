"""Network-wide temperature evolution over a weather series and many operation states.

Cooling-rate parameters are fitted once per weather snapshot and per segment
(or per cluster of similar segments) at a couple of reference currents.  Any
operation state is then evaluated by shifting the nearest reference to the
state's current and chaining closed-form solutions from one weather step to
the next.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .analytic import (
    LinearizedModel,
    SolverConfig,
    eval_first_order,
    eval_riccati,
    solve_steady_state,
    time_to_threshold,
)
from .clustering import ClusterSpec, kmeans, segment_features
from .conductor import beta_of_temp, get_conductor, load_catalog, q_si, stack_conductors, take
from .geo import LineRoute, Segment, WeatherSeries, sample_environment, segment_network
from .oracle import IntegrationConfig, crossing_time, integrate, integrate_schedule, write_trace_csv

SCHEMA_VERSION = 1
MODES = ("trace_5s", "screen_15min")


class MissingParameters(KeyError):
    pass


class OutOfRange(ValueError):
    pass


class UnknownLine(ValueError):
    pass


@dataclass(frozen=True)
class OperationState:
    """Line currents for one operating condition.

    ``line_currents`` gives absolute amperes per line (summed over the
    bundle); ``multipliers`` scale a line's base current.  Lines named in
    neither keep their base current.
    """

    state_id: str
    line_currents: Mapping = field(default_factory=dict)
    multipliers: Mapping = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        for k, v in {**self.line_currents, **self.multipliers}.items():
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"state {self.state_id}: line {k} has invalid current {v}")
        both = set(self.line_currents) & set(self.multipliers)
        if both:
            raise ValueError(f"state {self.state_id}: lines {sorted(both)} given twice")

    def line_amps(self, routes: Sequence[LineRoute]) -> np.ndarray:
        ids = {r.line_id for r in routes}
        unknown = (set(self.line_currents) | set(self.multipliers)) - ids
        if unknown:
            raise UnknownLine(f"state {self.state_id}: unknown lines {sorted(unknown)}")
        return np.array([
            self.line_currents.get(r.line_id, r.base_current * self.multipliers.get(r.line_id, 1.0))
            for r in routes
        ], dtype=float)


BASE_STATE = OperationState("base", description="base currents")


def load_states(path) -> list[OperationState]:
    """States JSON: a list (or {"schema_version": 1, "states": [...]}) of
    {state_id, description, line_currents | multipliers}."""
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, dict):
        if doc.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise ValueError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
        doc = doc.get("states", [])
    out = []
    for i, rec in enumerate(doc):
        if "state_id" not in rec:
            raise ValueError(f"{path}: states[{i}] missing field 'state_id'")
        out.append(OperationState(str(rec["state_id"]), dict(rec.get("line_currents", {})),
                                  dict(rec.get("multipliers", {})), rec.get("description", "")))
    return out


def save_states(states: Sequence[OperationState], path):
    doc = {"schema_version": SCHEMA_VERSION, "states": [
        {"state_id": s.state_id, "description": s.description,
         **({"line_currents": dict(s.line_currents)} if s.line_currents else {}),
         **({"multipliers": dict(s.multipliers)} if s.multipliers else {})}
        for s in states
    ]}
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    return Path(path)


@dataclass(frozen=True)
class BatchConfig:
    reference_multipliers: tuple = (1.0, 1.8)
    fresh_solve_ratio: float = 2.0  # states above this multiple of base get their own fit
    form: str = "riccati"
    mode: str = "screen_15min"
    step: float = 5.0
    max_segment_length: float = 3.0
    interpolation: str = "nearest"
    clustering: ClusterSpec | None = None
    current_band: float = 100.0  # A per subconductor; cluster units never mix bands
    solver: SolverConfig = SolverConfig()
    refine_flagged: bool = False  # re-run flagged (segment, state) pairs as dense traces

    def __post_init__(self):
        if not self.reference_multipliers or min(self.reference_multipliers) < 0:
            raise ValueError("reference multipliers must be non-empty and >= 0")
        if self.form not in ("first_order", "riccati"):
            raise ValueError(f"unknown form {self.form!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.step > 0 or not self.current_band > 0:
            raise ValueError("step and current_band must be > 0")

    def echo(self):
        d = asdict(self)
        d["reference_multipliers"] = list(self.reference_multipliers)
        return d


# -- system preparation ---------------------------------------------------------------

@dataclass
class System:
    """Segments with their conductors and the weather sampled at every snapshot."""

    routes: list
    segments: list
    series: WeatherSeries
    conductors: object  # stacked Conductor, one entry per segment
    conductor_names: np.ndarray
    azimuth: np.ndarray
    base_current: np.ndarray  # per subconductor
    bundle: np.ndarray
    line_index: np.ndarray
    envs: list  # stacked EnvironmentSample per snapshot

    @property
    def segment_ids(self):
        return [s.segment_id for s in self.segments]

    @property
    def n_segments(self):
        return len(self.segments)

    @property
    def step_length(self):
        return self.series.step_s

    @property
    def n_steps(self):
        """Weather steps between consecutive snapshots."""
        return len(self.series) - 1

    @property
    def limits(self):
        return np.asarray(self.conductors.max_temp, dtype=float)

    def currents(self, state: OperationState) -> np.ndarray:
        """Per-subconductor current of every segment under ``state``."""
        return state.line_amps(self.routes)[self.line_index] / self.bundle


def prepare_system(routes: Sequence[LineRoute], series: WeatherSeries, catalog=None,
                   config: BatchConfig = BatchConfig(), segments: Sequence[Segment] | None = None) -> System:
    if len(series) < 1:
        raise ValueError("weather series is empty")
    steps = np.diff(series.times_s)
    if steps.size and not np.allclose(steps, steps[0]):
        raise ValueError("weather snapshots must be evenly spaced")
    catalog = load_catalog() if catalog is None else catalog
    routes = list(routes)
    segments = list(segments) if segments is not None else segment_network(routes, config.max_segment_length)
    index = {r.line_id: i for i, r in enumerate(routes)}
    kinds = {}
    for s in segments:
        if s.conductor_name not in kinds:
            kinds[s.conductor_name] = get_conductor(s.conductor_name, catalog)
    conds = stack_conductors([kinds[s.conductor_name] for s in segments])
    lat = np.array([s.midpoint[0] for s in segments])
    lon = np.array([s.midpoint[1] for s in segments])
    envs = [sample_environment(snap, (lat, lon), config.interpolation) for snap in series]
    bundle = np.asarray(conds.bundle_count, dtype=float)
    line_index = np.array([index[s.line_id] for s in segments])
    base = np.array([routes[i].base_current for i in line_index]) / bundle
    return System(routes, segments, series, conds, np.array([s.conductor_name for s in segments]),
                  np.array([s.azimuth for s in segments]), base, bundle, line_index, envs)


# -- parameter store -----------------------------------------------------------------

@dataclass
class ParameterStore:
    """Fitted coefficients, shape (n_snapshots, n_units, n_references).

    A unit is a segment, or with clustering one (cluster, conductor type,
    current band) group represented by its most central member.
    """

    q: np.ndarray
    beta0: np.ndarray
    beta_slope: np.ndarray
    steady_temp: np.ndarray
    ref_current: np.ndarray
    failed: np.ndarray
    unit_of: np.ndarray  # (n_snapshots, n_segments)
    representative: np.ndarray  # (n_snapshots, n_units), -1 for padding
    n_units: np.ndarray
    initial_temp: np.ndarray  # (n_segments,)
    clustered: bool = False
    timings: dict = field(default_factory=dict)
    cluster_inertia: list = field(default_factory=list)

    @property
    def model_count(self):
        return int(self.n_units.sum()) * self.q.shape[2]

    @property
    def failure_count(self):
        return int(self.failed.sum())


def _fit(conductor, env, azimuth, current, initial_temp, config: SolverConfig):
    """(q, beta0, beta_slope, steady, failed) without raising on bad entries."""
    ss = solve_steady_state(conductor, env, azimuth, current, initial_temp, config, raise_on_failure=False)
    ta = np.asarray(env.ambient_temp, dtype=float)
    te = np.where(ss.converged, ss.temp, initial_temp)
    b_0 = beta_of_temp(conductor, env, azimuth, current, initial_temp)
    b_e = beta_of_temp(conductor, env, azimuth, current, te)
    span = te - initial_temp
    flat = np.abs(span) < 1e-9
    slope = np.where(flat, 0.0, (b_e - b_0) / np.where(flat, 1.0, span))
    slope = np.where(np.abs(slope) < config.degenerate_slope, 0.0, slope)
    b0 = b_0 - slope * (initial_temp - ta)
    q = np.asarray(q_si(conductor, env, azimuth, current), dtype=float)
    failed = ~np.asarray(ss.converged) | (b0**2 + 4 * slope * q < 0) | ~np.isfinite(slope)
    return q, b0, slope, te, failed


def _cluster_units(system: System, env, spec: ClusterSpec, band: float, seed_offset=0):
    lat = np.array([s.midpoint[0] for s in system.segments])
    lon = np.array([s.midpoint[1] for s in system.segments])
    feats = segment_features(lat, lon, env.ambient_temp, env.wind_speed, env.wind_direction,
                             system.azimuth, system.conductor_names, spec)
    res = kmeans(feats, spec.k, spec.seed + seed_offset, spec.max_iterations)
    codes = np.unique(system.conductor_names, return_inverse=True)[1]
    bands = np.floor(system.base_current / band).astype(int)
    _, unit_of = np.unique(np.column_stack([res.assignments, codes, bands]), axis=0, return_inverse=True)
    unit_of = unit_of.ravel()
    # representative: the member closest to its cluster centroid
    d = np.sum((feats - res.centroids[res.assignments]) ** 2, axis=1)
    order = np.lexsort((np.arange(d.size), d, unit_of))
    first = np.concatenate([[True], np.diff(unit_of[order]) != 0])
    reps = order[first]
    return unit_of, reps, res


def generate_parameters(system: System, config: BatchConfig = BatchConfig(), initial_temps=None) -> ParameterStore:
    """Fit cooling-rate parameters for every snapshot, unit and reference current.

    The start temperature of each fit follows the base-state trajectory, which
    is advanced step by step with the freshly fitted base-current models.
    ``initial_temps`` overrides the default start (steady state under the
    base currents and the first snapshot); it may be an array or a mapping
    segment_id -> temperature.
    """
    t_start = time.perf_counter()
    n_seg, n_snap = system.n_segments, len(system.series)
    mults = np.asarray(config.reference_multipliers, dtype=float)
    base = system.base_current
    env0 = system.envs[0]
    t0 = solve_steady_state(system.conductors, env0, system.azimuth, base, env0.ambient_temp, config.solver).temp
    t0 = np.array(np.broadcast_to(t0, (n_seg,)), dtype=float)
    if initial_temps is not None:
        if isinstance(initial_temps, Mapping):
            pos = {sid: i for i, sid in enumerate(system.segment_ids)}
            for sid, v in initial_temps.items():
                t0[pos[sid]] = v
        else:
            t0 = np.array(np.broadcast_to(np.asarray(initial_temps, dtype=float), (n_seg,)))

    units, reps, inertia = [], [], []
    t_cluster = 0.0
    for n in range(n_snap):
        if config.clustering is not None:
            tc = time.perf_counter()
            u, r, res = _cluster_units(system, system.envs[n], config.clustering, config.current_band, n)
            t_cluster += time.perf_counter() - tc
            inertia.append(res.inertia)
        else:
            u, r = np.arange(n_seg), np.arange(n_seg)
        units.append(u)
        reps.append(r)
    max_units = max(r.size for r in reps)
    shape = (n_snap, max_units, mults.size)
    store = ParameterStore(
        q=np.full(shape, np.nan), beta0=np.full(shape, np.nan), beta_slope=np.full(shape, np.nan),
        steady_temp=np.full(shape, np.nan), ref_current=np.full(shape, np.nan),
        failed=np.zeros(shape, dtype=bool), unit_of=np.stack(units),
        representative=np.full((n_snap, max_units), -1), n_units=np.array([r.size for r in reps]),
        initial_temp=t0, clustered=config.clustering is not None, cluster_inertia=inertia,
    )

    temps = t0.copy()
    for n in range(n_snap):
        r = reps[n]
        k = r.size
        store.representative[n, :k] = r
        cond = take(system.conductors, r)
        env = take(system.envs[n], r)
        for j, m in enumerate(mults):
            cur = base[r] * m
            q, b0, bt, te, bad = _fit(cond, env, system.azimuth[r], cur, temps[r], config.solver)
            store.q[n, :k, j], store.beta0[n, :k, j], store.beta_slope[n, :k, j] = q, b0, bt
            store.steady_temp[n, :k, j], store.failed[n, :k, j], store.ref_current[n, :k, j] = te, bad, cur
        if n < system.n_steps:
            out = _evaluate_step(store, system, n, np.arange(n_seg), base, temps, np.array([system.step_length]),
                                 config)
            temps = out[0][:, -1]
    elapsed = time.perf_counter() - t_start
    store.timings = {"parameter_generation_s": elapsed, "clustering_s": t_cluster}
    return store


# -- evaluation -------------------------------------------------------------------------

def _evaluate_step(store: ParameterStore, system: System, n, seg, current, temps, offsets, config: BatchConfig):
    """Advance segments ``seg`` through weather step ``n``.

    Returns (samples at ``offsets`` seconds into the step, crossing time of
    the conductor limit within the step or inf, count of oracle fallbacks).
    """
    units = store.unit_of[n, seg]
    refs = store.ref_current[n, units, :]
    j = np.argmin(np.abs(refs - current[:, None]), axis=1)
    pick = (n, units, j)
    q, b0, bt = store.q[pick], store.beta0[pick], store.beta_slope[pick]
    bad = store.failed[pick].copy()
    i_ref = refs[np.arange(seg.size), j]

    cond = take(system.conductors, seg)
    env = take(system.envs[n], seg)
    ta = np.asarray(env.ambient_temp, dtype=float)
    mcp = np.asarray(cond.heat_capacity)
    di2 = current**2 - i_ref**2
    q = q + di2 * cond.resistance(ta) / mcp
    b0 = b0 - di2 * np.asarray(cond.resistance_slope) / mcp

    fresh = current > config.fresh_solve_ratio * system.base_current[seg]
    if np.any(fresh):
        f = np.nonzero(fresh)[0]
        rep = store.representative[n, units[f]]
        fq, fb0, fbt, _, fbad = _fit(take(system.conductors, rep), take(system.envs[n], rep), system.azimuth[rep],
                                     current[f], temps[f], config.solver)
        q[f], b0[f], bt[f], bad[f] = fq, fb0, fbt, fbad

    with np.errstate(invalid="ignore"):
        bad |= ~np.isfinite(q + b0 + bt) | (b0**2 + 4 * bt * q < 0)
    q, b0, bt = np.where(bad, 0.0, q), np.where(bad, 1e-3, b0), np.where(bad, 0.0, bt)
    model = LinearizedModel.from_coefficients(ta, temps, q, b0, bt, current, config.solver.degenerate_slope)
    if config.form == "riccati":
        # the Riccati form is only valid for C' > -1; route the rest to the oracle
        bad |= np.asarray(model.c_prime) <= -1
        samples = np.asarray(eval_riccati(model, offsets)).reshape(seg.size, offsets.size)
    else:
        samples = np.asarray(eval_first_order(model, offsets)).reshape(seg.size, offsets.size)
    limits = system.limits[seg]
    cross = np.broadcast_to(np.asarray(time_to_threshold(model, limits, config.form), dtype=float), seg.shape).copy()

    if np.any(bad):
        b = np.nonzero(bad)[0]
        trace = integrate(take(system.conductors, seg[b]), take(system.envs[n], seg[b]), system.azimuth[seg[b]],
                          current[b], temps[b], IntegrationConfig(config.step, "rk4", system.step_length))
        idx = np.rint(offsets / config.step).astype(int)
        samples[b] = trace.temp[:, idx]
        cross[b] = crossing_time(trace, limits[b])
    return samples, cross, int(bad.sum())


@dataclass
class StateTraces:
    """Temperatures of many segments under one state; ``temp`` has shape (n_segments, n_times)."""

    state_id: str
    segment_ids: list
    t: np.ndarray
    temp: np.ndarray
    over_temperature_at: np.ndarray  # seconds, NaN where the limit is never reached
    fallbacks: int = 0

    @property
    def flagged(self):
        return np.nonzero(np.isfinite(self.over_temperature_at))[0]

    def rows(self):
        for i, sid in enumerate(self.segment_ids):
            for t, v in zip(self.t, self.temp[i]):
                yield sid, self.state_id, float(t), float(v)


def evaluate_state(store: ParameterStore, system: System, state: OperationState, mode=None,
                   config: BatchConfig = BatchConfig(), segments=None) -> StateTraces:
    """Chain closed-form solutions across the weather steps for one operation state.

    ``mode`` is "trace_5s" (samples every ``config.step`` seconds) or
    "screen_15min" (step boundaries only).  ``segments`` restricts the
    evaluation to a subset of segment indices.
    """
    mode = mode or config.mode
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if store.unit_of.shape != (len(system.series), system.n_segments):
        raise MissingParameters("parameter store does not cover this system and weather series")
    seg = np.arange(system.n_segments) if segments is None else np.asarray(segments, dtype=int)
    current = system.currents(state)[seg]
    temps = store.initial_temp[seg].copy()
    L = system.step_length
    if mode == "trace_5s":
        sub = int(round(L / config.step))
        offsets = np.arange(1, sub + 1) * config.step
    else:
        offsets = np.array([L])
    limits = system.limits[seg]
    over = np.where(temps >= limits, 0.0, np.nan)
    chunks = [temps[:, None]]
    fallbacks = 0
    for n in range(system.n_steps):
        samples, cross, nb = _evaluate_step(store, system, n, seg, current, temps, offsets, config)
        fallbacks += nb
        hit = np.isnan(over) & (cross <= L)
        over = np.where(hit, n * L + cross, over)
        chunks.append(samples)
        temps = samples[:, -1]
    t = np.concatenate([[0.0]] + [n * L + offsets for n in range(system.n_steps)])
    ids = system.segment_ids
    return StateTraces(state.state_id, [ids[i] for i in seg], t, np.hstack(chunks), over, fallbacks)


def oracle_state(system: System, state: OperationState, initial_temp, segments=None, step=5.0,
                 dense=False) -> StateTraces:
    """RK4 at ``step`` seconds on the same piecewise-constant weather, each segment with its own weather."""
    seg = np.arange(system.n_segments) if segments is None else np.asarray(segments, dtype=int)
    current = system.currents(state)[seg]
    envs = [take(e, seg) for e in system.envs[:system.n_steps]]
    t0 = np.asarray(initial_temp, dtype=float)[seg] if np.ndim(initial_temp) else np.full(seg.size, initial_temp)
    tr = integrate_schedule(take(system.conductors, seg), envs, system.azimuth[seg], current, t0,
                            system.step_length, step, "rk4", dense)
    over = crossing_time(tr, system.limits[seg])
    over = np.where(np.isfinite(over), over, np.nan)
    ids = system.segment_ids
    return StateTraces(state.state_id, [ids[i] for i in seg], tr.t, tr.temp, over)


# -- batch orchestration --------------------------------------------------------------------

@dataclass
class BatchReport:
    results: dict
    timings: dict
    model_count: int
    failures: int
    flagged: list  # (state_id, segment_id, seconds)
    config: dict
    refined: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_json(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "timings": self.timings,
            "model_count": self.model_count,
            "failures": self.failures,
            "states": list(self.results),
            "flagged": [{"state_id": s, "segment_id": g, "over_temperature_at_s": t} for s, g, t in self.flagged],
            "config": self.config,
            "warnings": self.warnings,
        }


def run_batch(routes, series, states: Sequence[OperationState], config: BatchConfig = BatchConfig(),
              catalog=None, initial_temps=None, system: System | None = None) -> BatchReport:
    """Segment, sample, fit, and evaluate every state; timings are wall-clock seconds."""
    t = time.perf_counter()
    system = system or prepare_system(routes, series, catalog, config)
    t_prep = time.perf_counter() - t
    store = generate_parameters(system, config, initial_temps)
    results, per_state, flagged, refined = {}, [], [], {}
    fallbacks = 0
    for st in states:
        t = time.perf_counter()
        res = evaluate_state(store, system, st, config.mode, config)
        per_state.append(time.perf_counter() - t)
        results[st.state_id] = res
        fallbacks += res.fallbacks
        for i in res.flagged:
            flagged.append((st.state_id, res.segment_ids[i], float(res.over_temperature_at[i])))
        if config.refine_flagged and config.mode == "screen_15min" and res.flagged.size:
            refined[st.state_id] = evaluate_state(store, system, st, "trace_5s", config, segments=res.flagged)
    timings = {
        "preparation_s": t_prep,
        "parameter_generation_s": store.timings["parameter_generation_s"],
        "clustering_s": store.timings["clustering_s"],
        "state_evaluation_s": per_state,
        "mean_state_s": float(np.mean(per_state)) if per_state else 0.0,
        "segments": system.n_segments,
        "snapshots": len(system.series),
    }
    return BatchReport(results, timings, store.model_count, store.failure_count + fallbacks, flagged,
                       config.echo(), refined, list(series.warnings))


def write_report_json(report: BatchReport, path):
    Path(path).write_text(json.dumps(report.to_json(), indent=1, sort_keys=True, default=_jsonable) + "\n")
    return Path(path)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    return str(x)


def write_traces_csv(traces: Sequence[StateTraces], path):
    return write_trace_csv(path, (row for tr in traces for row in tr.rows()))


# -- snapshots ---------------------------------------------------------------------------------

@dataclass
class SnapshotMap:
    t: float
    segment_ids: list
    temp: np.ndarray
    over_limit: np.ndarray


def snapshot_at(traces: StateTraces, t) -> SnapshotMap:
    """Temperature of every segment at time ``t`` (linear between samples).

    A segment is flagged once its recorded first crossing of the limit lies at or before ``t``.
    """
    t = float(t)
    if not (traces.t[0] - 1e-9 <= t <= traces.t[-1] + 1e-9):
        raise OutOfRange(f"t = {t} s outside the trace span [{traces.t[0]}, {traces.t[-1]}]")
    k = int(np.clip(np.searchsorted(traces.t, t, side="right") - 1, 0, traces.t.size - 2))
    t0, t1 = traces.t[k], traces.t[k + 1]
    w = (t - t0) / (t1 - t0)
    temp = traces.temp[:, k] * (1 - w) + traces.temp[:, k + 1] * w
    if w == 0.0:
        temp = traces.temp[:, k].copy()
    elif w == 1.0:
        temp = traces.temp[:, k + 1].copy()
    with np.errstate(invalid="ignore"):
        over = np.nan_to_num(traces.over_temperature_at, nan=np.inf) <= t
    return SnapshotMap(t, list(traces.segment_ids), temp, over)
