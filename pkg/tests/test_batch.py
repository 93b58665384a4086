from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from linetemp.batch import (
    BASE_STATE,
    BatchConfig,
    MissingParameters,
    OperationState,
    OutOfRange,
    StateTraces,
    UnknownLine,
    evaluate_state,
    generate_parameters,
    load_states,
    oracle_state,
    prepare_system,
    run_batch,
    save_states,
    snapshot_at,
    write_report_json,
)
from linetemp.clustering import ClusterSpec
from linetemp.geo import GridSpec, LineRoute, WeatherSeries, WeatherSnapshot, segment_network, uv_from_wind
from linetemp.scenarios import synthetic_network, synthetic_states, synthetic_weather


def constant_weather(n, temp=20.0, speed=1.0, direction=270.0, solar=0.0, step_minutes=15):
    grid = GridSpec(39.0, -76.0, 1.0, 1.0, 4, 4)
    ones = np.ones((4, 4))
    u, v = uv_from_wind(speed * ones, direction)
    t0 = datetime(2023, 7, 1, 3, tzinfo=timezone.utc)
    alt = 40.0 if solar > 0 else -20.0
    return WeatherSeries([
        WeatherSnapshot(t0 + timedelta(minutes=step_minutes * k), grid, temp * ones, u, v, solar * ones,
                        alt * ones, 180.0 * ones)
        for k in range(n)
    ])


def short_line(current=800.0, km_deg=0.02):
    return LineRoute("A", [(40.5, -74.5), (40.5 + km_deg, -74.5)], "Drake", current)


@pytest.fixture(scope="module")
def small():
    routes = synthetic_network(4, seed=3)
    series = synthetic_weather(9)
    system = prepare_system(routes, series)
    seg = np.arange(0, system.n_segments, max(1, system.n_segments // 10))[:10]
    return routes, series, system, seg


def test_single_model():
    series = constant_weather(1)
    system = prepare_system([short_line()], series)
    assert system.n_segments == 1
    store = generate_parameters(system, BatchConfig(reference_multipliers=(1.0,)))
    assert store.model_count == 1
    assert store.failure_count == 0
    tr = evaluate_state(store, system, BASE_STATE)
    assert tr.temp.shape == (1, 1)


def test_store_shape_and_count():
    routes = synthetic_network(20, seed=1)
    series = synthetic_weather(73)
    segs = segment_network(routes)[:100]
    system = prepare_system(routes, series, segments=segs)
    store = generate_parameters(system)
    assert store.q.shape == (73, 100, 2)
    assert store.model_count == 14600
    assert store.failure_count == 0
    assert set(store.timings) == {"parameter_generation_s", "clustering_s"}


def test_base_state_starts_in_equilibrium():
    system = prepare_system([short_line()], constant_weather(5))
    store = generate_parameters(system)
    tr = evaluate_state(store, system, BASE_STATE, "trace_5s")
    # steady weather and base current: nothing moves
    assert np.ptp(tr.temp) < 1e-6


def test_zero_current_cools_to_ambient():
    system = prepare_system([short_line()], constant_weather(9, temp=20.0))
    store = generate_parameters(system, initial_temps=80.0)
    off = OperationState("off", {"A": 0.0})
    tr = evaluate_state(store, system, off, "trace_5s")
    assert np.all(np.diff(tr.temp[0]) <= 1e-9)
    assert tr.temp[0, -1] < 21.0
    ref = oracle_state(system, off, 80.0, dense=True)
    assert np.max(np.abs(tr.temp - ref.temp)) < 0.5


def test_dense_traces_track_oracle(small):
    routes, series, system, seg = small
    store = generate_parameters(system)
    states = synthetic_states(routes, 3, seed=4)
    for st in states:
        fast = evaluate_state(store, system, st, "trace_5s", segments=seg)
        ref = oracle_state(system, st, store.initial_temp, seg, dense=True)
        assert np.array_equal(fast.t, ref.t)
        assert np.mean(np.abs(fast.temp - ref.temp)) < 0.15


def test_screen_matches_trace_at_boundaries(small):
    _, _, system, seg = small
    store = generate_parameters(system)
    st = OperationState("up", multipliers={r.line_id: 1.4 for r in system.routes})
    dense = evaluate_state(store, system, st, "trace_5s", segments=seg)
    coarse = evaluate_state(store, system, st, "screen_15min", segments=seg)
    idx = np.searchsorted(dense.t, coarse.t)
    assert np.allclose(dense.temp[:, idx], coarse.temp, atol=1e-9)


def test_traces_are_continuous(small):
    _, _, system, seg = small
    store = generate_parameters(system)
    st = OperationState("up", multipliers={r.line_id: 1.6 for r in system.routes})
    tr = evaluate_state(store, system, st, "trace_5s", segments=seg)
    jumps = np.abs(np.diff(tr.temp, axis=1))
    per_step = int(system.step_length / 5.0)
    boundary = jumps[:, per_step::per_step]
    assert boundary.max() <= 3 * np.median(jumps) + 0.05


def test_first_order_is_conservative_when_heating():
    system = prepare_system([short_line(800.0)], constant_weather(9, temp=40.0, speed=0.8, direction=0.0,
                                                                  solar=1000.0))
    store = generate_parameters(system, BatchConfig(form="first_order"), initial_temps=50.0)
    up = OperationState("up", {"A": 800.0})
    tr = evaluate_state(store, system, up, "trace_5s", BatchConfig(form="first_order"))
    ref = oracle_state(system, up, 50.0, dense=True)
    assert np.all(tr.temp >= ref.temp - 1e-6)


def test_fresh_fit_above_twice_base(small):
    routes, _, system, seg = small
    store = generate_parameters(system)
    st = OperationState("hot", multipliers={r.line_id: 2.4 for r in routes})
    fast = evaluate_state(store, system, st, "trace_5s", segments=seg)
    ref = oracle_state(system, st, store.initial_temp, seg, dense=True)
    assert np.mean(np.abs(fast.temp - ref.temp)) < 0.15


def test_clustered_store_is_consistent(small):
    _, _, system, _ = small
    cfg = BatchConfig(clustering=ClusterSpec(k=5, seed=0))
    store = generate_parameters(system, cfg)
    assert store.clustered
    for n in range(len(system.series)):
        k = store.n_units[n]
        reps = store.representative[n, :k]
        assert np.array_equal(store.unit_of[n, reps], np.arange(k))
        assert np.all(store.representative[n, k:] == -1)
    assert store.model_count < generate_parameters(system).model_count


def test_deterministic_runs(small):
    routes, series, system, _ = small
    states = synthetic_states(routes, 2, seed=1)
    a = run_batch(routes, series, states, system=system)
    b = run_batch(routes, series, states, system=system)
    for sid in a.results:
        assert np.array_equal(a.results[sid].temp, b.results[sid].temp)
    assert a.flagged == b.flagged


def test_no_states(small, tmp_path):
    routes, series, system, _ = small
    rep = run_batch(routes, series, [], system=system)
    assert rep.results == {}
    assert rep.timings["mean_state_s"] == 0.0
    assert write_report_json(rep, tmp_path / "r.json").exists()


def test_identical_states_agree(small):
    routes, series, system, _ = small
    s1 = OperationState("one", multipliers={routes[0].line_id: 1.3})
    s2 = OperationState("two", {routes[0].line_id: routes[0].base_current * 1.3})
    rep = run_batch(routes, series, [s1, s2], system=system)
    assert np.array_equal(rep.results["one"].temp, rep.results["two"].temp)


def test_snapshot_interpolates():
    tr = StateTraces("s", ["a", "b"], np.array([0.0, 10.0]), np.array([[20.0, 30.0], [50.0, 40.0]]),
                     np.array([np.nan, 4.0]))
    snap = snapshot_at(tr, 5.0)
    assert np.allclose(snap.temp, [25.0, 45.0])
    assert list(snap.over_limit) == [False, True]
    assert list(snapshot_at(tr, 2.0).over_limit) == [False, False]
    with pytest.raises(OutOfRange):
        snapshot_at(tr, 10.5)


def test_missing_parameters(small):
    routes, _, system, _ = small
    other = prepare_system(routes, synthetic_weather(5))
    store = generate_parameters(other)
    with pytest.raises(MissingParameters):
        evaluate_state(store, system, BASE_STATE)


def test_unknown_line(small):
    _, _, system, _ = small
    with pytest.raises(UnknownLine):
        system.currents(OperationState("x", {"nope": 100.0}))


def test_state_validation():
    with pytest.raises(ValueError):
        OperationState("x", {"A": -1.0})
    with pytest.raises(ValueError):
        OperationState("x", {"A": 1.0}, {"A": 2.0})
    with pytest.raises(ValueError):
        BatchConfig(mode="hourly")


def test_states_round_trip(tmp_path):
    states = [OperationState("a", {"L1": 500.0}, description="one"), OperationState("b", multipliers={"L2": 1.5})]
    path = save_states(states, tmp_path / "s.json")
    assert load_states(path) == states
