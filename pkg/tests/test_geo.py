import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linetemp.geo import (
    EARTH_RADIUS_KM,
    DegenerateRoute,
    GridSpec,
    LineRoute,
    OutOfBounds,
    ParseError,
    SchemaError,
    WeatherSeries,
    WeatherSnapshot,
    haversine_km,
    initial_bearing,
    load_network,
    load_weather_series,
    parse_timestamp,
    sample_environment,
    save_network,
    segment_line,
    segment_network,
    uv_from_wind,
    wind_from_uv,
    write_weather_series,
)
from linetemp.scenarios import synthetic_network, synthetic_weather

KM_PER_DEG = EARTH_RADIUS_KM * math.pi / 180.0


def test_ten_km_leg_into_four():
    route = LineRoute("L1", [(43.0, -75.0), (43.0 + 10.0 / KM_PER_DEG, -75.0)])
    segs = segment_line(route, 3.0)
    assert len(segs) == 4
    assert all(s.length_km == pytest.approx(2.5, abs=1e-9) for s in segs)
    assert [s.segment_id for s in segs] == ["L1:0", "L1:1", "L1:2", "L1:3"]
    assert all(s.azimuth == pytest.approx(0.0, abs=1e-9) for s in segs)


def test_exact_multiple_is_not_split_further():
    route = LineRoute("L1", [(0.0, 0.0), (9.0 / KM_PER_DEG, 0.0)])
    assert len(segment_line(route, 3.0)) == 3


def test_haversine_and_bearing():
    assert haversine_km(0, 0, 1, 0) == pytest.approx(KM_PER_DEG, rel=1e-12)
    assert initial_bearing(0, 0, 1, 0) == pytest.approx(0.0)
    assert initial_bearing(0, 0, 0, 1) == pytest.approx(90.0)
    assert initial_bearing(0, 1, 0, 0) == pytest.approx(270.0)


def test_axis_folded_to_half_circle():
    west = segment_line(LineRoute("W", [(10.0, 0.5), (10.0, 0.0)]))[-1]
    east = segment_line(LineRoute("E", [(10.0, 0.0), (10.0, 0.5)]))[0]
    assert west.midpoint == pytest.approx(east.midpoint)
    assert 0.0 <= west.azimuth < 180.0
    assert west.azimuth == pytest.approx(east.azimuth, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.floats(-60, 60), st.floats(-170, 170), st.floats(0.01, 1.0), st.floats(0, 360), st.floats(0.5, 10.0))
def test_segments_cover_leg(lat, lon, deg, heading, max_len):
    h = math.radians(heading)
    end = (lat + deg * math.cos(h), lon + deg * math.sin(h))
    if haversine_km(lat, lon, *end) < 1e-3:
        return
    route = LineRoute("X", [(lat, lon), end])
    segs = segment_line(route, max_len)
    total = sum(s.length_km for s in segs)
    assert total == pytest.approx(route.length_km, rel=1e-9)
    assert all(s.length_km <= max_len + 1e-9 for s in segs)
    assert len(segs) == max(1, math.ceil(route.length_km / max_len - 1e-9))


def test_degenerate_routes():
    with pytest.raises(DegenerateRoute):
        LineRoute("A", [(1.0, 1.0)])
    with pytest.raises(DegenerateRoute):
        LineRoute("A", [(1.0, 1.0), (1.0, 1.0)])
    with pytest.raises(ValueError):
        segment_line(LineRoute("A", [(0.0, 0.0), (1.0, 0.0)]), 0.0)


def test_network_round_trip(tmp_path):
    routes = synthetic_network(5, seed=2)
    path = save_network(routes, tmp_path / "net.json")
    assert load_network(path) == routes


def test_network_schema_errors(tmp_path):
    p = tmp_path / "net.json"
    p.write_text('{"schema_version": 2, "lines": []}')
    with pytest.raises(SchemaError):
        load_network(p)
    p.write_text('{"schema_version": 1, "lines": [{"id": "A", "waypoints": [[0, 0], [1, 1]]}]}')
    with pytest.raises(SchemaError, match="conductor_name"):
        load_network(p)
    p.write_text('{"schema_version": 1,\n "lines": [}')
    with pytest.raises(ParseError, match="line 2"):
        load_network(p)


def test_wind_vector_convention():
    # a north wind blows toward the south
    u, v = uv_from_wind(5.0, 0.0)
    assert u == pytest.approx(0.0, abs=1e-12) and v == pytest.approx(-5.0)
    speed, direction = wind_from_uv(-3.0, 0.0)
    assert speed == 3.0 and direction == pytest.approx(90.0)


@given(st.floats(0.01, 30), st.floats(0, 359.99))
def test_wind_vector_round_trip(speed, direction):
    s, d = wind_from_uv(*uv_from_wind(speed, direction))
    assert s == pytest.approx(speed, rel=1e-9)
    assert min(abs(d - direction), 360 - abs(d - direction)) < 1e-6


def test_timestamps_are_utc():
    assert parse_timestamp("2023-07-15T10:00:00Z") == datetime(2023, 7, 15, 10, tzinfo=timezone.utc)
    assert parse_timestamp("2023-07-15T10:00:00") == datetime(2023, 7, 15, 10, tzinfo=timezone.utc)
    assert parse_timestamp("2023-07-15T12:00:00+02:00") == datetime(2023, 7, 15, 10, tzinfo=timezone.utc)


def test_fixture_spans_eighteen_hours(tmp_path):
    series = synthetic_weather()
    assert len(series) == 73
    assert series.step_s == 900.0
    assert series.span_hours == 18.0
    path = write_weather_series(series, tmp_path / "w.csv")
    back = load_weather_series(path)
    assert len(back) == 73 and back.span_hours == 18.0
    assert np.allclose(back[10].grid.lats, series[10].grid.lats)
    assert np.allclose(back[10].grid.lons, series[10].grid.lons)
    assert np.allclose(back[10].temp, series[10].temp, rtol=1e-5)


def _small_series(n=3):
    grid = GridSpec(40.0, -80.0, 0.5, 0.5, 3, 4)
    LA, LO = np.meshgrid(grid.lats, grid.lons, indexing="ij")
    t0 = datetime(2023, 7, 1, 12, tzinfo=timezone.utc)
    snaps = []
    for k in range(n):
        u, v = uv_from_wind(2.0 + 0 * LA, 270.0)
        snaps.append(WeatherSnapshot(t0 + timedelta(minutes=15 * k), grid, 20.0 + LA - 40.0 + 2.0 * (LO + 80.0) + k,
                                     u, v, 500.0 + 0 * LA, 60.0 + 0 * LA, 180.0 + 0 * LA))
    return WeatherSeries(snaps)


def test_out_of_order_rows_sorted(tmp_path):
    path = write_weather_series(_small_series(), tmp_path / "w.csv")
    lines = path.read_text().splitlines()
    head, rows = lines[:2], lines[2:]
    # move the last snapshot's rows to the top
    shuffled = rows[24:] + rows[:24]
    path.write_text("\n".join(head + shuffled) + "\n")
    series = load_weather_series(path)
    assert series.warnings
    assert np.all(np.diff(series.times_s) > 0)


def test_duplicate_rows_rejected(tmp_path):
    path = write_weather_series(_small_series(), tmp_path / "w.csv")
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines + [lines[3]]) + "\n")
    with pytest.raises(ParseError, match="duplicate"):
        load_weather_series(path)


def test_missing_column(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("timestamp_iso8601,lat,lon,temp_c,wind_u_ms,wind_v_ms\n2023-07-01T00:00:00Z,0,0,20,1,1\n")
    with pytest.raises(SchemaError, match="solar_wm2"):
        load_weather_series(p)


def test_bad_number_reports_line(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("# comment\ntimestamp_iso8601,lat,lon,temp_c,wind_u_ms,wind_v_ms,solar_wm2\n"
                 "2023-07-01T00:00:00Z,0,0,warm,1,1,0\n")
    with pytest.raises(ParseError, match="line 3"):
        load_weather_series(p)


def test_irregular_grid(tmp_path):
    p = tmp_path / "w.csv"
    rows = ["timestamp_iso8601,lat,lon,temp_c,wind_u_ms,wind_v_ms,solar_wm2"]
    for lat in (0.0, 1.0, 3.0):
        rows.append(f"2023-07-01T00:00:00Z,{lat},0,20,1,1,0")
    p.write_text("\n".join(rows) + "\n")
    with pytest.raises(SchemaError, match="regularly"):
        load_weather_series(p)


def test_sun_angles_filled_when_absent(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("timestamp_iso8601,lat,lon,temp_c,wind_u_ms,wind_v_ms,solar_wm2\n"
                 "2023-07-01T17:00:00Z,40,-75,25,1,1,800\n")
    snap = load_weather_series(p)[0]
    # 17:00 UTC at 75 W is local solar noon
    assert float(snap.sun_az[0, 0]) == pytest.approx(180.0, abs=1.0)
    assert float(snap.sun_alt[0, 0]) > 60.0


def test_bilinear_exact_on_linear_field():
    snap = _small_series(1)[0]
    env = sample_environment(snap, (np.array([40.25, 40.7]), np.array([-79.6, -78.9])), "bilinear")
    want = 20.0 + np.array([0.25, 0.7]) + 2.0 * np.array([0.4, 1.1])
    assert np.allclose(env.ambient_temp, want)
    assert np.allclose(env.wind_speed, 2.0)
    assert np.allclose(env.wind_direction, 270.0)


def test_nearest_clamps_and_bilinear_refuses():
    snap = _small_series(1)[0]
    env = sample_environment(snap, (50.0, -100.0), "nearest")
    assert float(env.ambient_temp) == pytest.approx(snap.temp[-1, 0])
    with pytest.raises(OutOfBounds):
        sample_environment(snap, (50.0, -100.0), "bilinear")
    with pytest.raises(ValueError):
        sample_environment(snap, (40.0, -80.0), "cubic")


def test_series_must_increase():
    s = _small_series(2)
    with pytest.raises(SchemaError):
        WeatherSeries([s[1], s[0]])


def test_synthetic_network_size():
    routes = synthetic_network(100, seed=0)
    segs = segment_network(routes)
    assert len(segs) >= 2000
    assert len({s.segment_id for s in segs}) == len(segs)
