"""Line geometry, segmentation, and gridded weather ingestion.

Routes are polylines of (lat, lon) waypoints on a spherical Earth.  Weather
arrives as CSV rows, one per (timestamp, grid cell), and is sampled at
segment midpoints.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .conductor import EnvironmentSample, solar_geometry
from .oracle import fmt

EARTH_RADIUS_KM = 6371.0088
SCHEMA_VERSION = 1

REQUIRED_COLUMNS = ("timestamp_iso8601", "lat", "lon", "temp_c", "wind_u_ms", "wind_v_ms", "solar_wm2")
SUN_COLUMNS = ("sun_alt_deg", "sun_az_deg")


class DegenerateRoute(ValueError):
    pass


class OutOfBounds(ValueError):
    pass


class ParseError(ValueError):
    pass


class SchemaError(ValueError):
    pass


# -- geometry ---------------------------------------------------------------------

def haversine_km(lat1, lon1, lat2, lon2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dp / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def initial_bearing(lat1, lon1, lat2, lon2):
    """Bearing in degrees clockwise from north at the start point."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    y = np.sin(dl) * np.cos(p2)
    x = np.cos(p1) * np.sin(p2) - np.sin(p1) * np.cos(p2) * np.cos(dl)
    return np.mod(np.degrees(np.arctan2(y, x)), 360.0)


def _to_vec(lat, lon):
    la, lo = math.radians(lat), math.radians(lon)
    return np.array([math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la)])


def _from_vec(v):
    v = v / np.linalg.norm(v)
    return math.degrees(math.asin(max(-1.0, min(1.0, v[2])))), math.degrees(math.atan2(v[1], v[0]))


def great_circle_point(a, b, frac):
    """Point a fraction ``frac`` of the way from ``a`` to ``b`` along the great circle."""
    va, vb = _to_vec(*a), _to_vec(*b)
    omega = math.acos(max(-1.0, min(1.0, float(va @ vb))))
    if omega < 1e-12:
        return tuple(a)
    s = math.sin(omega)
    return _from_vec(math.sin((1 - frac) * omega) / s * va + math.sin(frac * omega) / s * vb)


@dataclass(frozen=True)
class LineRoute:
    line_id: str
    waypoints: tuple
    conductor_name: str = "Drake"
    base_current: float = 0.0

    def __post_init__(self):
        pts = tuple((float(a), float(b)) for a, b in self.waypoints)
        object.__setattr__(self, "waypoints", pts)
        if len(pts) < 2:
            raise DegenerateRoute(f"line {self.line_id}: needs at least 2 waypoints")
        for p, q in zip(pts, pts[1:]):
            if p == q:
                raise DegenerateRoute(f"line {self.line_id}: repeated waypoint {p}")
        if self.base_current < 0:
            raise ValueError(f"line {self.line_id}: negative base current")

    @property
    def length_km(self):
        return float(sum(haversine_km(*p, *q) for p, q in zip(self.waypoints, self.waypoints[1:])))


@dataclass(frozen=True)
class Segment:
    segment_id: str
    line_id: str
    midpoint: tuple
    azimuth: float
    length_km: float
    conductor_name: str
    base_current: float = 0.0
    cluster_id: int | None = None


def segment_line(route: LineRoute, max_segment_length=3.0) -> list[Segment]:
    """Split every leg of ``route`` into equal great-circle pieces of at most ``max_segment_length`` km.

    Azimuths are folded into [0, 180) since a conductor has an axis, not a heading.
    """
    if not max_segment_length > 0:
        raise ValueError("max_segment_length must be > 0")
    if route.length_km <= 0:
        raise DegenerateRoute(f"line {route.line_id} has zero length")
    out = []
    for a, b in zip(route.waypoints, route.waypoints[1:]):
        leg = float(haversine_km(*a, *b))
        n = max(1, math.ceil(leg / max_segment_length - 1e-9))
        for k in range(n):
            p = great_circle_point(a, b, k / n)
            q = great_circle_point(a, b, (k + 1) / n)
            mid = great_circle_point(a, b, (k + 0.5) / n)
            # tangent at the midpoint: mean of the bearings toward both ends, so reversing a leg keeps its axis
            fwd = np.radians(initial_bearing(*mid, *q))
            back = np.radians(initial_bearing(*mid, *p)) + np.pi
            az = float(np.degrees(np.arctan2(np.sin(fwd) + np.sin(back), np.cos(fwd) + np.cos(back))))
            out.append(Segment(
                segment_id=f"{route.line_id}:{len(out)}",
                line_id=route.line_id,
                midpoint=mid,
                azimuth=float(np.mod(round(az, 9), 180.0)),
                length_km=float(haversine_km(*p, *q)),
                conductor_name=route.conductor_name,
                base_current=route.base_current,
            ))
    return out


def segment_network(routes: Sequence[LineRoute], max_segment_length=3.0) -> list[Segment]:
    return [s for r in routes for s in segment_line(r, max_segment_length)]


def load_network(path) -> list[LineRoute]:
    """Read a network JSON: {"schema_version": 1, "lines": [{id, waypoints, conductor_name, base_current_amps}]}."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}: {e.msg}") from e
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    if "lines" not in doc:
        raise SchemaError(f"{path}: missing field 'lines'")
    routes = []
    for i, rec in enumerate(doc["lines"]):
        for key in ("id", "waypoints", "conductor_name", "base_current_amps"):
            if key not in rec:
                raise SchemaError(f"{path}: lines[{i}] missing field '{key}'")
        routes.append(LineRoute(str(rec["id"]), rec["waypoints"], rec["conductor_name"],
                                float(rec["base_current_amps"])))
    return routes


def save_network(routes: Sequence[LineRoute], path):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "lines": [
            {"id": r.line_id, "waypoints": [list(p) for p in r.waypoints],
             "conductor_name": r.conductor_name, "base_current_amps": r.base_current}
            for r in routes
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")
    return Path(path)


# -- wind vectors -----------------------------------------------------------------

def wind_from_uv(u, v):
    """(speed, direction) with direction the bearing the wind blows from."""
    u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    return np.hypot(u, v), np.mod(np.degrees(np.arctan2(-u, -v)), 360.0)


def uv_from_wind(speed, direction):
    d = np.radians(direction)
    return -np.asarray(speed) * np.sin(d), -np.asarray(speed) * np.cos(d)


# -- weather grids ----------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    lat0: float
    lon0: float
    dlat: float
    dlon: float
    nlat: int
    nlon: int

    def __post_init__(self):
        if self.nlat < 1 or self.nlon < 1:
            raise SchemaError("grid must have at least one cell")
        if (self.nlat > 1 and not self.dlat > 0) or (self.nlon > 1 and not self.dlon > 0):
            raise SchemaError("grid spacing must be > 0")

    @property
    def lats(self):
        return self.lat0 + self.dlat * np.arange(self.nlat)

    @property
    def lons(self):
        return self.lon0 + self.dlon * np.arange(self.nlon)


FIELDS = ("temp", "wind_u", "wind_v", "solar", "sun_alt", "sun_az")


@dataclass
class WeatherSnapshot:
    """One forecast time; every field is an array of shape (nlat, nlon)."""

    timestamp: datetime
    grid: GridSpec
    temp: np.ndarray
    wind_u: np.ndarray
    wind_v: np.ndarray
    solar: np.ndarray
    sun_alt: np.ndarray
    sun_az: np.ndarray

    def __post_init__(self):
        for name in FIELDS:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.grid.nlat, self.grid.nlon):
                raise SchemaError(f"field {name} has shape {arr.shape}, grid is {(self.grid.nlat, self.grid.nlon)}")
            setattr(self, name, arr)


@dataclass
class WeatherSeries:
    snapshots: list
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        ts = [s.timestamp for s in self.snapshots]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise SchemaError("snapshot timestamps must be strictly increasing")

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, i):
        return self.snapshots[i]

    def __iter__(self):
        return iter(self.snapshots)

    @property
    def times_s(self):
        """Seconds since the first snapshot."""
        t0 = self.snapshots[0].timestamp
        return np.array([(s.timestamp - t0).total_seconds() for s in self.snapshots])

    @property
    def span_hours(self):
        return float(self.times_s[-1] / 3600.0) if self.snapshots else 0.0

    @property
    def step_s(self):
        dt = np.diff(self.times_s)
        return float(dt[0]) if dt.size else 900.0


def parse_timestamp(text: str) -> datetime:
    ts = datetime.fromisoformat(text.strip().replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _regular_axis(values, name, where):
    vals = np.unique(values)
    if vals.size == 1:
        return float(vals[0]), 0.0, 1
    step = np.diff(vals)
    if not np.allclose(step, step[0], rtol=1e-6, atol=1e-9):
        raise SchemaError(f"{where}: {name} axis is not regularly spaced")
    return float(vals[0]), float(step[0]), vals.size


def sun_angles_at(timestamp: datetime, lat, lon):
    """Sun altitude/azimuth from UTC time, shifting to local solar time by longitude."""
    doy = timestamp.timetuple().tm_yday
    hour = timestamp.hour + timestamp.minute / 60.0 + timestamp.second / 3600.0
    return solar_geometry(lat, doy, np.mod(hour + np.asarray(lon) / 15.0, 24.0))


def load_weather_series(path) -> WeatherSeries:
    """Read a weather CSV into a time-sorted series of gridded snapshots.

    Lines starting with '#' are comments; ``# schema_version=N`` is checked when
    present.  Sun angle columns are optional and computed from time and
    position when absent.  Out-of-order timestamps are sorted with a warning;
    repeated (timestamp, cell) rows are rejected.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for n, line in enumerate(lines, start=1):
        s = line.strip()
        if s.startswith("#"):
            key, _, val = s[1:].partition("=")
            if key.strip() == "schema_version" and val.strip() != str(SCHEMA_VERSION):
                raise SchemaError(f"{path}: line {n}: unsupported schema_version {val.strip()!r}")
            continue
        if s:
            body.append((n, line))
    if not body:
        raise ParseError(f"{path}: empty weather file")
    header = next(csv.reader([body[0][1]]))
    header = [h.strip() for h in header]
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise SchemaError(f"{path}: missing field '{col}'")
    has_sun = all(c in header for c in SUN_COLUMNS)
    if not body[1:]:
        raise ParseError(f"{path}: no data rows")

    groups: dict[datetime, list] = {}
    order = []
    seen = set()
    for n, line in body[1:]:
        rec = next(csv.reader([line]))
        if len(rec) != len(header):
            raise ParseError(f"{path}: line {n}: expected {len(header)} fields, got {len(rec)}")
        row = dict(zip(header, rec))
        try:
            ts = parse_timestamp(row["timestamp_iso8601"])
            vals = {c: float(row[c]) for c in header if c != "timestamp_iso8601"}
        except ValueError as e:
            raise ParseError(f"{path}: line {n}: {e}") from e
        if not all(math.isfinite(v) for v in vals.values()):
            raise ParseError(f"{path}: line {n}: non-finite value")
        key = (ts, vals["lat"], vals["lon"])
        if key in seen:
            raise ParseError(f"{path}: line {n}: duplicate row for {ts.isoformat()} at ({vals['lat']}, {vals['lon']})")
        seen.add(key)
        if ts not in groups:
            groups[ts] = []
            order.append(ts)
        groups[ts].append(vals)

    warnings = []
    if order != sorted(order):
        warnings.append(f"{path}: timestamps out of order; sorted")
    snaps = []
    grid0 = None
    for ts in sorted(order):
        rows = groups[ts]
        where = f"{path}: {ts.isoformat()}"
        lat = np.array([r["lat"] for r in rows])
        lon = np.array([r["lon"] for r in rows])
        la0, dla, nla = _regular_axis(lat, "lat", where)
        lo0, dlo, nlo = _regular_axis(lon, "lon", where)
        grid = GridSpec(la0, lo0, dla, dlo, nla, nlo)
        if len(rows) != grid.nlat * grid.nlon:
            raise SchemaError(f"{where}: {len(rows)} cells do not fill a {grid.nlat}x{grid.nlon} grid")
        if grid0 is not None and grid != grid0:
            raise SchemaError(f"{where}: grid differs from the first snapshot")
        grid0 = grid
        i = np.rint((lat - grid.lat0) / (grid.dlat or 1.0)).astype(int)
        j = np.rint((lon - grid.lon0) / (grid.dlon or 1.0)).astype(int)
        arrays = {}
        for name, col in (("temp", "temp_c"), ("wind_u", "wind_u_ms"), ("wind_v", "wind_v_ms"), ("solar", "solar_wm2")):
            a = np.empty((grid.nlat, grid.nlon))
            a[i, j] = [r[col] for r in rows]
            arrays[name] = a
        if has_sun:
            for name, col in (("sun_alt", "sun_alt_deg"), ("sun_az", "sun_az_deg")):
                a = np.empty((grid.nlat, grid.nlon))
                a[i, j] = [r[col] for r in rows]
                arrays[name] = a
        else:
            LA, LO = np.meshgrid(grid.lats, grid.lons, indexing="ij")
            arrays["sun_alt"], arrays["sun_az"] = sun_angles_at(ts, LA, LO)
        snaps.append(WeatherSnapshot(ts, grid, **arrays))
    return WeatherSeries(snaps, warnings)


def write_weather_series(series, path):
    """Write a series in the CSV layout read by ``load_weather_series``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema_version={SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUIRED_COLUMNS + SUN_COLUMNS)
        for s in series:
            ts = s.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ")
            for i, la in enumerate(s.grid.lats):
                for j, lo in enumerate(s.grid.lons):
                    w.writerow([ts, f"{la:.10g}", f"{lo:.10g}"] + [fmt(getattr(s, f)[i, j]) for f in FIELDS])
    return path


def sample_environment(snapshot: WeatherSnapshot, point, mode="nearest", elevation=0.0) -> EnvironmentSample:
    """Weather at ``point`` = (lat, lon); arrays of points give an array-valued sample.

    ``nearest`` clamps to the grid edge; ``bilinear`` raises OutOfBounds
    outside the grid.  Winds are interpolated as (u, v) components and then
    converted to speed and meteorological direction.
    """
    g = snapshot.grid
    lat = np.asarray(point[0], dtype=float)
    lon = np.asarray(point[1], dtype=float)
    fi = (lat - g.lat0) / g.dlat if g.nlat > 1 else np.zeros_like(lat)
    fj = (lon - g.lon0) / g.dlon if g.nlon > 1 else np.zeros_like(lon)
    if mode == "nearest":
        i = np.clip(np.rint(fi), 0, g.nlat - 1).astype(int)
        j = np.clip(np.rint(fj), 0, g.nlon - 1).astype(int)

        def pick(a):
            return a[i, j]
    elif mode == "bilinear":
        tol = 1e-9
        if np.any(fi < -tol) or np.any(fi > g.nlat - 1 + tol) or np.any(fj < -tol) or np.any(fj > g.nlon - 1 + tol):
            raise OutOfBounds("point outside the weather grid")
        fi = np.clip(fi, 0, g.nlat - 1)
        fj = np.clip(fj, 0, g.nlon - 1)
        i0 = np.minimum(np.floor(fi).astype(int), max(g.nlat - 2, 0))
        j0 = np.minimum(np.floor(fj).astype(int), max(g.nlon - 2, 0))
        i1, j1 = np.minimum(i0 + 1, g.nlat - 1), np.minimum(j0 + 1, g.nlon - 1)
        wi, wj = fi - i0, fj - j0

        def pick(a):
            return ((1 - wi) * (1 - wj) * a[i0, j0] + (1 - wi) * wj * a[i0, j1]
                    + wi * (1 - wj) * a[i1, j0] + wi * wj * a[i1, j1])
    else:
        raise ValueError(f"unknown interpolation mode {mode!r}")

    speed, direction = wind_from_uv(pick(snapshot.wind_u), pick(snapshot.wind_v))
    az = np.radians(snapshot.sun_az)
    sun_az = np.mod(np.degrees(np.arctan2(pick(np.sin(az)), pick(np.cos(az)))), 360.0)
    return EnvironmentSample(
        ambient_temp=pick(snapshot.temp),
        wind_speed=speed,
        wind_direction=direction,
        solar_irradiance=pick(snapshot.solar),
        sun_altitude=pick(snapshot.sun_alt),
        sun_azimuth=sun_az,
        elevation=elevation,
    )
