"""Reproducible fixtures: the single-conductor benchmark case, a sector wind
rose, and a synthetic regional network with an 18 h weather series."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .batch import OperationState
from .conductor import Conductor, EnvironmentSample, get_conductor, load_catalog, solar_geometry
from .geo import GridSpec, LineRoute, WeatherSeries, WeatherSnapshot, sun_angles_at, uv_from_wind
from .risk import SegmentContext, WindModel, WindSector


@dataclass(frozen=True)
class Scenario:
    conductor: Conductor
    env: EnvironmentSample
    line_azimuth: float
    current: float
    initial_temp: float


def benchmark_scenario(current=800.0, initial_temp=50.0, wind_speed=0.8, solar_irradiance=1000.0) -> Scenario:
    """Drake at 40 C ambient, wind along the line axis, sun at noon on 1 July at 30 N."""
    alt, az = solar_geometry(30.0, 182, 12.0)
    env = EnvironmentSample(40.0, wind_speed, 90.0, solar_irradiance, float(alt), float(az))
    return Scenario(get_conductor("Drake"), env, 90.0, current, initial_temp)


def benchmark_context(solar_irradiance=1000.0) -> SegmentContext:
    alt, az = solar_geometry(30.0, 182, 12.0)
    return SegmentContext(90.0, solar_irradiance, float(alt), float(az))


def wind_rose(interpolation="linear", n_sectors=16, prevailing=225.0, ambient=(30.0, 40.0)) -> WindModel:
    """Weibull rose whose mass and scale peak at ``prevailing`` degrees."""
    w = 360.0 / n_sectors
    centers = np.arange(n_sectors) * w
    c = np.cos(np.radians(centers - prevailing))
    p = (1 + 0.8 * c) / np.sum(1 + 0.8 * c)
    sectors = [WindSector((x - w / 2) % 360, (x + w / 2) % 360, 2.0, 4.0 + 2.0 * cc, float(pp))
               for x, cc, pp in zip(centers, c, p)]
    last = sectors[-1]
    sectors[-1] = WindSector(last.lo, last.hi, last.shape, last.scale,
                             1.0 - sum(s.probability for s in sectors[:-1]))
    return WindModel(sectors, ambient, interpolation)


@dataclass(frozen=True)
class ProbabilityFixture:
    conductor: Conductor
    context: SegmentContext
    current: float
    limit: float
    wind_model: WindModel


def probability_fixture() -> ProbabilityFixture:
    return ProbabilityFixture(get_conductor("Drake"), benchmark_context(), 1000.0, 100.0, wind_rose("linear"))


# -- synthetic network ------------------------------------------------------------

REGION = (42.0, 45.0, -76.0, -72.0)  # lat min/max, lon min/max
START = datetime(2023, 7, 15, 10, 0, tzinfo=timezone.utc)


def synthetic_network(n_lines=100, seed=0, region=REGION, catalog=None) -> list[LineRoute]:
    """Random polylines of 2-4 legs (15-30 km each) with mixed conductors and 35-70 % loading."""
    rng = np.random.default_rng(seed)
    catalog = load_catalog() if catalog is None else catalog
    names = sorted(catalog)
    la0, la1, lo0, lo1 = region
    routes = []
    for i in range(n_lines):
        name = names[rng.integers(len(names))]
        cond = catalog[name]
        lat, lon = rng.uniform(la0 + 0.3, la1 - 0.3), rng.uniform(lo0 + 0.3, lo1 - 0.3)
        heading = rng.uniform(0, 360)
        pts = [(lat, lon)]
        for _ in range(rng.integers(2, 5)):
            heading += rng.normal(0, 25)
            dist = rng.uniform(15, 30)
            h = np.radians(heading)
            lat = float(np.clip(lat + dist * np.cos(h) / 111.2, la0 + 0.05, la1 - 0.05))
            lon = float(np.clip(lon + dist * np.sin(h) / (111.2 * np.cos(np.radians(lat))), lo0 + 0.05, lo1 - 0.05))
            if (lat, lon) != pts[-1]:
                pts.append((round(lat, 6), round(lon, 6)))
        if len(pts) < 2:
            pts.append((round(pts[0][0] + 0.1, 6), pts[0][1]))
        amps = float(np.round(cond.rated_current * rng.uniform(0.35, 0.7) * cond.bundle_count, 1))
        routes.append(LineRoute(f"L{i:03d}", tuple(pts), name, amps))
    return routes


def synthetic_weather(n_snapshots=73, step_minutes=15, spacing=0.2, seed=0, region=REGION,
                      start=START) -> WeatherSeries:
    """Smooth diurnal weather on a regular grid slightly larger than ``region``."""
    rng = np.random.default_rng(seed)
    la0, la1, lo0, lo1 = region
    grid = GridSpec(la0 - spacing, lo0 - spacing, spacing, spacing,
                    int(round((la1 - la0) / spacing)) + 3, int(round((lo1 - lo0) / spacing)) + 3)
    LA, LO = np.meshgrid(grid.lats, grid.lons, indexing="ij")
    ph = rng.uniform(0, 2 * np.pi, 6)
    snaps = []
    for n in range(n_snapshots):
        ts = start + timedelta(minutes=step_minutes * n)
        h = n * step_minutes / 60.0
        local = (ts.hour + ts.minute / 60.0 + LO / 15.0) % 24.0
        temp = (24.0 + 7.0 * np.sin(2 * np.pi * (local - 9.0) / 24.0) - 2.5 * (LA - 43.5)
                + 1.5 * np.sin(1.3 * LO + LA + ph[0]) + 0.8 * np.sin(0.2 * h + 2.1 * LA + ph[1]))
        speed = np.clip(2.5 + 1.5 * np.sin(0.9 * LA + 0.7 * LO + 0.15 * h + ph[2])
                        + 1.0 * np.cos(1.7 * LO - 0.1 * h + ph[3]), 0.3, None)
        direction = np.mod(225.0 + 40.0 * np.sin(0.5 * LA + 0.3 * h + ph[4]) + 20.0 * np.cos(LO + ph[5]), 360.0)
        u, v = uv_from_wind(speed, direction)
        alt, az = sun_angles_at(ts, LA, LO)
        cloud = 0.75 + 0.25 * np.cos(0.8 * LA - 0.6 * LO + 0.2 * h)
        solar = np.where(alt > 0, 1050.0 * np.sin(np.radians(np.maximum(alt, 0))) ** 1.2 * cloud, 0.0)
        snaps.append(WeatherSnapshot(ts, grid, temp, u, v, solar, alt, az))
    return WeatherSeries(snaps)


def synthetic_states(routes, n_states=10, seed=0, outages=2, stressed=5) -> list[OperationState]:
    """Outage-style states: a few lines dropped, some neighbours loaded up, the rest unchanged.

    Roughly one state in four pushes one line past twice its base current.
    """
    rng = np.random.default_rng(seed)
    ids = [r.line_id for r in routes]
    states = []
    for s in range(n_states):
        pick = rng.choice(len(ids), size=min(len(ids), outages + stressed), replace=False)
        out = [ids[i] for i in pick[:outages]]
        mult = {ids[i]: float(np.round(rng.uniform(1.1, 1.6), 3)) for i in pick[outages:]}
        if s % 4 == 3 and pick.size > outages:
            mult[ids[pick[outages]]] = 2.2
        states.append(OperationState(f"S{s:03d}", {k: 0.0 for k in out}, mult,
                                     f"lines {','.join(out)} out"))
    return states
