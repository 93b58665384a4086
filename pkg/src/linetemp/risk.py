"""Over-temperature risk in the space of environmental parameters.

Threshold wind speed (the largest wind speed that still lets the steady state
reach a temperature limit), the resulting exceedance probability under a
sector-wise Weibull wind rose, and time-to-limit maps over wind direction and
speed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .analytic import NEVER, SolverConfig, solve_steady_state
from .conductor import (
    Conductor,
    EnvironmentSample,
    air_properties,
    attack_angle,
    beta_of_temp,
    natural_convection,
    q_si,
    radiation_heat,
    solar_heat,
    wind_angle_factor,
)
from .oracle import fmt

STATUS_FINITE = 0
STATUS_NEVER = 1
STATUS_ALREADY_EXCEEDED = 2
CSV_NEVER = -1
CSV_ALREADY_EXCEEDED = -2


class AxisMismatch(ValueError):
    pass


@dataclass(frozen=True)
class SegmentContext:
    """Where a segment sits: its axis, the sun, and the site elevation."""

    line_azimuth: float = 90.0
    solar_irradiance: float = 0.0
    sun_altitude: float = -90.0
    sun_azimuth: float = 180.0
    elevation: float = 0.0

    def environment(self, ambient_temp, wind_speed=0.0, wind_direction=0.0):
        return EnvironmentSample(
            ambient_temp=ambient_temp,
            wind_speed=wind_speed,
            wind_direction=wind_direction,
            solar_irradiance=self.solar_irradiance,
            sun_altitude=self.sun_altitude,
            sun_azimuth=self.sun_azimuth,
            elevation=self.elevation,
        )


@dataclass(frozen=True)
class WindSector:
    lo: float  # azimuth range [lo, hi), may wrap through north
    hi: float
    shape: float
    scale: float
    probability: float

    @property
    def width(self):
        return (self.hi - self.lo) % 360.0 or 360.0

    @property
    def center(self):
        return (self.lo + 0.5 * self.width) % 360.0


@dataclass(frozen=True)
class WindModel:
    """Sector-conditional Weibull wind speed with an independent ambient temperature.

    ``ambient`` is either ``(lo, hi)`` for a uniform law or ``(edges, weights)``
    for a histogram.  With ``interpolation="linear"`` the Weibull parameters
    and the direction density vary linearly between sector centers instead of
    being piecewise constant.
    """

    sectors: tuple
    ambient: tuple = (30.0, 40.0)
    interpolation: str = "step"

    def __post_init__(self):
        object.__setattr__(self, "sectors", tuple(self.sectors))
        total = sum(s.probability for s in self.sectors)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"sector probabilities sum to {total}, expected 1")
        for s in self.sectors:
            if not (s.shape > 0 and s.scale > 0):
                raise ValueError("Weibull shape and scale must be > 0")
            if s.probability < 0:
                raise ValueError("sector probability must be >= 0")
        if abs(sum(s.width for s in self.sectors) - 360.0) > 1e-6:
            raise ValueError("sectors must tile the full circle")
        if self.interpolation not in ("step", "linear"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        if self._is_histogram:
            edges, weights = self.ambient
            if len(edges) != len(weights) + 1 or np.any(np.diff(edges) <= 0) or min(weights) < 0:
                raise ValueError("ambient histogram needs increasing edges and non-negative weights")
        elif self.ambient[0] > self.ambient[1]:
            raise ValueError("ambient range needs lo <= hi")

    @property
    def _is_histogram(self):
        return np.ndim(self.ambient[0]) > 0

    @property
    def ambient_support(self):
        if self._is_histogram:
            return float(self.ambient[0][0]), float(self.ambient[0][-1])
        return float(self.ambient[0]), float(self.ambient[1])

    def ambient_density(self, temp):
        temp = np.asarray(temp, dtype=float)
        if self._is_histogram:
            edges = np.asarray(self.ambient[0], dtype=float)
            w = np.asarray(self.ambient[1], dtype=float)
            dens = w / (w.sum() * np.diff(edges))
            idx = np.clip(np.searchsorted(edges, temp, side="right") - 1, 0, len(w) - 1)
            inside = (temp >= edges[0]) & (temp <= edges[-1])
            return np.where(inside, dens[idx], 0.0)
        lo, hi = self.ambient
        if hi == lo:
            raise ValueError("point-mass ambient temperature has no density")
        return np.where((temp >= lo) & (temp <= hi), 1.0 / (hi - lo), 0.0)

    def _sector_params(self, direction):
        """Weibull shape, scale and direction density (per degree) at ``direction``."""
        direction = np.mod(np.asarray(direction, dtype=float), 360.0)
        shape = np.array([s.shape for s in self.sectors])
        scale = np.array([s.scale for s in self.sectors])
        dens = np.array([s.probability / s.width for s in self.sectors])
        if self.interpolation == "linear":
            centers = np.array([s.center for s in self.sectors])
            return tuple(np.interp(direction, centers, v, period=360.0) for v in (shape, scale, dens))
        lo = np.array([s.lo for s in self.sectors])
        offset = np.mod(direction[..., None] - lo, 360.0)
        widths = np.array([s.width for s in self.sectors])
        idx = np.argmax(offset < widths, axis=-1)
        return shape[idx], scale[idx], dens[idx]

    def direction_density(self, direction):
        return self._sector_params(direction)[2]

    def speed_cdf(self, speed, direction):
        k, lam, _ = self._sector_params(direction)
        v = np.maximum(np.asarray(speed, dtype=float), 0.0)
        return 1.0 - np.exp(-((v / lam) ** k))

    def speed_pdf(self, speed, direction):
        k, lam, _ = self._sector_params(direction)
        v = np.maximum(np.asarray(speed, dtype=float), 0.0)
        return np.where(
            np.asarray(speed) >= 0, (k / lam) * (v / lam) ** (k - 1) * np.exp(-((v / lam) ** k)), 0.0
        )


@dataclass(frozen=True)
class BinningSpec:
    n_temp_bins: int = 25
    n_direction_bins: int = 25

    def __post_init__(self):
        if self.n_temp_bins < 1 or self.n_direction_bins < 1:
            raise ValueError("bin counts must be >= 1")


@dataclass
class RegionGrid:
    """Time-to-limit map: rows follow ``directions``, columns ``speeds``.

    ``times`` is in seconds, ``inf`` where the limit is never reached;
    ``status`` holds STATUS_* codes; ``steady_temp`` the steady state of each
    cell; ``density`` an optional (direction, speed) probability density.
    """

    directions: np.ndarray
    speeds: np.ndarray
    times: np.ndarray
    status: np.ndarray
    steady_temp: np.ndarray
    density: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


# -- threshold wind speed ------------------------------------------------------

def _threshold_speed(conductor, limit, ambient, wind_direction, line_azimuth, ctx: SegmentContext, current):
    """Array version: NaN where the limit is unreachable at any wind speed."""
    limit = np.asarray(limit, dtype=float)
    ambient = np.asarray(ambient, dtype=float)
    env = ctx.environment(ambient, 0.0, wind_direction)
    dt = limit - ambient
    required = (
        np.asarray(current, dtype=float) ** 2 * conductor.resistance(limit)
        + solar_heat(conductor, env, line_azimuth)
        - radiation_heat(conductor, limit, ambient)
    )
    air = air_properties(limit, ambient, ctx.elevation)
    ka = wind_angle_factor(wind_direction, line_azimuth)
    still_air = np.maximum(
        natural_convection(conductor, limit, ambient, ctx.elevation),
        ka * 1.01 * air.thermal_conductivity * dt,
    )
    unit = ka * air.thermal_conductivity * dt
    with np.errstate(divide="ignore", invalid="ignore"):
        low_base = (required / unit - 1.01) / 1.35
        n_low = np.where(low_base > 0, np.abs(low_base) ** (1 / 0.52), 0.0)
        n_high = np.abs(required / (0.754 * unit)) ** (1 / 0.6)
    to_speed = air.viscosity / (conductor.diameter * air.density)
    speed = np.minimum(n_low, n_high) * to_speed
    return np.where((required < still_air) | (dt <= 0), np.nan, speed)


def threshold_wind_speed(conductor: Conductor, limit, ambient_temp, wind_direction, line_azimuth,
                         solar=(0.0, -90.0, 180.0), current=0.0, elevation=0.0):
    """Wind speed (m/s) at which the steady state equals ``limit``; None if unreachable.

    Any wind slower than the returned speed drives the steady state above the
    limit.  Air properties are taken at the film temperature of the limit.
    ``solar`` is (irradiance, sun altitude, sun azimuth).
    """
    ctx = SegmentContext(line_azimuth, *solar, elevation=elevation)
    v = _threshold_speed(conductor, limit, ambient_temp, wind_direction, line_azimuth, ctx, current)
    if np.ndim(v) == 0:
        return None if np.isnan(v) else float(v)
    return v


# -- probability -----------------------------------------------------------------

def overtemp_probability(conductor: Conductor, context: SegmentContext, current, limit,
                         wind_model: WindModel, binning: BinningSpec = BinningSpec()):
    """Probability that the steady state reaches ``limit`` (midpoint rule over T_a x direction)."""
    lo, hi = wind_model.ambient_support
    nt, nd = binning.n_temp_bins, binning.n_direction_bins
    if hi > lo:
        dta = (hi - lo) / nt
        temps = lo + (np.arange(nt) + 0.5) * dta
        p_temp = wind_model.ambient_density(temps) * dta
    else:
        temps, p_temp = np.array([lo]), np.array([1.0])
    dth = 360.0 / nd
    # bins start on the line axis so the attack-angle kinks sit on bin edges
    dirs = np.mod(context.line_azimuth + (np.arange(nd) + 0.5) * dth, 360.0)
    p_dir = wind_model.direction_density(dirs) * dth

    T, D = np.meshgrid(temps, dirs, indexing="ij")
    vth = _threshold_speed(conductor, limit, T, D, context.line_azimuth, context, current)
    cdf = np.where(np.isnan(vth), 0.0, wind_model.speed_cdf(np.nan_to_num(vth), D))
    cdf = np.where(T >= limit, 1.0, cdf)
    prob = float(np.sum(cdf * p_temp[:, None] * p_dir[None, :]))
    return min(max(prob, 0.0), 1.0)


# -- time to limit -----------------------------------------------------------------

def time_to_overtemp_region(conductor: Conductor, context: SegmentContext, current, limit, ambient_temp,
                            initial_temp, directions: Sequence[float], speeds: Sequence[float],
                            min_speed=0.05, n_sweep=400, config: SolverConfig = SolverConfig(),
                            form="first_order") -> RegionGrid:
    """Time for the closed-form trace to reach ``limit`` at every (direction, speed) cell.

    Per direction the steady state is swept from its maximum (at
    ``min_speed``) down to the limit; each candidate steady state is mapped to
    the wind speed that produces it, which tabulates steady state against
    speed.  At each grid speed the cooling-rate fit between the initial and
    steady temperatures then gives the time in closed form.  Directions that
    share the same attack angle to the line are computed once.
    """
    directions = np.asarray(directions, dtype=float)
    speeds = np.asarray(speeds, dtype=float)
    if limit <= ambient_temp:
        raise ValueError("limit must exceed the ambient temperature")
    if np.any(speeds < 0):
        raise AxisMismatch("wind speeds must be >= 0")
    az = context.line_azimuth
    shape = (directions.size, speeds.size)
    times = np.full(shape, NEVER)
    status = np.full(shape, STATUS_NEVER, dtype=np.int8)
    steady = np.full(shape, np.nan)
    meta = dict(limit=limit, ambient_temp=ambient_temp, initial_temp=initial_temp, current=float(current),
                conductor=conductor.name, line_azimuth=az, min_speed=min_speed, form=form)

    if initial_temp >= limit:
        status[:] = STATUS_ALREADY_EXCEEDED
        times[:] = 0.0
        return RegionGrid(directions, speeds, times, status, steady, meta=meta)

    phis = np.round(attack_angle(directions, az), 9)
    q = float(q_si(conductor, context.environment(ambient_temp), az, current))
    ctx_env = context.environment
    for phi in np.unique(phis):
        rows = np.nonzero(phis == phi)[0]
        wdir = az + phi  # any direction with this attack angle
        te_max = solve_steady_state(conductor, ctx_env(ambient_temp, min_speed, wdir), az, current,
                                    initial_temp, config).temp
        if te_max <= limit:
            continue
        # steady states between the limit and the still-air maximum, denser near the limit
        gaps = (te_max - limit) * np.geomspace(1.0, 1e-6, n_sweep)
        te_cand = limit + gaps
        v_cand = _threshold_speed(conductor, te_cand, ambient_temp, wdir, az, context, current)
        # still-air plateau: those steady states persist up to the first forced-convection speed
        valid = ~np.isnan(v_cand)
        if not valid.any():
            continue
        first = np.argmax(valid)
        v_cand[:first] = v_cand[first]
        v_cand = np.maximum.accumulate(v_cand)  # guard interpolation against round-off
        v_limit = _threshold_speed(conductor, limit, ambient_temp, wdir, az, context, current)
        v_limit = float(v_cand[-1]) if np.isnan(v_limit) else float(v_limit)

        te = np.interp(np.maximum(speeds, min_speed), v_cand, te_cand)
        finite = (speeds < v_limit) & (te > limit)
        if not finite.any():
            continue
        env = ctx_env(ambient_temp, np.maximum(speeds, min_speed), wdir)
        te_f = np.where(finite, te, limit + 1.0)
        beta_e = q / (te_f - ambient_temp)
        beta_0 = beta_of_temp(conductor, env, az, current, initial_temp)
        span = te_f - initial_temp
        slope = np.where(np.abs(span) > 1e-9, (beta_e - beta_0) / np.where(np.abs(span) > 1e-9, span, 1.0), 0.0)
        b0 = beta_0 - slope * (initial_temp - ambient_temp)
        rate = np.sqrt(np.maximum(b0**2 + 4.0 * q * slope, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (te_f - initial_temp) / (te_f - limit)
            if form == "riccati":
                d_b, d0, dth = te_f - ambient_temp, initial_temp - ambient_temp, limit - ambient_temp
                ratio = ratio * (b0 + slope * (d_b + dth)) / (b0 + slope * (d_b + d0))
            t = np.log(ratio) / rate
        for r in rows:
            times[r] = np.where(finite, t, NEVER)
            status[r] = np.where(finite, STATUS_FINITE, STATUS_NEVER)
            steady[r] = np.where(finite, te, np.nan)
    return RegionGrid(directions, speeds, times, status, steady, meta=meta)


def overlay_probability(region: RegionGrid, wind_model: WindModel) -> RegionGrid:
    """Attach the (direction, speed) density of ``wind_model`` to each cell (per degree per m/s)."""
    d, v = region.directions, region.speeds
    if d.ndim != 1 or v.ndim != 1 or region.times.shape != (d.size, v.size):
        raise AxisMismatch("region axes do not match its cell array")
    if np.any(d < 0) or np.any(d >= 360) or np.any(v < 0):
        raise AxisMismatch("directions must lie in [0, 360) and speeds be >= 0")
    D, V = np.meshgrid(d, v, indexing="ij")
    dens = wind_model.direction_density(D) * wind_model.speed_pdf(V, D)
    return replace(region, density=dens)


def cell_areas(region: RegionGrid):
    """Cell widths (degrees x m/s) from the axis spacing; the axes are treated as cell centers."""

    def widths(x, period=None):
        if x.size == 1:
            return np.array([period or 1.0])
        edges = np.concatenate([[x[0] - (x[1] - x[0]) / 2], (x[1:] + x[:-1]) / 2, [x[-1] + (x[-1] - x[-2]) / 2]])
        return np.diff(edges)

    return np.outer(widths(region.directions, 360.0), widths(region.speeds))


def write_region(region: RegionGrid, csv_path, meta_path=None):
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["direction_deg", "wind_speed_ms", "time_to_limit_s", "density"])
        for i, d in enumerate(region.directions):
            for j, v in enumerate(region.speeds):
                st = region.status[i, j]
                t = (CSV_NEVER if st == STATUS_NEVER else CSV_ALREADY_EXCEEDED if st == STATUS_ALREADY_EXCEEDED
                     else fmt(region.times[i, j]))
                dens = "" if region.density is None else fmt(region.density[i, j])
                w.writerow([fmt(d), fmt(v), t, dens])
    meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".json")
    meta = dict(schema_version=1, directions_deg=[float(x) for x in region.directions],
                speeds_ms=[float(x) for x in region.speeds], **region.meta)
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, meta_path


def read_region(csv_path, meta_path=None) -> RegionGrid:
    csv_path = Path(csv_path)
    meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".json")
    meta = json.loads(meta_path.read_text())
    d = np.array(meta.pop("directions_deg"))
    v = np.array(meta.pop("speeds_ms"))
    meta.pop("schema_version", None)
    times = np.full((d.size, v.size), NEVER)
    status = np.full((d.size, v.size), STATUS_NEVER, dtype=np.int8)
    dens = np.full((d.size, v.size), np.nan)
    with csv_path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != d.size * v.size:
        raise AxisMismatch("region CSV does not match its metadata axes")
    for k, row in enumerate(rows):
        i, j = divmod(k, v.size)
        t = float(row["time_to_limit_s"])
        if t == CSV_NEVER:
            status[i, j] = STATUS_NEVER
        elif t == CSV_ALREADY_EXCEEDED:
            status[i, j], times[i, j] = STATUS_ALREADY_EXCEEDED, 0.0
        else:
            status[i, j], times[i, j] = STATUS_FINITE, t
        if row["density"]:
            dens[i, j] = float(row["density"])
    density = None if np.all(np.isnan(dens)) else dens
    return RegionGrid(d, v, times, status, np.full((d.size, v.size), np.nan), density, meta)
