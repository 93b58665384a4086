"""IEEE-738 heat-balance terms for a bare overhead conductor.

Every function here is written with numpy ufuncs so that scalar inputs give
scalar (0-d) results and array inputs broadcast.  A :class:`Conductor` or
:class:`EnvironmentSample` whose fields are arrays (see :func:`stack_conductors`)
therefore evaluates a whole population of segments in one call.

Units: meters, seconds, degrees Celsius, amperes, W/m.  Azimuths are measured
clockwise from north in degrees.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

KELVIN = 273.0
RADIATION_COEFF = 17.8
NATURAL_COEFF = 3.645

BRANCH_FORCED_HIGH = 0
BRANCH_FORCED_LOW = 1
BRANCH_NATURAL = 2
BRANCH_NAMES = ("forced_high", "forced_low", "natural")


@dataclass(frozen=True)
class Conductor:
    """Physical and electrical description of one (sub-)conductor.

    ``diameter`` and ``projected_area`` are in meters (projected area per unit
    length equals the diameter for a round conductor).  Resistance follows
    ``R(T) = resistance_ref + resistance_slope * (T - ref_temp)`` in ohm/m.
    """

    name: str
    diameter: float
    heat_capacity: float  # mC_p, J/(m.degC)
    resistance_ref: float  # ohm/m at ref_temp
    resistance_slope: float  # ohm/(m.degC)
    emissivity: float = 0.8
    absorptivity: float = 0.8
    ref_temp: float = 25.0
    projected_area: float | None = None
    bundle_count: int = 1
    rated_current: float = 1000.0
    max_temp: float = 100.0
    provenance: str = ""

    def __post_init__(self):
        if self.projected_area is None:
            object.__setattr__(self, "projected_area", self.diameter)
        checks = [
            (np.all(np.asarray(self.diameter) > 0), "diameter must be > 0"),
            (np.all(np.asarray(self.heat_capacity) > 0), "heat_capacity must be > 0"),
            (np.all(np.asarray(self.resistance_ref) > 0), "resistance_ref must be > 0"),
            (np.all(np.asarray(self.resistance_slope) >= 0), "resistance_slope must be >= 0"),
            (np.all((np.asarray(self.emissivity) >= 0) & (np.asarray(self.emissivity) <= 1)),
             "emissivity must be in [0, 1]"),
            (np.all((np.asarray(self.absorptivity) >= 0) & (np.asarray(self.absorptivity) <= 1)),
             "absorptivity must be in [0, 1]"),
            (np.all(np.asarray(self.bundle_count) >= 1), "bundle_count must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"{self.name}: {msg}")

    def resistance(self, temp):
        return self.resistance_ref + self.resistance_slope * (np.asarray(temp) - self.ref_temp)

    def scaled(self, diameter: float) -> "Conductor":
        """Geometrically scale this conductor to a new diameter.

        Cross-section (hence heat capacity) grows with D**2 and resistance
        shrinks with 1/D**2; rated current is scaled with D**1.5.
        """
        r = diameter / self.diameter
        return replace(
            self,
            name=f"{self.name}@{diameter * 1000:.2f}mm",
            diameter=diameter,
            projected_area=diameter,
            heat_capacity=self.heat_capacity * r**2,
            resistance_ref=self.resistance_ref / r**2,
            resistance_slope=self.resistance_slope / r**2,
            rated_current=self.rated_current * r**1.5,
        )


@dataclass(frozen=True)
class EnvironmentSample:
    ambient_temp: float
    wind_speed: float = 0.0
    wind_direction: float = 0.0  # direction the wind blows from
    solar_irradiance: float = 0.0
    sun_altitude: float = -90.0
    sun_azimuth: float = 180.0
    elevation: float = 0.0

    def __post_init__(self):
        if not np.all(np.asarray(self.wind_speed) >= 0):
            raise ValueError("wind_speed must be >= 0")
        if not np.all(np.asarray(self.solar_irradiance) >= 0):
            raise ValueError("solar_irradiance must be >= 0")
        alt = np.asarray(self.sun_altitude)
        if not np.all((alt >= -90) & (alt <= 90)):
            raise ValueError("sun_altitude must be in [-90, 90]")

    def with_wind(self, speed=None, direction=None) -> "EnvironmentSample":
        return replace(
            self,
            wind_speed=self.wind_speed if speed is None else speed,
            wind_direction=self.wind_direction if direction is None else direction,
        )


@dataclass(frozen=True)
class AirProperties:
    film_temp: float
    thermal_conductivity: float
    density: float
    viscosity: float


@dataclass(frozen=True)
class HeatTerms:
    joule: float
    solar: float
    convection: float
    radiation: float
    branch: int
    wind_factor: float
    reynolds: float

    @property
    def branch_name(self):
        return BRANCH_NAMES[int(self.branch)]


def stack_conductors(items: Sequence[Conductor]) -> Conductor:
    """Pack conductors into one Conductor with array-valued numeric fields."""
    kw = {}
    for f in fields(Conductor):
        vals = [getattr(c, f.name) for c in items]
        if f.name in ("name", "provenance"):
            kw[f.name] = "stack"
        else:
            kw[f.name] = np.array(vals, dtype=float)
    return Conductor(**kw)


def stack_environments(items: Sequence[EnvironmentSample]) -> EnvironmentSample:
    return EnvironmentSample(
        **{f.name: np.array([getattr(e, f.name) for e in items], dtype=float) for f in fields(EnvironmentSample)}
    )


def take(obj, index):
    """Index every array field of a stacked Conductor / EnvironmentSample."""
    kw = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        kw[f.name] = np.asarray(v)[index] if isinstance(v, np.ndarray) else v
    return type(obj)(**kw)


# -- catalog -----------------------------------------------------------------

_CATALOG_FIELDS = {f.name for f in fields(Conductor)}


def conductor_from_record(rec: dict) -> Conductor:
    """Build a Conductor from a catalog record; diameters on disk are in mm."""
    rec = dict(rec)
    rec.pop("comment", None)
    if "diameter_mm" not in rec:
        raise KeyError(f"conductor record {rec.get('name', '?')!r} missing 'diameter_mm'")
    rec["diameter"] = rec.pop("diameter_mm") / 1000.0
    if "projected_area_mm" in rec:
        rec["projected_area"] = rec.pop("projected_area_mm") / 1000.0
    unknown = set(rec) - _CATALOG_FIELDS
    if unknown:
        raise KeyError(f"unknown conductor fields: {sorted(unknown)}")
    return Conductor(**rec)


def conductor_to_record(c: Conductor) -> dict:
    rec = {f.name: getattr(c, f.name) for f in fields(Conductor)}
    rec["diameter_mm"] = rec.pop("diameter") * 1000.0
    rec["projected_area_mm"] = rec.pop("projected_area") * 1000.0
    return rec


def load_catalog(path: str | Path | None = None) -> dict[str, Conductor]:
    """Load a conductor catalog JSON file (the packaged default when ``path`` is None)."""
    if path is None:
        text = resources.files("linetemp").joinpath("data/conductors.json").read_text()
    else:
        text = Path(path).read_text()
    doc = json.loads(text)
    records = doc["conductors"] if isinstance(doc, dict) else doc
    return {r["name"]: conductor_from_record(r) for r in records}


def get_conductor(name: str, catalog: dict[str, Conductor] | None = None) -> Conductor:
    catalog = load_catalog() if catalog is None else catalog
    key = {k.lower(): k for k in catalog}.get(name.lower())
    if key is None:
        raise KeyError(f"unknown conductor {name!r}; known: {', '.join(sorted(catalog))}")
    return catalog[key]


# -- heat terms --------------------------------------------------------------

def air_properties(conductor_temp, ambient_temp, elevation=0.0) -> AirProperties:
    """Film-temperature air properties (IEEE-738-2012 SI laws).

    viscosity  1.458e-6 (Tf+273)^1.5 / (Tf+383.4)
    conductivity 2.424e-2 + 7.477e-5 Tf - 4.407e-9 Tf^2
    density    (1.293 - 1.525e-4 He + 6.379e-9 He^2) / (1 + 0.00367 Tf)
    """
    tf = 0.5 * (np.asarray(conductor_temp, dtype=float) + ambient_temp)
    he = np.asarray(elevation, dtype=float)
    mu = 1.458e-6 * (tf + 273.0) ** 1.5 / (tf + 383.4)
    k = 2.424e-2 + 7.477e-5 * tf - 4.407e-9 * tf**2
    rho = (1.293 - 1.525e-4 * he + 6.379e-9 * he**2) / (1.0 + 0.00367 * tf)
    return AirProperties(tf, k, rho, mu)


def attack_angle(wind_direction, line_azimuth):
    """Acute angle in [0, 90] degrees between the wind vector and the line axis."""
    d = np.mod(np.asarray(wind_direction, dtype=float) - line_azimuth, 180.0)
    return np.minimum(d, 180.0 - d)


def wind_angle_factor(wind_direction, line_azimuth):
    phi = np.radians(attack_angle(wind_direction, line_azimuth))
    return 1.194 - np.cos(phi) + 0.194 * np.cos(2 * phi) + 0.368 * np.sin(2 * phi)


def solar_heat(conductor: Conductor, env: EnvironmentSample, line_azimuth):
    hc = np.radians(env.sun_altitude)
    theta = np.arccos(np.clip(np.cos(hc) * np.cos(np.radians(np.asarray(env.sun_azimuth) - line_azimuth)), -1, 1))
    qs = conductor.absorptivity * env.solar_irradiance * np.sin(theta) * conductor.projected_area
    # night: no direct beam
    return np.where(np.asarray(env.sun_altitude) > 0, qs, 0.0)


def radiation_heat(conductor: Conductor, conductor_temp, ambient_temp):
    tc = (np.asarray(conductor_temp, dtype=float) + KELVIN) / 100.0
    ta = (np.asarray(ambient_temp, dtype=float) + KELVIN) / 100.0
    return RADIATION_COEFF * conductor.emissivity * conductor.diameter * (tc**4 - ta**4)


def radiation_factor(conductor: Conductor, conductor_temp, ambient_temp):
    """q_r / (T_c - T_a), the exact factorization of the fourth-power law."""
    tc = np.asarray(conductor_temp, dtype=float)
    ta = np.asarray(ambient_temp, dtype=float)
    return (
        RADIATION_COEFF * conductor.emissivity * conductor.diameter * (tc + ta + 2 * KELVIN) / 1e4
        * (((tc + KELVIN) / 100.0) ** 2 + ((ta + KELVIN) / 100.0) ** 2)
    )


def reynolds(conductor: Conductor, wind_speed, air: AirProperties):
    return conductor.diameter * air.density * np.asarray(wind_speed, dtype=float) / air.viscosity


def _convection_coefficients(conductor, env, line_azimuth, conductor_temp):
    """Per-branch coefficients c_b with q_b = c_b * (T_c - T_a) for T_c >= T_a.

    Below ambient the branches are extended as odd functions of the
    temperature difference, so the coefficients depend on |T_c - T_a| only.
    """
    dt = np.asarray(conductor_temp, dtype=float) - env.ambient_temp
    air = air_properties(conductor_temp, env.ambient_temp, env.elevation)
    ka = wind_angle_factor(env.wind_direction, line_azimuth)
    nr = reynolds(conductor, env.wind_speed, air)
    c_high = 0.754 * ka * nr**0.6 * air.thermal_conductivity
    c_low = ka * (1.01 + 1.35 * nr**0.52) * air.thermal_conductivity
    c_nat = NATURAL_COEFF * np.sqrt(air.density) * conductor.diameter**0.75 * np.abs(dt) ** 0.25
    return dt, np.stack(np.broadcast_arrays(c_high, c_low, c_nat)), ka, nr


def convection_coefficient(conductor, env, line_azimuth, conductor_temp):
    """C_c: the largest branch coefficient, so that q_c = C_c * (T_c - T_a)."""
    _, coeffs, _, _ = _convection_coefficients(conductor, env, line_azimuth, conductor_temp)
    return coeffs.max(axis=0)


def convection_heat(conductor, env, line_azimuth, conductor_temp):
    """Convective loss and active branch. Returns (q_c, branch, K_a, N_R)."""
    dt, coeffs, ka, nr = _convection_coefficients(conductor, env, line_azimuth, conductor_temp)
    branch = coeffs.argmax(axis=0)
    qc = coeffs.max(axis=0) * dt
    return qc, branch, ka, nr


def joule_heat(conductor, current, conductor_temp):
    return np.asarray(current, dtype=float) ** 2 * conductor.resistance(conductor_temp)


def heat_terms(conductor, env, line_azimuth, current, conductor_temp) -> HeatTerms:
    qc, branch, ka, nr = convection_heat(conductor, env, line_azimuth, conductor_temp)
    return HeatTerms(
        joule=joule_heat(conductor, current, conductor_temp),
        solar=solar_heat(conductor, env, line_azimuth),
        convection=qc,
        radiation=radiation_heat(conductor, conductor_temp, env.ambient_temp),
        branch=branch,
        wind_factor=ka,
        reynolds=nr,
    )


def heat_balance_rhs(conductor, env, line_azimuth, current, conductor_temp):
    """dT_c/dt in degC/s from the un-factored balance (q_i + q_s - q_c - q_r)/mC_p."""
    qc, _, _, _ = convection_heat(conductor, env, line_azimuth, conductor_temp)
    gain = joule_heat(conductor, current, conductor_temp) + solar_heat(conductor, env, line_azimuth)
    loss = qc + radiation_heat(conductor, conductor_temp, env.ambient_temp)
    return (gain - loss) / conductor.heat_capacity


def rhs_function(conductor, env, line_azimuth, current):
    """``heat_balance_rhs`` as a function of T_c alone, for fixed weather and current.

    Terms that do not depend on the conductor temperature are evaluated once,
    which is what makes long fixed-step integrations affordable.
    """
    gain0 = solar_heat(conductor, env, line_azimuth)
    ka = wind_angle_factor(env.wind_direction, line_azimuth)
    i2 = np.asarray(current, dtype=float) ** 2
    ta = env.ambient_temp
    d075 = NATURAL_COEFF * conductor.diameter**0.75

    def f(conductor_temp):
        dt = np.asarray(conductor_temp, dtype=float) - ta
        air = air_properties(conductor_temp, ta, env.elevation)
        nr = conductor.diameter * air.density * env.wind_speed / air.viscosity
        c = np.maximum(0.754 * nr**0.6, 1.01 + 1.35 * nr**0.52) * ka * air.thermal_conductivity
        c = np.maximum(c, d075 * np.sqrt(air.density) * np.abs(dt) ** 0.25)
        loss = c * dt + radiation_heat(conductor, conductor_temp, ta)
        return (i2 * conductor.resistance(conductor_temp) + gain0 - loss) / conductor.heat_capacity

    return f


def beta_of_temp(conductor, env, line_azimuth, current, conductor_temp):
    """Lumped cooling rate beta(T_c) in 1/s such that rhs = Q_si - beta * (T_c - T_a)."""
    cc = convection_coefficient(conductor, env, line_azimuth, conductor_temp)
    i2 = np.asarray(current, dtype=float) ** 2
    rad = radiation_factor(conductor, conductor_temp, env.ambient_temp)
    return (cc - i2 * conductor.resistance_slope + rad) / conductor.heat_capacity


def q_si(conductor, env, line_azimuth, current):
    """Temperature-independent forcing (I^2 R(T_a) + q_s) / mC_p in degC/s."""
    i2 = np.asarray(current, dtype=float) ** 2
    return (i2 * conductor.resistance(env.ambient_temp) + solar_heat(conductor, env, line_azimuth)) / conductor.heat_capacity


def natural_convection(conductor, conductor_temp, ambient_temp, elevation=0.0):
    air = air_properties(conductor_temp, ambient_temp, elevation)
    dt = np.asarray(conductor_temp, dtype=float) - ambient_temp
    return NATURAL_COEFF * np.sqrt(air.density) * conductor.diameter**0.75 * np.abs(dt) ** 1.25 * np.sign(dt)


# -- sun position ------------------------------------------------------------

def solar_geometry(latitude, day_of_year, local_solar_hour):
    """Sun altitude and azimuth (degrees) from the IEEE-738 annex declination law.

    Azimuth is clockwise from north, so the noon sun sits at 180 degrees for
    observers north of the subsolar point.
    """
    lat = np.radians(latitude)
    decl = np.radians(23.46 * np.sin(np.radians((284.0 + np.asarray(day_of_year)) / 365.0 * 360.0)))
    omega = np.radians((np.asarray(local_solar_hour, dtype=float) - 12.0) * 15.0)
    up = np.sin(decl) * np.sin(lat) + np.cos(decl) * np.cos(omega) * np.cos(lat)
    east = -np.cos(decl) * np.sin(omega)
    north = np.sin(decl) * np.cos(lat) - np.cos(decl) * np.cos(omega) * np.sin(lat)
    altitude = np.degrees(np.arcsin(np.clip(up, -1, 1)))
    azimuth = np.mod(np.degrees(np.arctan2(east, north)), 360.0)
    return altitude, azimuth
