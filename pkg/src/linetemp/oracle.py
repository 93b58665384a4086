"""Fixed-step reference integration of the full (un-linearized) heat balance."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .conductor import rhs_function

NEVER = math.inf


@dataclass
class TemperatureTrace:
    """Sampled conductor temperature; ``temp`` may carry extra leading axes (segments)."""

    t: np.ndarray
    temp: np.ndarray
    segment_id: str | None = None
    state_id: str | None = None
    over_temperature_at: float | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.temp = np.asarray(self.temp, dtype=float)
        if self.t.ndim != 1 or self.t.size == 0:
            raise ValueError("trace needs a non-empty 1-d time axis")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("trace times must be strictly increasing")
        if self.temp.shape[-1] != self.t.size:
            raise ValueError("temperature samples do not match the time axis")


@dataclass(frozen=True)
class IntegrationConfig:
    step: float = 5.0
    method: str = "rk4"
    max_time: float = 7200.0

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be > 0")
        if self.max_time < self.step:
            raise ValueError("max_time must be >= step")
        if self.method not in ("rk4", "euler"):
            raise ValueError(f"unknown method {self.method!r}")


def _advance(f, temp, h, method):
    if method == "euler":
        return temp + h * f(temp)
    k1 = f(temp)
    k2 = f(temp + 0.5 * h * k1)
    k3 = f(temp + 0.5 * h * k2)
    k4 = f(temp + h * k3)
    return temp + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(conductor, env, line_azimuth, current, initial_temp, config=IntegrationConfig()) -> TemperatureTrace:
    """Integrate dT/dt with weather and current held constant.

    Array-valued inputs integrate a population in lock-step; the returned
    ``temp`` then has shape (..., n_steps + 1).
    """
    n = int(round(config.max_time / config.step))
    t = np.arange(n + 1) * config.step

    f = rhs_function(conductor, env, line_azimuth, current)
    temp = np.asarray(initial_temp, dtype=float) + 0.0 * np.asarray(f(initial_temp))
    out = np.empty(temp.shape + (n + 1,))
    out[..., 0] = temp
    for i in range(1, n + 1):
        temp = _advance(f, temp, config.step, config.method)
        out[..., i] = temp
    return TemperatureTrace(t, out)


def integrate_schedule(conductor, envs, line_azimuth, current, initial_temp, step_length, step=5.0,
                       method="rk4", dense=True):
    """Integrate across consecutive weather steps, each held constant for ``step_length`` s.

    ``envs`` is a sequence of EnvironmentSample (possibly array-valued, one
    entry per segment); ``current`` may be a scalar, a per-segment array, or a
    sequence with one entry per weather step.  Returns a TemperatureTrace
    sampled every ``step`` seconds (``dense``) or only at step boundaries.
    """
    sub = int(round(step_length / step))
    if not math.isclose(sub * step, step_length):
        raise ValueError("step_length must be a multiple of step")
    temp = np.asarray(initial_temp, dtype=float)
    per_step_current = isinstance(current, (list, tuple))
    samples = [temp]
    for k, env in enumerate(envs):
        cur = current[k] if per_step_current else current

        f = rhs_function(conductor, env, line_azimuth, cur)
        for _ in range(sub):
            temp = _advance(f, temp, step, method)
            if dense:
                samples.append(temp)
        if not dense:
            samples.append(temp)
    dt = step if dense else step_length
    t = np.arange(len(samples)) * dt
    return TemperatureTrace(t, np.stack(samples, axis=-1))


def crossing_time(trace: TemperatureTrace, threshold):
    """First time the trace reaches ``threshold``, interpolated linearly within a step.

    Works on the last axis; returns 0 if already at/above the threshold at
    t = 0 and ``NEVER`` (inf) if never reached.
    """
    temp = np.asarray(trace.temp)
    th = np.asarray(threshold, dtype=float)
    above = temp >= (th[..., None] if th.ndim else th)
    hit = above.any(axis=-1)
    idx = np.argmax(above, axis=-1)
    prev = np.maximum(idx - 1, 0)
    t = trace.t
    tp = np.take_along_axis(temp, prev[..., None], -1)[..., 0]
    ti = np.take_along_axis(temp, idx[..., None], -1)[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(ti > tp, (th - tp) / (ti - tp), 1.0)
    out = np.where(idx == 0, t[0], t[prev] + frac * (t[idx] - t[prev]))
    out = np.where(hit, out, NEVER)
    return float(out) if np.ndim(out) == 0 else out


def write_trace_csv(path, rows, header=("segment_id", "state_id", "t_s", "temp_c")):
    """Write rows of (segment_id, state_id, t, temp) with 6 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def read_trace_csv(path):
    with Path(path).open(newline="") as fh:
        r = csv.DictReader(fh)
        return [
            (row["segment_id"], row["state_id"], float(row["t_s"]), float(row["temp_c"]))
            for row in r
        ]


def fmt(x) -> str:
    """Six significant digits, the fixed numeric format of every CSV output."""
    x = float(x)
    if math.isinf(x) or math.isnan(x):
        return str(x)
    return f"{x:.6g}"
