"""Closed-form approximate solutions of the conductor heat-balance ODE.

Writing dT/dt = Q_si - beta(T_c) (T_c - T_a) and approximating beta as affine
in the temperature rise turns the balance into a constant-coefficient Riccati
equation.  This module solves for the steady state, builds the affine fit,
evaluates the Riccati and first-order closed forms, and re-targets a fitted
model to a new line current without iterating.

All functions broadcast over numpy arrays, so a LinearizedModel may hold one
segment or a whole population.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .conductor import Conductor, beta_of_temp, q_si

NEVER = math.inf


class NonConvergence(RuntimeError):
    def __init__(self, message, last_temp=None, iterations=None):
        super().__init__(message)
        self.last_temp = last_temp
        self.iterations = iterations


class InvalidModel(ValueError):
    pass


class NegativeDiscriminant(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    heat_mismatch_tolerance: float = 1e-6  # W/m
    max_iterations: int = 50
    degenerate_slope: float = 1e-12  # 1/(s.degC)

    def __post_init__(self):
        if not self.heat_mismatch_tolerance > 0:
            raise ValueError("heat_mismatch_tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class SteadyState:
    temp: float
    iterations: int
    residual: float  # W/m
    converged: bool


@dataclass(frozen=True)
class LinearizedModel:
    """Parameters of the closed-form temperature trajectory for fixed weather and current.

    ``beta0`` and ``beta_slope`` are the intercept and slope of the affine
    cooling rate beta(dT) = beta0 + beta_slope * dT, ``rate`` is the
    first-order decay rate and ``delta_a`` / ``delta_b`` the two roots of the
    Riccati right-hand side (``delta_b`` = T_e - T_a).
    """

    ambient_temp: float
    initial_temp: float
    steady_temp: float
    q_si: float
    beta0: float
    beta_slope: float
    delta_a: float
    delta_b: float
    c_prime: float
    rate: float
    current: float

    @classmethod
    def from_coefficients(cls, ambient_temp, initial_temp, q, beta0, beta_slope, current,
                          degenerate_slope=SolverConfig.degenerate_slope):
        ambient_temp = np.asarray(ambient_temp, dtype=float)
        q = np.asarray(q, dtype=float)
        beta0 = np.asarray(beta0, dtype=float)
        beta_slope = np.where(np.abs(beta_slope) < degenerate_slope, 0.0, beta_slope)
        disc = beta0**2 + 4.0 * beta_slope * q
        if np.any(disc < 0):
            raise NegativeDiscriminant(
                f"{int(np.sum(disc < 0))} model(s) have no real steady state; rebuild with solve_steady_state"
            )
        rate = np.sqrt(disc)
        # positive root of Q - b0 x - bT x^2, written without the b0 - sqrt cancellation
        delta_b = 2.0 * q / (rate + beta0)
        with np.errstate(divide="ignore", invalid="ignore"):
            delta_a = np.where(beta_slope == 0, np.inf, delta_b + beta0 / np.where(beta_slope == 0, 1.0, beta_slope))
        steady = delta_b + ambient_temp
        d0 = np.asarray(initial_temp, dtype=float) - ambient_temp
        c_prime = beta_slope * (steady - initial_temp) / (beta0 + beta_slope * (delta_b + d0))
        return cls(
            ambient_temp=_unwrap(ambient_temp),
            initial_temp=_unwrap(initial_temp),
            steady_temp=_unwrap(steady),
            q_si=_unwrap(q),
            beta0=_unwrap(beta0),
            beta_slope=_unwrap(beta_slope),
            delta_a=_unwrap(delta_a),
            delta_b=_unwrap(delta_b),
            c_prime=_unwrap(c_prime),
            rate=_unwrap(rate),
            current=_unwrap(current),
        )

    def restart(self, initial_temp) -> "LinearizedModel":
        """Same coefficients, new initial temperature."""
        return LinearizedModel.from_coefficients(
            self.ambient_temp, initial_temp, self.q_si, self.beta0, self.beta_slope, self.current
        )

    @property
    def is_linear(self):
        return np.asarray(self.beta_slope) == 0

    def __getitem__(self, index) -> "LinearizedModel":
        shape = np.broadcast_shapes(*(np.shape(getattr(self, f.name)) for f in fields(self)))
        return LinearizedModel(**{f.name: _unwrap(np.broadcast_to(getattr(self, f.name), shape)[index])
                                  for f in fields(self)})


def _unwrap(x):
    a = np.asarray(x, dtype=float)
    return float(a) if a.ndim == 0 else a


# -- steady state ------------------------------------------------------------

def solve_steady_state(conductor: Conductor, env, line_azimuth, current, initial_temp,
                       config: SolverConfig = SolverConfig(), raise_on_failure=True) -> SteadyState:
    """Steady-state conductor temperature by the secant-derivative Newton-Raphson scheme.

    Iterates on the temperature rise x = T_e - T_a with residual
    Q_si - beta(x) x.  The derivative of beta is replaced by its secant
    through the initial temperature, and convergence is declared once the
    residual times mC_p drops below ``config.heat_mismatch_tolerance`` (W/m).
    ``iterations`` counts residual evaluations.
    """
    ta = np.asarray(env.ambient_temp, dtype=float)
    mcp = np.asarray(conductor.heat_capacity, dtype=float)
    q = np.asarray(q_si(conductor, env, line_azimuth, current), dtype=float)
    shape = np.broadcast(ta, q, mcp, np.asarray(initial_temp)).shape

    def beta(x):
        return np.broadcast_to(beta_of_temp(conductor, env, line_azimuth, current, ta + x), shape)

    anchor = np.broadcast_to(np.asarray(initial_temp, dtype=float) - ta, shape)
    beta_anchor = beta(anchor)
    safe = np.where(beta_anchor > 0, beta_anchor, np.nan)
    x = np.where(np.isfinite(q / safe), q / safe, np.maximum(anchor, 1.0))
    x = np.array(np.broadcast_to(x, shape), dtype=float)

    iterations = np.zeros(shape, dtype=int)
    done = np.zeros(shape, dtype=bool)
    residual = np.full(shape, np.nan)
    tol = config.heat_mismatch_tolerance
    for it in range(1, config.max_iterations + 1):
        bx = beta(x)
        r = q - bx * x
        residual = np.where(done, residual, r * mcp)
        newly = ~done & (np.abs(r * mcp) < tol)
        iterations = np.where(newly, it, iterations)
        done |= newly
        if done.all():
            break
        dx_anchor = x - anchor
        near = np.abs(dx_anchor) < 1e-6
        h = np.where(near, 1e-3, dx_anchor)
        slope = (bx - beta_anchor) / h
        if np.any(near & ~done):
            slope = np.where(near, (beta(x + h) - bx) / h, slope)
        deriv = -bx - slope * x
        # a non-negative derivative would walk away from the root
        deriv = np.where(deriv < 0, deriv, -np.abs(bx) - 1e-12)
        step = -r / deriv
        x = np.where(done, x, np.clip(x + step, -200.0, 2000.0))
    iterations = np.where(done, iterations, config.max_iterations)

    result = SteadyState(
        temp=_unwrap(ta + x),
        iterations=int(iterations) if iterations.ndim == 0 else iterations,
        residual=_unwrap(residual),
        converged=bool(done) if done.ndim == 0 else done,
    )
    if raise_on_failure and not np.all(done):
        raise NonConvergence(
            f"steady state not reached in {config.max_iterations} iterations "
            f"({int(np.sum(~done))} case(s))",
            last_temp=result.temp,
            iterations=config.max_iterations,
        )
    return result


def linearize(conductor: Conductor, env, line_azimuth, current, initial_temp, steady_temp,
              config: SolverConfig = SolverConfig()) -> LinearizedModel:
    """Affine fit of beta through the initial and steady-state temperatures.

    When the two temperatures coincide (within 1e-9 degC) the slope is set to
    zero and the intercept to beta(T_c0), i.e. the plain linear ODE.
    The model's steady temperature is the exact root of the fitted quadratic,
    which differs from ``steady_temp`` only by the solver tolerance.
    """
    ta = np.asarray(env.ambient_temp, dtype=float)
    t0 = np.asarray(initial_temp, dtype=float)
    te = np.asarray(steady_temp, dtype=float)
    b_0 = beta_of_temp(conductor, env, line_azimuth, current, t0)
    b_e = beta_of_temp(conductor, env, line_azimuth, current, te)
    span = te - t0
    degenerate = np.abs(span) < 1e-9
    slope = np.where(degenerate, 0.0, (b_e - b_0) / np.where(degenerate, 1.0, span))
    intercept = b_0 - slope * (t0 - ta)
    q = q_si(conductor, env, line_azimuth, current)
    return LinearizedModel.from_coefficients(ta, t0, q, intercept, slope, current, config.degenerate_slope)


def build_model(conductor, env, line_azimuth, current, initial_temp, config=SolverConfig()):
    ss = solve_steady_state(conductor, env, line_azimuth, current, initial_temp, config)
    return linearize(conductor, env, line_azimuth, current, initial_temp, ss.temp, config)


# -- closed forms ------------------------------------------------------------

def _decay(model, t):
    t = np.asarray(t, dtype=float)
    return np.exp(-np.multiply.outer(model.rate, t) if np.ndim(model.rate) and np.ndim(t) else -model.rate * t)


def _bcast(x, t):
    """Align per-model values against an outer time axis."""
    x = np.asarray(x)
    if x.ndim and np.ndim(t):
        return x.reshape(x.shape + (1,) * np.ndim(t))
    return x


def eval_first_order(model: LinearizedModel, t):
    """T_e + (T_c0 - T_e) exp(-rate t); model arrays broadcast against an outer time axis."""
    e = _decay(model, t)
    out = _bcast(model.initial_temp, t) * e + _bcast(model.steady_temp, t) * (1.0 - e)
    return _unwrap(out)


def riccati_gap(model: LinearizedModel, t):
    """First-order minus Riccati temperature.

    Closed form (T_e - T_a + delta_a) C'^2 e (1 - e) / ((1 + C')(1 + C' e))
    with e = exp(-rate t); non-negative whenever beta_slope >= 0.
    """
    e = _decay(model, t)
    ta = np.asarray(model.ambient_temp)
    d0 = np.asarray(model.initial_temp) - ta
    denom = np.asarray(model.beta0) + np.asarray(model.beta_slope) * (np.asarray(model.delta_b) + d0)
    sc = np.asarray(model.rate) * (np.asarray(model.steady_temp) - np.asarray(model.initial_temp)) / denom
    c = np.asarray(model.c_prime)
    sc, c = _bcast(sc, t), _bcast(c, t)
    return _unwrap(sc * c * e * (1.0 - e) / ((1.0 + c) * (1.0 + c * e)))


def eval_riccati(model: LinearizedModel, t):
    """Riccati closed form, evaluated as the first-order trace minus :func:`riccati_gap`.

    Algebraically identical to
    T_a + (delta_b - delta_a C' e) / (1 + C' e) with e = exp(-rate t),
    but free of the cancellation in that quotient and exact in the
    linear (beta_slope = 0) limit.
    """
    return _unwrap(np.asarray(eval_first_order(model, t)) - np.asarray(riccati_gap(model, t)))


def error_bound(model: LinearizedModel):
    """Supremum over t of first-order minus Riccati temperature.

    ((sqrt(1+C') - 1)^2 / (1+C')) (T_e - T_a + delta_a), attained at
    exp(-rate t) = 1 / (1 + sqrt(1+C')); the same expression covers C' < 0.
    """
    c = np.asarray(model.c_prime, dtype=float)
    if np.any(c <= -1):
        raise InvalidModel("C' <= -1: initial temperature outside the Riccati basin")
    ta = np.asarray(model.ambient_temp)
    d0 = np.asarray(model.initial_temp) - ta
    denom = np.asarray(model.beta0) + np.asarray(model.beta_slope) * (np.asarray(model.delta_b) + d0)
    sc = np.asarray(model.rate) * (np.asarray(model.steady_temp) - np.asarray(model.initial_temp)) / denom
    s = np.sqrt(1.0 + c)
    # (s - 1)^2 == C'^2 / (1 + s)^2, so the bound is sc * C' / ((1 + C')(1 + s)^2)
    return _unwrap(sc * c / ((1.0 + c) * (1.0 + s) ** 2))


# -- current update ----------------------------------------------------------

def update_for_current(model: LinearizedModel, conductor: Conductor, new_current, strict=True) -> LinearizedModel:
    """Re-target a fitted model to another current under the same weather.

    The slope of beta is kept, Q_si and the intercept shift by the change in
    I^2 R(T_a) and I^2 alpha_R, and the steady state follows from the
    quadratic root.  With ``strict=False`` entries without a real root come
    back as NaN instead of raising.
    """
    i_old = np.asarray(model.current, dtype=float) ** 2
    i_new = np.asarray(new_current, dtype=float) ** 2
    mcp = conductor.heat_capacity
    q = model.q_si + (i_new - i_old) * conductor.resistance(model.ambient_temp) / mcp
    b0 = model.beta0 + (i_old - i_new) * conductor.resistance_slope / mcp
    bt = np.asarray(model.beta_slope)
    if not strict:
        bad = b0**2 + 4.0 * bt * q < 0
        if np.any(bad):
            q = np.where(bad, np.nan, q)
            with np.errstate(invalid="ignore"):
                return LinearizedModel.from_coefficients(model.ambient_temp, model.initial_temp, q, b0, bt, new_current)
    return LinearizedModel.from_coefficients(model.ambient_temp, model.initial_temp, q, b0, bt, new_current)


# -- threshold timing --------------------------------------------------------

def time_to_threshold(model: LinearizedModel, threshold, form="first_order"):
    """Seconds until the closed-form trace reaches ``threshold``.

    Returns 0 when the initial temperature is already at or above the
    threshold and ``NEVER`` (inf) when the steady state does not exceed it.
    """
    if form not in ("first_order", "riccati"):
        raise ValueError(f"unknown form {form!r}")
    t0 = np.asarray(model.initial_temp, dtype=float)
    te = np.asarray(model.steady_temp, dtype=float)
    th = np.asarray(threshold, dtype=float)
    reach = te > th
    ratio = np.where(reach, (te - t0) / np.where(reach, te - th, 1.0), 1.0)
    if form == "riccati":
        ta = np.asarray(model.ambient_temp)
        b0, bt = np.asarray(model.beta0), np.asarray(model.beta_slope)
        db = np.asarray(model.delta_b)
        ratio = ratio * (b0 + bt * (db + th - ta)) / (b0 + bt * (db + t0 - ta))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.log(np.where(reach, ratio, 1.0)) / np.asarray(model.rate)
    t = np.where(reach, np.maximum(t, 0.0), NEVER)
    t = np.where(t0 >= th, 0.0, t)
    return _unwrap(t)
