"""Brute-force references that share no algebra with the closed forms.

* adaptive quadrature of the per-slot integrals,
* fixed-step RK4 integration of ``dE/dt = P_m(t) - E / T_loss``,
* a "physical" variant whose filter state is carried across slot boundaries
  instead of being reset to the previous slot power,
* the lossless, filterless baseline ``dE/dt = eta * P_in``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, signal

from .model import (
    EnergyTrace,
    FlywheelParams,
    PowerProfile,
    efficiency,
    filtered_mech_power,
    march,
    validate_params,
    validate_profile,
)

# beyond this many T_cont the filter transient is below double precision
TRANSIENT_SPAN = 40.0


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    quad_tol: float = 1e-10
    substeps_per_slot: int = 1000
    split_at_t_change: bool = True

    def __post_init__(self):
        if not self.quad_tol > 0:
            raise ValueError("quad_tol must be positive")
        if int(self.substeps_per_slot) < 1:
            raise ValueError("substeps_per_slot must be >= 1")


def _crossing(y0: float, P_in: float, delta: float, T_cont: float):
    """Time at which the filter output moving from y0 toward P_in crosses zero, if inside the slot."""
    if y0 * P_in >= 0:
        return None
    t = -T_cont * math.log(P_in / (P_in - y0))
    return t if 0.0 < t < delta else None


def _breakpoints(y0, P_in, delta, T_cont, split_at_change):
    pts = {0.0, delta}
    if split_at_change:
        t = _crossing(y0, P_in, delta, T_cont)
        if t is not None:
            pts.add(t)
    if TRANSIENT_SPAN * T_cont < delta:
        pts.add(TRANSIENT_SPAN * T_cont)
    return sorted(pts)


def quadrature_slot_energy(P_in: float, P_prev: float, params: FlywheelParams,
                           weighted: bool = True, config: OracleConfig = OracleConfig()) -> float:
    """Adaptive quadrature of the filtered mechanical power over one slot.

    With ``weighted`` the integrand carries the self-discharge factor
    ``exp(-(delta - t) / T_loss)``; without it the plain integral is returned.
    """
    validate_params(params)
    d, L, C = params.delta, params.T_loss, params.T_cont

    def f(t):
        p = filtered_mech_power(t, P_in, P_prev, C, params.e_c, params.e_d)
        return p * math.exp(-(d - t) / L) if weighted else p

    epsabs = 1e-14 * max(abs(P_in), abs(P_prev)) * d
    pts = _breakpoints(P_prev, P_in, d, C, config.split_at_t_change)
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            out = integrate.quad(f, a, b, epsabs=epsabs, epsrel=config.quad_tol,
                                 limit=200, full_output=1)
        value, err = out[0], out[1]
        if len(out) > 3 and err > max(epsabs, config.quad_tol * abs(value)):
            raise OracleError(f"quadrature on [{a}, {b}] did not converge: {out[3]}")
        total += value
    return total


@lru_cache(maxsize=64)
def _rk4_decay(h: float, L: float, n: int):
    # RK4 amplification factor of dE/dt = -E/L and its powers R^(n-1) .. R^0
    k1 = -1.0 / L
    k2 = -(1.0 + 0.5 * h * k1) / L
    k3 = -(1.0 + 0.5 * h * k2) / L
    k4 = -(1.0 + h * k3) / L
    R = 1.0 + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    powers = R ** np.arange(n - 1, -1, -1, dtype=float)
    powers.setflags(write=False)
    return R, powers


def _rk4_forcing(a, b, n, L, power):
    """Per-step RK4 increments for E = 0, one per substep on [a, b]."""
    h = (b - a) / n
    t = a + h * np.arange(n)
    f0 = power(t)
    fm = power(t + 0.5 * h)
    f1 = power(t + h)
    k1 = f0
    k2 = fm - 0.5 * h * k1 / L
    k3 = fm - 0.5 * h * k2 / L
    k4 = f1 - h * k3 / L
    return h, t, h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_slot(E0, y0, P_in, params, config, dense=False):
    """Classical RK4 over one slot, ``substeps_per_slot`` steps per smooth piece.

    The RK4 update of a linear ODE with explicit forcing is affine in E, so
    ``E_{n+1} = R * E_n + c_n`` and the whole piece reduces to a weighted sum.
    The result is identical (up to rounding) to stepping in a Python loop.
    """
    L, C, d = params.T_loss, params.T_cont, params.delta
    n = int(config.substeps_per_slot)

    def power(t):
        return filtered_mech_power(t, P_in, y0, C, params.e_c, params.e_d)

    E = E0
    times, values = [], []
    pts = _breakpoints(y0, P_in, d, C, config.split_at_t_change)
    for a, b in zip(pts[:-1], pts[1:]):
        h, t, c = _rk4_forcing(a, b, n, L, power)
        R, powers = _rk4_decay(h, L, n)
        if dense:
            run = signal.lfilter([1.0], [1.0, -R], c, zi=[R * E])[0]
            times.append(t + h)
            values.append(run)
            E = float(run[-1])
        else:
            E = powers[0] * R * E + float(powers @ c)
    if dense:
        return E, np.concatenate(times), np.concatenate(values)
    return E


def integrate_ode(profile: PowerProfile, params: FlywheelParams,
                  config: OracleConfig = OracleConfig(), clamp: bool = False) -> EnergyTrace:
    """Fixed-step RK4 reference trace; the filter restarts from the previous slot power."""

    def step(E, P_in, P_prev, k):
        return _rk4_slot(E, P_prev, P_in, params, config)

    return march(profile, params, step, clamp=clamp)


def ode_intraslot(profile: PowerProfile, params: FlywheelParams,
                  config: OracleConfig = OracleConfig()):
    """Energy at every RK4 substep, as ``(times, energies)`` starting from t = 0."""
    validate_params(params)
    validate_profile(profile, params)
    times, values = [np.zeros(1)], [np.array([params.E_init])]
    E, P_prev = params.E_init, params.P_prev_init
    for k, P_in in enumerate(profile.powers):
        E, t, v = _rk4_slot(E, P_prev, P_in, params, config, dense=True)
        times.append(t + k * params.delta)
        values.append(v)
        P_prev = P_in
    return np.concatenate(times), np.concatenate(values)


def filter_states(profile: PowerProfile, params: FlywheelParams) -> list:
    """Filter output at the start of each slot when it is never reset."""
    decay = math.exp(-params.delta / params.T_cont)
    y = params.P_prev_init
    states = []
    for P_in in profile.powers:
        states.append(y)
        y = P_in + (y - P_in) * decay
    return states


def integrate_physical(profile: PowerProfile, params: FlywheelParams,
                       config: OracleConfig = OracleConfig(), clamp: bool = False) -> EnergyTrace:
    """RK4 trace with the controller filter state carried across slot boundaries.

    The filter ``y' = (P_in - y) / T_cont`` is linear with constant input per
    slot, so its state is propagated in closed form; only the energy equation
    ``E' = eta(y) * y - E / T_loss`` is stepped numerically.
    """
    validate_params(params)
    validate_profile(profile, params)
    y0s = filter_states(profile, params)

    def step(E, P_in, P_prev, k):
        return _rk4_slot(E, y0s[k - 1], P_in, params, config)

    return march(profile, params, step, clamp=clamp, prev_powers=y0s)


def simulate_baseline(profile: PowerProfile, params: FlywheelParams,
                      clamp: bool = False) -> EnergyTrace:
    """Lossless, instantaneous model: ``E_k = E_{k-1} + eta * P_in * delta``."""
    d, ec, ed = params.delta, params.e_c, params.e_d

    def step(E, P_in, P_prev, k):
        return E + efficiency(P_in, ec, ed) * P_in * d

    return march(profile, params, step, clamp=clamp)
