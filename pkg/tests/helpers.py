"""Shared generators and reference formulas for the test suite."""
import math

import numpy as np

from flywheel_soc import CaseTag, FlywheelParams

CASES = list(CaseTag)


def base_params(**overrides):
    values = dict(T_loss=10000.0, T_cont=0.2, e_c=0.9, e_d=0.95, E_init=1e6, E_cap=9e7,
                  P_rated=1e5, delta=300.0, P_prev_init=0.0)
    values.update(overrides)
    return FlywheelParams(**values)


def random_params(rng, delta_max=900.0):
    return FlywheelParams(
        T_loss=float(rng.uniform(1e3, 1e5)),
        T_cont=float(rng.uniform(0.05, 0.4)),
        e_c=float(rng.uniform(0.85, 1.0)),
        e_d=float(rng.uniform(0.85, 1.0)),
        E_init=1e6, E_cap=9e7, P_rated=1e5,
        delta=float(rng.uniform(1.0, delta_max)),
    )


def random_case_tuple(rng, case):
    """Draw (P_in, P_prev, params) guaranteed to fall in ``case``."""
    P = 1e5
    if case is CaseTag.OPPOSITE_NO_SWITCH:
        # the no-switch window shrinks like exp(-delta/T_cont); keep it resolvable
        params = random_params(rng, delta_max=1.0)
        params = params.replace(delta=float(rng.uniform(1.0, min(900.0, 25 * params.T_cont))))
    else:
        params = random_params(rng)
    sign = rng.choice([-1.0, 1.0])
    if case is CaseTag.ZERO_IN:
        return 0.0, sign * rng.uniform(0, P), params
    if case is CaseTag.ZERO_PREV:
        return sign * rng.uniform(1e-3, P), 0.0, params
    if case is CaseTag.SAME_SIGN:
        return sign * rng.uniform(1e-3, P), sign * rng.uniform(1e-3, P), params
    threshold = math.exp(-params.delta / params.T_cont)
    if case is CaseTag.OPPOSITE_SWITCH:
        while True:
            P_in, P_prev = sign * rng.uniform(1e-3, P), -sign * rng.uniform(1e-3, P)
            if P_in / (P_in - P_prev) > threshold:
                return P_in, P_prev, params
    # ratio = |P_in| / (|P_in| + |P_prev|) = u * threshold
    ratio = rng.uniform(0.01, 0.999) * threshold
    P_prev = -sign * rng.uniform(1.0, P)
    P_in = sign * abs(P_prev) * ratio / (1 - ratio)
    return P_in, P_prev, params


def case_sweep(seed, n):
    """``n`` tuples cycling through all five cases."""
    rng = np.random.default_rng(seed)
    return [(CASES[i % 5],) + random_case_tuple(rng, CASES[i % 5]) for i in range(n)]


def literal_exact(P_in, P_prev, params, eta_eff, eta_in, eta_prev, switches):
    """Closed form transcribed term by term, without any regrouping."""
    L, C, d = params.T_loss, params.T_cont, params.delta
    G = math.exp(-d / L)
    P = L - L * C / (C - L)
    Q = (C - L) / (L * C)
    if switches:
        return G * (P * (eta_prev - eta_in) * P_in * ((P_in - P_prev) / P_in) ** (C / L)
                    + P_in * L * (eta_in / G - eta_prev)
                    - ((P_in - P_prev) / Q) * (math.exp(d * Q) * eta_in - eta_prev))
    return G * eta_eff * (P_in * L * (1 / G - 1) - ((P_in - P_prev) / Q) * (math.exp(d * Q) - 1))


def random_profile_powers(rng, n, P_rated=1e5, zero_frac=0.1):
    p = rng.uniform(-P_rated, P_rated, n)
    p[rng.random(n) < zero_frac] = 0.0
    return p
