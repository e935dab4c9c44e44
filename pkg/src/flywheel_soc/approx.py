"""Approximate slot energy (in-slot self-discharge ignored) and its error bound."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .exact import SimulationMode, simulate_exact
from .model import (
    EnergyTrace,
    FlywheelParams,
    PowerProfile,
    ProfileError,
    SlotTransition,
    classify_transition,
    march,
    validate_params,
)

# absolute slack [J] absorbing floating-point rounding in bound checks
BOUND_SLACK = 1e-9


class ApproxMode(str, enum.Enum):
    FULL = "full"
    TRUNCATED = "truncated"


def _approx_value(P_in: float, P_prev: float, tr: SlotTransition,
                  delta: float, C: float, mode: ApproxMode) -> float:
    if tr.switches:
        tc = tr.t_change
        value = (tr.eta_prev * (P_in * tc + P_prev * C)
                 + tr.eta_in * P_in * (delta - tc - C))
        eta_tail = tr.eta_in
    else:
        value = tr.eta_eff * (P_in * (delta - C) + P_prev * C)
        eta_tail = tr.eta_eff
    if mode is ApproxMode.FULL:
        # the part of the filter transient that has not died out by the slot end
        value += eta_tail * (P_in - P_prev) * C * math.exp(-delta / C)
    return value


def slot_energy_approx(P_in: float, P_prev: float, params: FlywheelParams,
                       mode: Union[ApproxMode, str] = ApproxMode.TRUNCATED) -> float:
    """Integral of the filtered mechanical power over one slot, unweighted.

    ``TRUNCATED`` drops the ``exp(-delta / T_cont)`` terms, which is accurate
    once the slot is many controller time constants long.
    """
    mode = ApproxMode(mode)
    validate_params(params)
    tr = classify_transition(P_in, P_prev, params.delta, params.T_cont, params.e_c, params.e_d)
    return _approx_value(P_in, P_prev, tr, params.delta, params.T_cont, mode)


def simulate_approx(profile: PowerProfile, params: FlywheelParams,
                    mode: Union[ApproxMode, str] = ApproxMode.TRUNCATED,
                    clamp_mode: Union[SimulationMode, str] = SimulationMode.UNCONSTRAINED,
                    ) -> EnergyTrace:
    mode = ApproxMode(mode)
    clamp_mode = SimulationMode(clamp_mode)
    validate_params(params)
    g = math.exp(-params.delta / params.T_loss)
    d, C, ec, ed = params.delta, params.T_cont, params.e_c, params.e_d

    def step(E, P_in, P_prev, k):
        tr = classify_transition(P_in, P_prev, d, C, ec, ed)
        return g * E + _approx_value(P_in, P_prev, tr, d, C, mode)

    return march(profile, params, step, clamp=clamp_mode is SimulationMode.CLAMP)


def _powers(profile) -> Sequence[float]:
    return profile.powers if isinstance(profile, PowerProfile) else tuple(profile)


def peak_power(profile, k: int, P_prev_init: float = 0.0) -> float:
    """Largest grid power magnitude applied over [0, k * delta].

    The filter starts from ``P_prev_init``, so that value counts too. For
    ``k = 0`` the first slot's power is used.
    """
    powers = _powers(profile)
    if not powers:
        raise ProfileError("empty profile")
    if k < 0:
        raise ValueError(f"slot index must be non-negative, got {k}")
    window = powers[:max(k, 1)]
    return max(max(map(abs, window)), abs(P_prev_init))


def error_bound(k: int, delta: float, T_loss: float, profile, e_d: float,
                P_prev_init: float = 0.0) -> float:
    """Upper bound on ``|E(t_k) - E_app(t_k)|``.

    ``(1 - exp(-(k + 1) * delta / T_loss)) * R_max * delta`` with
    ``R_max = e_d * max |P_in|`` over the first ``k`` slots. Pass
    ``k = math.inf`` for the limiting value ``R_max * delta`` over the
    whole profile.
    """
    if math.isinf(k):
        return e_d * peak_power(profile, len(_powers(profile)), P_prev_init) * delta
    r_max = e_d * peak_power(profile, k, P_prev_init)
    return -math.expm1(-(k + 1) * delta / T_loss) * r_max * delta


def error_bounds(n: int, delta: float, T_loss: float, profile, e_d: float,
                 P_prev_init: float = 0.0) -> np.ndarray:
    """``error_bound(k, ...)`` for ``k = 0 .. n - 1`` in one pass."""
    powers = np.abs(np.asarray(_powers(profile), dtype=float))
    if powers.size == 0:
        raise ProfileError("empty profile")
    k = np.arange(n)
    running = np.maximum(np.maximum.accumulate(powers), abs(P_prev_init))
    # slot k sees the first max(k, 1) powers; past the end the peak is final
    peak = running[np.clip(k - 1, 0, powers.size - 1)]
    # math.expm1 rather than np.expm1 keeps results bit-identical to error_bound
    growth = np.fromiter((-math.expm1(-(j + 1) * delta / T_loss) for j in range(n)), float, n)
    return growth * (e_d * peak) * delta


@dataclass(frozen=True)
class BoundEntry:
    k: int
    gap: float
    bound: float
    satisfied: bool


@dataclass(frozen=True)
class BoundReport:
    entries: tuple
    r_max: float
    asymptotic_bound: float

    @property
    def all_satisfied(self) -> bool:
        return all(e.satisfied for e in self.entries)

    @property
    def violations(self) -> list:
        return [e for e in self.entries if not e.satisfied]

    @property
    def gaps(self) -> np.ndarray:
        return np.array([e.gap for e in self.entries])

    @property
    def bounds(self) -> np.ndarray:
        return np.array([e.bound for e in self.entries])


def bound_report(exact: EnergyTrace, approx: EnergyTrace, profile: PowerProfile,
                 params: FlywheelParams) -> BoundReport:
    """Compare two traces slot by slot against the error bound."""
    if len(exact) != len(approx) or len(exact) != len(profile) + 1:
        raise ProfileError(
            f"trace lengths {len(exact)}/{len(approx)} do not match a {len(profile)}-slot profile")
    entries = []
    asymptotic = error_bound(math.inf, params.delta, params.T_loss, profile, params.e_d,
                             params.P_prev_init)
    bounds = error_bounds(len(exact), params.delta, params.T_loss, profile, params.e_d,
                          params.P_prev_init)
    for k in range(len(exact)):
        gap = abs(float(exact.energy[k]) - float(approx.energy[k]))
        bound = float(bounds[k])
        ok = gap <= bound + BOUND_SLACK and gap <= asymptotic + BOUND_SLACK
        entries.append(BoundEntry(k=k, gap=gap, bound=bound, satisfied=ok))
    return BoundReport(entries=tuple(entries), r_max=asymptotic / params.delta,
                       asymptotic_bound=asymptotic)


def check_bound(profile: PowerProfile, params: FlywheelParams,
                mode: Union[ApproxMode, str] = ApproxMode.TRUNCATED) -> BoundReport:
    """Run both recursions unconstrained and check every slot against the bound.

    Clamping is deliberately not offered: saturation breaks the linear
    superposition the bound relies on.
    """
    exact = simulate_exact(profile, params, SimulationMode.UNCONSTRAINED)
    approx = simulate_approx(profile, params, mode, SimulationMode.UNCONSTRAINED)
    return bound_report(exact, approx, profile, params)
