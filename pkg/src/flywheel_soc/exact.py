"""Exact slot energy and the slot recursion E_k = gamma * E_{k-1} + slot energy."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .model import (
    CaseTag,
    EnergyTrace,
    FlywheelParams,
    PowerProfile,
    classify_transition,
    march,
    validate_params,
)


class FormulaBranch(str, enum.Enum):
    G_BAR = "G_bar"
    H_BAR = "H_bar"


class SimulationMode(str, enum.Enum):
    UNCONSTRAINED = "unconstrained"
    CLAMP = "clamp"


@dataclass(frozen=True)
class SlotEnergy:
    value: float
    case_tag: CaseTag
    formula_branch: FormulaBranch


def _exact_value(P_in, P_prev, tr, L, C, delta):
    # The textbook arrangement multiplies terms of size P_in * T_loss by
    # gamma and lets them cancel; this grouping is algebraically identical
    # but keeps every term at the size of the result.
    dP = P_in - P_prev
    K = L * C / (L - C)            # equals -1/Q
    g = math.exp(-delta / L)
    fast = math.exp(-delta / C)    # gamma * exp(delta * Q)
    if tr.switches:
        ein, eprev = tr.eta_in, tr.eta_prev
        tc = tr.t_change
        s = math.exp(-(delta - tc) / L)
        one_minus_s = -math.expm1(-(delta - tc) / L)
        s_minus_g = g * math.expm1(tc / L)
        slow = P_in * L * (ein * one_minus_s + eprev * s_minus_g)
        transient = K * ((eprev - ein) * s * P_in + dP * (ein * fast - eprev * g))
        return slow + transient
    eta = tr.eta_eff
    return eta * (P_in * L * -math.expm1(-delta / L) + dP * K * (fast - g))


def slot_energy_exact(P_in: float, P_prev: float, params: FlywheelParams) -> SlotEnergy:
    """Energy delivered to the flywheel during one slot, net of in-slot self-discharge.

    Closed form of the integral of the filtered mechanical power weighted by
    ``exp(-(delta - t) / T_loss)`` over the slot. Slots whose filtered power
    crosses zero use the two-efficiency branch (G_bar); all others use a
    single efficiency (H_bar).
    """
    validate_params(params)
    tr = classify_transition(P_in, P_prev, params.delta, params.T_cont, params.e_c, params.e_d)
    value = _exact_value(P_in, P_prev, tr, params.T_loss, params.T_cont, params.delta)
    branch = FormulaBranch.G_BAR if tr.switches else FormulaBranch.H_BAR
    return SlotEnergy(value=value, case_tag=tr.case_tag, formula_branch=branch)


def step_exact(E_prev: float, P_in: float, P_prev: float, params: FlywheelParams) -> float:
    """One slot of the exact recursion. No saturation is applied."""
    g = math.exp(-params.delta / params.T_loss)
    return g * E_prev + slot_energy_exact(P_in, P_prev, params).value


def simulate_exact(profile: PowerProfile, params: FlywheelParams,
                   mode: SimulationMode | str = SimulationMode.UNCONSTRAINED) -> EnergyTrace:
    mode = SimulationMode(mode)
    validate_params(params)
    g = math.exp(-params.delta / params.T_loss)
    L, C, d, ec, ed = params.T_loss, params.T_cont, params.delta, params.e_c, params.e_d

    def step(E, P_in, P_prev, k):
        tr = classify_transition(P_in, P_prev, d, C, ec, ed)
        return g * E + _exact_value(P_in, P_prev, tr, L, C, d)

    return march(profile, params, step, clamp=mode is SimulationMode.CLAMP)
