"""Shared domain types and closed-form building blocks.

Sign convention: positive power charges the flywheel, negative power
discharges it. All quantities are SI (W, J, s).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class ParameterError(ValueError):
    """Base class for rejected model inputs."""


class TimeConstantError(ParameterError):
    pass


class EfficiencyError(ParameterError):
    pass


class EnergyRangeError(ParameterError):
    pass


class SingularityError(ParameterError):
    pass


class ProfileError(ParameterError):
    pass


@dataclass(frozen=True)
class FlywheelParams:
    """Physical and model constants of one flywheel unit.

    Attributes
    ----------
    T_loss : float
        Self-discharge time constant [s].
    T_cont : float
        Time constant of the power controller and machine [s].
    e_c, e_d : float
        Charging / discharging efficiency, in (0, 1].
    E_init : float
        Stored energy at t = 0 [J].
    E_cap : float
        Storage capacity [J].
    P_rated : float
        Rated power magnitude [W].
    delta : float
        Slot duration [s].
    P_prev_init : float
        Grid power assumed to be applied before t = 0 [W].
    """

    T_loss: float
    T_cont: float
    e_c: float
    e_d: float
    E_init: float
    E_cap: float
    P_rated: float
    delta: float
    P_prev_init: float = 0.0

    def replace(self, **changes) -> "FlywheelParams":
        return type(self)(**{**self.__dict__, **changes})


# relative separation required between T_cont and T_loss
SINGULARITY_RTOL = 1e-9


def validate_params(params: FlywheelParams) -> FlywheelParams:
    """Return ``params`` unchanged if every model constraint holds."""
    for name in ("T_loss", "T_cont", "delta"):
        value = getattr(params, name)
        if not (math.isfinite(value) and value > 0):
            raise TimeConstantError(f"{name} must be positive and finite, got {value!r}")
    for name in ("e_c", "e_d"):
        value = getattr(params, name)
        if not (0.0 < value <= 1.0):
            raise EfficiencyError(f"efficiency out of range: {name}={value!r} not in (0, 1]")
    if not (math.isfinite(params.E_cap) and params.E_cap > 0):
        raise EnergyRangeError(f"E_cap must be positive, got {params.E_cap!r}")
    if not (0.0 <= params.E_init <= params.E_cap):
        raise EnergyRangeError(
            f"E_init={params.E_init!r} outside [0, E_cap={params.E_cap!r}]")
    if not (math.isfinite(params.P_rated) and params.P_rated > 0):
        raise ParameterError(f"P_rated must be positive, got {params.P_rated!r}")
    if not (math.isfinite(params.P_prev_init) and abs(params.P_prev_init) <= params.P_rated):
        raise ParameterError(
            f"P_prev_init={params.P_prev_init!r} exceeds rated power {params.P_rated!r}")
    if abs(params.T_cont - params.T_loss) / params.T_loss <= SINGULARITY_RTOL:
        raise SingularityError(
            f"coefficient singularity: T_cont={params.T_cont!r} too close to T_loss={params.T_loss!r}")
    return params


@dataclass(frozen=True)
class PowerProfile:
    """Slot duration plus one constant grid power per slot (slot k = 1..K)."""

    delta: float
    powers: tuple

    def __post_init__(self):
        object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))

    def __len__(self):
        return len(self.powers)


def validate_profile(profile: PowerProfile, params: FlywheelParams) -> PowerProfile:
    if len(profile.powers) == 0:
        raise ProfileError("empty profile")
    if not math.isclose(profile.delta, params.delta, rel_tol=1e-12, abs_tol=0.0):
        raise ProfileError(
            f"profile slot duration {profile.delta!r} != params.delta {params.delta!r}")
    for k, p in enumerate(profile.powers, start=1):
        if not math.isfinite(p):
            raise ProfileError(f"slot {k}: power {p!r} is not finite")
        if abs(p) > params.P_rated:
            raise ProfileError(
                f"slot {k}: |power| {abs(p)!r} W exceeds rated power {params.P_rated!r} W")
    return profile


class CaseTag(str, enum.Enum):
    ZERO_IN = "ZeroIn"
    ZERO_PREV = "ZeroPrev"
    SAME_SIGN = "SameSign"
    OPPOSITE_NO_SWITCH = "OppositeNoSwitch"
    OPPOSITE_SWITCH = "OppositeSwitch"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SlotTransition:
    """Classification of one slot boundary.

    ``eta_eff`` is the efficiency that holds over the whole slot when the
    filtered power keeps one sign; ``eta_eff_compact`` is the magnitude rule
    (``eta_in`` if ``|P_in| > |P_prev|`` else ``eta_prev``), kept for
    comparison. The two only differ for OppositeNoSwitch slots shorter than
    ``T_cont * ln 2``.
    """

    case_tag: CaseTag
    eta_in: float
    eta_prev: float
    eta_eff: float
    eta_eff_compact: float
    t_change: Optional[float] = None

    @property
    def switches(self) -> bool:
        return self.case_tag is CaseTag.OPPOSITE_SWITCH


@dataclass(frozen=True)
class ModelCoefficients:
    gamma: float
    p_coef: float
    q_coef: float


def gamma(delta: float, T_loss: float) -> float:
    """Fraction of stored energy left after ``delta`` seconds of self-discharge."""
    if not (delta > 0 and T_loss > 0):
        raise TimeConstantError("delta and T_loss must be positive")
    return math.exp(-delta / T_loss)


def coefficients(T_loss: float, T_cont: float, delta: Optional[float] = None) -> ModelCoefficients:
    """P and Q coefficients of the exact slot energy (plus gamma when ``delta`` is given).

    ``gamma`` is NaN when no slot duration is supplied.
    """
    if not (T_loss > 0 and T_cont > 0):
        raise TimeConstantError("T_loss and T_cont must be positive")
    diff = T_cont - T_loss
    if abs(diff) / T_loss <= SINGULARITY_RTOL:
        raise SingularityError("coefficient singularity: T_cont == T_loss")
    q = diff / (T_loss * T_cont)
    p = T_loss - T_loss * T_cont / diff
    g = gamma(delta, T_loss) if delta is not None else math.nan
    return ModelCoefficients(gamma=g, p_coef=p, q_coef=q)


def efficiency(power: float, e_c: float, e_d: float) -> float:
    return e_c if power >= 0 else e_d


def compact_eta_eff(P_in: float, P_prev: float, e_c: float, e_d: float) -> float:
    """Magnitude rule: efficiency of whichever slot power is larger in magnitude."""
    if abs(P_in) > abs(P_prev):
        return efficiency(P_in, e_c, e_d)
    return efficiency(P_prev, e_c, e_d)


def classify_transition(P_in: float, P_prev: float, delta: float, T_cont: float,
                        e_c: float, e_d: float) -> SlotTransition:
    """Classify the slot boundary between ``P_prev`` and ``P_in``.

    The efficiency in ``eta_eff`` follows the sign of the filtered power over
    the slot: ``eta_prev`` when the slot power is zero or when opposite signs
    never cross within the slot, ``eta_in`` otherwise. For a switching slot
    it is set to ``eta_in`` (the efficiency after the zero crossing) and
    ``t_change`` holds the crossing time.
    """
    eta_in = efficiency(P_in, e_c, e_d)
    eta_prev = efficiency(P_prev, e_c, e_d)
    compact = compact_eta_eff(P_in, P_prev, e_c, e_d)
    t_change = None
    if P_in == 0:
        tag, eff = CaseTag.ZERO_IN, eta_prev
    elif P_prev == 0:
        tag, eff = CaseTag.ZERO_PREV, eta_in
    elif (P_in > 0) == (P_prev > 0):
        tag, eff = CaseTag.SAME_SIGN, eta_in
    else:
        # crossing time -T_cont * ln(P_in / (P_in - P_prev)), written so it
        # stays accurate when |P_prev| << |P_in|; t < delta is the same test
        # as P_in / (P_in - P_prev) > exp(-delta / T_cont)
        t = T_cont * math.log1p(-P_prev / P_in)
        if t <= 0.0:
            # P_prev is below the resolution of P_in: no crossing to resolve
            tag, eff = CaseTag.ZERO_PREV, eta_in
        elif t < delta:
            tag, eff = CaseTag.OPPOSITE_SWITCH, eta_in
            t_change = t
        else:
            tag, eff = CaseTag.OPPOSITE_NO_SWITCH, eta_prev
    return SlotTransition(tag, eta_in, eta_prev, eff, compact, t_change)


def filtered_power(t, P_in: float, P_prev: float, T_cont: float):
    """Electrical subsystem output before efficiency, assuming it sat at ``P_prev`` at t = 0."""
    return P_prev + (P_in - P_prev) * -np.expm1(-np.asarray(t, dtype=float) / T_cont)


def filtered_mech_power(t, P_in: float, P_prev: float, T_cont: float,
                        e_c: float, e_d: float):
    """Mechanical input power at time ``t`` into the slot.

    Efficiency is applied after filtering, chosen pointwise by the sign of the
    filtered power. Accepts scalar or array ``t``.
    """
    y = filtered_power(t, P_in, P_prev, T_cont)
    out = np.where(y >= 0, e_c, e_d) * y
    return float(out) if out.ndim == 0 else out


def t_loss_from_inertia(J: float, Q_loss: float) -> float:
    """Self-discharge time constant from inertia and the lumped loss factor."""
    if not (J > 0 and Q_loss > 0):
        raise ParameterError("J and Q_loss must be positive")
    return J / (2.0 * Q_loss)


def energy_of_speed(J: float, omega: float) -> float:
    if J <= 0:
        raise ParameterError("inertia must be positive")
    if omega < 0:
        raise ParameterError("angular speed must be non-negative")
    return 0.5 * J * omega * omega


def speed_of_energy(J: float, E: float) -> float:
    if J <= 0:
        raise ParameterError("inertia must be positive")
    if E < 0:
        raise EnergyRangeError(f"negative stored energy {E!r}")
    return math.sqrt(2.0 * E / J)


def _frozen(a) -> np.ndarray:
    arr = np.array(a)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EnergyTrace:
    """Stored energy at every slot boundary.

    ``energy[k]`` is the energy at ``time[k] = k * delta`` for k = 0..K.
    ``transitions[k-1]`` and ``saturated[k-1]`` describe slot k.
    """

    slot: np.ndarray
    time: np.ndarray
    energy: np.ndarray
    transitions: tuple = field(default=())
    saturated: np.ndarray = field(default_factory=lambda: _frozen(np.zeros(0, dtype=bool)))

    def __post_init__(self):
        object.__setattr__(self, "slot", _frozen(np.asarray(self.slot, dtype=int)))
        object.__setattr__(self, "time", _frozen(np.asarray(self.time, dtype=float)))
        object.__setattr__(self, "energy", _frozen(np.asarray(self.energy, dtype=float)))
        object.__setattr__(self, "saturated", _frozen(np.asarray(self.saturated, dtype=bool)))
        object.__setattr__(self, "transitions", tuple(self.transitions))

    def __len__(self):
        return len(self.energy)

    @property
    def final(self) -> float:
        return float(self.energy[-1])


def march(profile: PowerProfile, params: FlywheelParams, step, clamp: bool = False,
          prev_powers: Optional[Sequence[float]] = None) -> EnergyTrace:
    """Run a slot recursion ``E_k = step(E_{k-1}, P_in, P_prev, k)`` over a profile.

    ``prev_powers`` overrides the power used to classify each slot (the
    physical oracle carries its own filter state). Saturation is flagged when
    an update leaves ``[0, E_cap]``; in clamp mode the energy is also clipped.
    """
    validate_params(params)
    validate_profile(profile, params)
    powers = profile.powers
    K = len(powers)
    energy = np.empty(K + 1)
    energy[0] = params.E_init
    flags = np.zeros(K, dtype=bool)
    transitions = []
    E = params.E_init
    P_prev = params.P_prev_init
    for k, P_in in enumerate(powers, start=1):
        classify_prev = P_prev if prev_powers is None else prev_powers[k - 1]
        transitions.append(classify_transition(P_in, classify_prev, params.delta,
                                               params.T_cont, params.e_c, params.e_d))
        E = step(E, P_in, P_prev, k)
        if E < 0 or E > params.E_cap:
            flags[k - 1] = True
            if clamp:
                E = min(max(E, 0.0), params.E_cap)
        energy[k] = E
        P_prev = P_in
    slots = np.arange(K + 1)
    return EnergyTrace(slot=slots, time=slots * params.delta, energy=energy,
                       transitions=transitions, saturated=flags)
