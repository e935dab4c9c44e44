"""State-of-charge evolution of flywheel energy storage under slotted power commands."""

__version__ = "0.1.0"

from .model import (
    CaseTag,
    EnergyTrace,
    FlywheelParams,
    ModelCoefficients,
    ParameterError,
    PowerProfile,
    SlotTransition,
    classify_transition,
    coefficients,
    energy_of_speed,
    filtered_mech_power,
    gamma,
    speed_of_energy,
    t_loss_from_inertia,
    validate_params,
    validate_profile,
)
from .exact import SimulationMode, SlotEnergy, simulate_exact, slot_energy_exact, step_exact
from .approx import (
    ApproxMode,
    BoundReport,
    check_bound,
    error_bound,
    error_bounds,
    simulate_approx,
    slot_energy_approx,
)
from .oracle import (
    OracleConfig,
    integrate_ode,
    integrate_physical,
    quadrature_slot_energy,
    simulate_baseline,
)
