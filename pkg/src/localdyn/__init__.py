"""Local dynamics over number fields: flows, non-reversibility and arrows of time."""

from .errors import *  # noqa: F401,F403
from .finslerflow import (
    GeodesicState,
    RandersMetric,
    chord_energy_observable,
    finsler_norm,
    finsler_xi,
    finsler_xi_closed_form,
    geodesic_flow,
    integrate_geodesic,
    perturbed_randers,
    reversibility_function_lambda,
)
from .flowcore import (
    Flow,
    NonReversibilityReport,
    Observable,
    StateSpace,
    check_flow_axioms,
    conjugate,
    detect_turning_points,
    symmetrize,
    xi,
    xi_support_fraction,
    xi_value,
)
from .quantumflow import QuantumSystem, ScatteringSystem, quantum_flow, quantum_xi
from .thermolab import (
    EntropyFunction,
    ThermoSpace,
    arrow_coincidence,
    asymptotic_thermo_check,
    extensivity_check,
    monotonicity_check,
)
from .timefield import REALS, RATIONALS, TimeField, TimeParameter, is_time_parameter

__version__ = "0.1.0"
