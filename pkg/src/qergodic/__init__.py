"""Quasi-stationary and quasi-ergodic measures of finite absorbing Markov
chains, with exact finite-horizon and Monte Carlo cross-checks."""

from .errors import (
    AssumptionViolation,
    NumericalError,
    QergodicError,
    StructureError,
    ValidationError,
)
from .limits import (
    QuasiErgodicResult,
    full_qed,
    irreducible_qed,
    observable_limit,
    quasi_stationary_distribution,
)
from .model import (
    SubstochasticModel,
    finite_horizon_block_occupation,
    finite_horizon_observable,
    finite_horizon_state_occupation,
    monte_carlo_occupation,
    occupation_profile,
    simulate_trajectory,
    survival_probability,
    validate,
)
from .structure import condense

__all__ = [
    "AssumptionViolation",
    "NumericalError",
    "QergodicError",
    "QuasiErgodicResult",
    "StructureError",
    "SubstochasticModel",
    "ValidationError",
    "condense",
    "finite_horizon_block_occupation",
    "finite_horizon_observable",
    "finite_horizon_state_occupation",
    "full_qed",
    "irreducible_qed",
    "monte_carlo_occupation",
    "observable_limit",
    "occupation_profile",
    "quasi_stationary_distribution",
    "simulate_trajectory",
    "survival_probability",
    "validate",
]

__version__ = "0.1.0"
