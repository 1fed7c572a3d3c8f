"""Two-stage (juvenile/adult) population dynamics with nonlocal dispersal,
moving habitat boundaries and time-periodic harvesting pulses.

The package provides a free/fixed-boundary simulator, principal and
generalized eigenvalue solvers for the pulsed linearization, periodic-state
solvers, and spreading/vanishing classification with threshold search.
"""

__version__ = "0.1.0"

from .errors import ConfigError, NumericalError, PulsefrontError
from .kernel import KernelSpec
from .model import (
    Coefficients,
    FrontierParams,
    HarvestRule,
    InitialData,
    ModelParams,
    a_priori_bound,
)
from .simulator import FrontState, SimConfig, Trajectory, run_fixed, run_free
from .eigen import (
    EigenProblemSpec,
    EigenResult,
    GeneralizedBracket,
    closed_form_lambda,
    floquet_lambda,
    generalized_bracket,
    lambda0,
    lambda_sensitivity,
)
from .periodic import PeriodicSolution, monotone_iteration, ode_periodic_linear, ode_periodic_logistic
from .classify import (
    ClassifyTolerances,
    ThresholdResult,
    VanishingCertificate,
    Verdict,
    classify_trajectory,
    dichotomy_predict,
    mu_threshold_search,
    vanishing_certificate,
)

__all__ = [
    "ClassifyTolerances",
    "Coefficients",
    "ConfigError",
    "EigenProblemSpec",
    "EigenResult",
    "FrontState",
    "FrontierParams",
    "GeneralizedBracket",
    "HarvestRule",
    "InitialData",
    "KernelSpec",
    "ModelParams",
    "NumericalError",
    "PeriodicSolution",
    "PulsefrontError",
    "SimConfig",
    "ThresholdResult",
    "Trajectory",
    "VanishingCertificate",
    "Verdict",
    "__version__",
    "a_priori_bound",
    "classify_trajectory",
    "closed_form_lambda",
    "dichotomy_predict",
    "floquet_lambda",
    "generalized_bracket",
    "lambda0",
    "lambda_sensitivity",
    "monotone_iteration",
    "mu_threshold_search",
    "ode_periodic_linear",
    "ode_periodic_logistic",
    "run_fixed",
    "run_free",
    "vanishing_certificate",
]
