"""Numerical laboratory for concavity of Tsallis entropy along the heat flow."""

__version__ = "0.1.0"

from .errors import (ConfigError, DegenerateInputError, InternalConsistencyError,  # noqa: E402
                     LabError, ResolutionError, StepSizeError)
from .grid import ScalarField, TorusGrid, check_resolution, integrate  # noqa: E402
from .heatflow import DeltaIndex, EntropicIndex, delta_to_q, evolve_torus, q_to_delta  # noqa: E402
from .mixtures import GaussianMixture, QuadratureBox  # noqa: E402
from .functionals import compute_terms, power_integral, report, shannon, tsallis  # noqa: E402

__all__ = [
    "__version__", "ConfigError", "DegenerateInputError", "InternalConsistencyError",
    "LabError", "ResolutionError", "StepSizeError", "ScalarField", "TorusGrid",
    "check_resolution", "integrate", "DeltaIndex", "EntropicIndex", "delta_to_q",
    "evolve_torus", "q_to_delta", "GaussianMixture", "QuadratureBox", "compute_terms",
    "power_integral", "report", "shannon", "tsallis",
]
