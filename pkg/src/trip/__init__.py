"""Tensor-ring parameterized probability distributions.

Discrete lattice distributions (:class:`CoreSet`), their continuous
Gaussian-mixture extension (:class:`TripModel`), and joint models over
latents and discrete attributes (:class:`JointModel`), with exact marginals
and conditionals, chain-rule sampling, analytic gradients, maximum-likelihood
fitting, and brute-force oracles for verification.
"""

from .continuous import ContinuousMask, ParamStats, TripModel
from .cores import AssignmentMask, CoreSet
from .errors import (
    ConditionOnNullError,
    CoreShapeError,
    DegenerateDistributionError,
    DivergenceError,
    ModelFormatError,
    OracleSizeError,
    TripError,
)
from .fitting import FitConfig, fit_gmm_1d, fit_joint_mle, fit_mle
from .gradients import (
    GradPsi,
    grad_log_density,
    kl_and_elbo_mc,
    model_from_vector,
    param_vector,
    reinforce_grad,
)
from .joint import JointModel, PartialAttributes, make_permutation
from .modelfile import load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "AssignmentMask",
    "ConditionOnNullError",
    "ContinuousMask",
    "CoreSet",
    "CoreShapeError",
    "DegenerateDistributionError",
    "DivergenceError",
    "FitConfig",
    "GradPsi",
    "JointModel",
    "ModelFormatError",
    "OracleSizeError",
    "ParamStats",
    "PartialAttributes",
    "TripError",
    "TripModel",
    "fit_gmm_1d",
    "fit_joint_mle",
    "fit_mle",
    "grad_log_density",
    "kl_and_elbo_mc",
    "load_model",
    "make_permutation",
    "model_from_vector",
    "param_vector",
    "reinforce_grad",
    "save_model",
]
