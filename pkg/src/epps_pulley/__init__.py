"""Spectral decomposition, cumulants and critical values of the Epps-Pulley normality test."""

from .cumulants import (
    CumulantSet,
    compare_methods,
    cumulants_closed,
    cumulants_from_spectrum,
    cumulants_from_traces,
    kappa1_closed,
    kappa2_closed,
)
from .errors import (
    ConsistencyError,
    ContractViolation,
    DegenerateSample,
    DomainError,
    EppsPulleyError,
    SolverFailure,
    UnderResolved,
)
from .kernels import TuningBeta, iterated_trace, kernel_k, kernel_k0, phi, weight_density
from .mercer import MercerBasis, mercer_basis, mercer_eigenfunction, mercer_eigenvalue
from .montecarlo import SimConfig, critical_values, statistic
from .pearson import PearsonFit, pearson_fit, pearson_quantile
from .quadrature import QuadratureRule, gauss_hermite_rule, symmetric_eigenvalues
from .spectrum import SpectrumResult, coefficients, find_spectrum, nystrom_spectrum

__version__ = "0.1.0"

__all__ = [
    "ConsistencyError",
    "ContractViolation",
    "CumulantSet",
    "DegenerateSample",
    "DomainError",
    "EppsPulleyError",
    "MercerBasis",
    "PearsonFit",
    "QuadratureRule",
    "SimConfig",
    "SolverFailure",
    "SpectrumResult",
    "TuningBeta",
    "UnderResolved",
    "coefficients",
    "compare_methods",
    "critical_values",
    "cumulants_closed",
    "cumulants_from_spectrum",
    "cumulants_from_traces",
    "find_spectrum",
    "gauss_hermite_rule",
    "iterated_trace",
    "kappa1_closed",
    "kappa2_closed",
    "kernel_k",
    "kernel_k0",
    "mercer_basis",
    "mercer_eigenfunction",
    "mercer_eigenvalue",
    "nystrom_spectrum",
    "pearson_fit",
    "pearson_quantile",
    "phi",
    "statistic",
    "symmetric_eigenvalues",
    "weight_density",
]
