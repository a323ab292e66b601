"""Kernel-based regularized impulse-response estimation for LTI systems.

Covariance kernels tailored to exponentially decaying, possibly
oscillatory impulse responses; state-space realizations and structural
checks (stability, banded inverses, maximum-entropy properties);
empirical-Bayes estimation; and a Monte Carlo benchmark harness.
"""

from .envelopes import ExpDecay, ExpOsc
from .estimator import (DataSet, EstimationResult, ImpulseResponseRegressor,
                        TuneConfig, estimate, estimate_impulse, fit_metric,
                        neg_log_marglik, regressor_matrix, tune)
from .exceptions import (DomainError, KernelRegError, NumericalError,
                         TuningError, UndefinedFitError,
                         UnsupportedKernelError)
from .kernels import (AMLS2OdKernel, AMLS2OsKernel, AMLSKernel, DCKernel,
                      HyperParams, OracleKernel, SI2OdKernel,
                      SIStateSpaceKernel, SSKernel, TCKernel, kernel_from_dict,
                      kernel_to_dict, sample_gp)
from .statespace import (SecondOrderNominal, StateSpaceModel, realize_dc_dt,
                         realize_ss_dt, si_gram, si_kernel_dt)

__version__ = "0.1.0"

__all__ = [
    "AMLS2OdKernel", "AMLS2OsKernel", "AMLSKernel", "DCKernel", "DataSet",
    "DomainError", "EstimationResult", "ExpDecay", "ExpOsc", "HyperParams",
    "ImpulseResponseRegressor", "KernelRegError", "NumericalError",
    "OracleKernel", "SI2OdKernel", "SIStateSpaceKernel", "SSKernel",
    "SecondOrderNominal", "StateSpaceModel", "TCKernel", "TuneConfig",
    "TuningError", "UndefinedFitError", "UnsupportedKernelError",
    "estimate", "estimate_impulse", "fit_metric", "kernel_from_dict",
    "kernel_to_dict", "neg_log_marglik", "realize_dc_dt", "realize_ss_dt",
    "regressor_matrix", "sample_gp", "si_gram", "si_kernel_dt", "tune",
]
