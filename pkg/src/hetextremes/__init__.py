"""Extremes of heteroscedastic, serially dependent time series.

Scedasis estimation, tests of homoscedastic extremes, extremal-index
estimation, the matching simulation models and a Monte Carlo harness.
"""
from .empirical_process import TruthModel, simple_step, step
from .errors import (
    ConfigError, DataError, DegenerateKernelError, EstimationError, HetExtremesError, UninformativeTestError,
    UnreliableQuantileError,
)
from .experiments import ExperimentSpec, ModelSpec, ResultTable, analyze_csv, run_ei_experiment, run_rejection_experiment
from .extremal_index import EiConfig, EiEstimate, block_pseudo_obs, theta_estimators, true_pseudo_obs
from .kernels import BIWEIGHT, BoundaryKernel, Kernel, boundary_eval, kernel_moment_a, kernel_moment_b, register_kernel
from .scedasis import (
    ScedasisConfig, ScedasisCurve, SequentialProcess, cn_process_l2, cn_process_sup, integrated_scedasis,
    scedasis_estimate,
)
from .simulate import ScedasisFamily, SimOutput, rng_streams, scedasis_value, simulate_arch, simulate_armax
from .testing import (
    BootstrapConfig, SelfNormQuantiles, TestReport, bootstrap_test, edhz_test, selfnorm_reference_quantiles,
    selfnorm_test,
)

__version__ = "0.1.0"

__all__ = [
    "TruthModel", "simple_step", "step",
    "ConfigError", "DataError", "DegenerateKernelError", "EstimationError", "HetExtremesError",
    "UninformativeTestError", "UnreliableQuantileError",
    "ExperimentSpec", "ModelSpec", "ResultTable", "analyze_csv", "run_ei_experiment", "run_rejection_experiment",
    "EiConfig", "EiEstimate", "block_pseudo_obs", "theta_estimators", "true_pseudo_obs",
    "BIWEIGHT", "BoundaryKernel", "Kernel", "boundary_eval", "kernel_moment_a", "kernel_moment_b", "register_kernel",
    "ScedasisConfig", "ScedasisCurve", "SequentialProcess", "cn_process_l2", "cn_process_sup",
    "integrated_scedasis", "scedasis_estimate",
    "ScedasisFamily", "SimOutput", "rng_streams", "scedasis_value", "simulate_arch", "simulate_armax",
    "BootstrapConfig", "SelfNormQuantiles", "TestReport", "bootstrap_test", "edhz_test",
    "selfnorm_reference_quantiles", "selfnorm_test",
]
