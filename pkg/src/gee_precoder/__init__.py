"""Energy-efficient precoding for MIMO interference channels with
imperfect channel knowledge: a statistical-error pipeline (ratio search +
minorize-maximize + closed-form power-constrained quadratics) and a
worst-case pipeline (weighted-MSE split + S-procedure LMIs + alternating
cone programs), plus a Monte-Carlo harness and CLI."""

from .channel import (ChannelSet, ErrorRealization, NormBoundedError,
                      StochasticError, SystemConfig, channelset_from_json,
                      channelset_to_json, compose, generate_channels,
                      sample_error)
from .dinkelbach import FractionalTrace, solve_fractional
from .exceptions import (ConfigError, DecoderRankError, DegeneratePowerError,
                         DimensionError, GeePrecoderError, SdpError,
                         ShapingMatrixError)
from .harness import (ExperimentSpec, SweepResult, dbw_to_watts,
                      reference_experiment_spec, run_self_check, run_sweep,
                      spec_from_json, spec_to_json, splitmix64, trial_seed,
                      write_sweep)
from .metrics import (DecoderSet, GeeReport, PrecoderSet, gee,
                      interference_covariance, mmse_receiver, mse_matrix,
                      simulate_transmission, total_power, user_rate)
from .sdp import (SdpOptions, SdpProblem, SdpSolution, problem_to_json,
                  solution_to_json, solve_maxdet, solve_sdp)
from .stat_robust import (StatOptions, SurrogateData, build_surrogate,
                          effective_noise, expected_rates, initial_precoders,
                          run_statistical, solve_qcqp, subtractive_objective,
                          surrogate_value)
from .worstcase import (ErrorTermPair, RobustAuxiliaries, WcOptions,
                        WeightSet, assemble_error_terms, build_power_lmi,
                        build_robust_lmi, lower_bound_rates,
                        min_feasible_lambda, run_worstcase, shaping_lift,
                        solve_g_step, solve_u_step, solve_v_step,
                        subtractive_lower_bound)

__version__ = "0.1.0"

__all__ = [
    "ChannelSet", "ErrorRealization", "NormBoundedError", "StochasticError",
    "SystemConfig", "channelset_from_json", "channelset_to_json", "compose",
    "generate_channels", "sample_error",
    "FractionalTrace", "solve_fractional",
    "ConfigError", "DecoderRankError", "DegeneratePowerError",
    "DimensionError", "GeePrecoderError", "SdpError", "ShapingMatrixError",
    "ExperimentSpec", "SweepResult", "dbw_to_watts", "reference_experiment_spec",
    "run_self_check", "run_sweep", "spec_from_json", "spec_to_json",
    "splitmix64", "trial_seed", "write_sweep",
    "DecoderSet", "GeeReport", "PrecoderSet", "gee",
    "interference_covariance", "mmse_receiver", "mse_matrix",
    "simulate_transmission", "total_power", "user_rate",
    "SdpOptions", "SdpProblem", "SdpSolution", "problem_to_json",
    "solution_to_json", "solve_maxdet", "solve_sdp",
    "StatOptions", "SurrogateData", "build_surrogate", "effective_noise",
    "expected_rates", "initial_precoders", "run_statistical", "solve_qcqp",
    "subtractive_objective", "surrogate_value",
    "ErrorTermPair", "RobustAuxiliaries", "WcOptions", "WeightSet",
    "assemble_error_terms", "build_power_lmi", "build_robust_lmi",
    "lower_bound_rates", "min_feasible_lambda", "run_worstcase",
    "shaping_lift", "solve_g_step", "solve_u_step", "solve_v_step",
    "subtractive_lower_bound",
    "__version__",
]
