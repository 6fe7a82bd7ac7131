"""Adaptive gradient method for composite problems with inexact oracles."""

from .exceptions import CapabilityError, DimensionError, DomainError, OracleError
from .oracles import (HolderOracle, HolderParams, InnerMaxOracle, InnerMaxProblem,
                      NoiseWrappedOracle, OracleAnswer, QuadraticG, QuarticG, SmoothOracle,
                      SumOracle, holder_L_of_delta, holder_params_from_inner_max,
                      operator_norm, oracle_contract_check)
from .problems import PROBLEM_NAMES, CompositeProblem, build_problem, catalog
from .solver import (BoundCheck, BoundParams, RunReport, SolverConfig, corollary_bounds,
                     descent_check, inner_check_bound, solve, stationarity_residual,
                     theorem1_bound, verify_trace)
from .spaces import (ENTROPY, EUCLIDEAN, FeasibleSet, SimpleConvexPart, bregman_divergence,
                     get_setup, gradient_mapping, prox_certificate, prox_step)
from .traceio import read_trace, write_trace

__version__ = "0.1.0"
