"""Pseudo-Boolean optimization toolkit.

Score-function gradient estimators (REINFORCE, leave-one-out, antithetic
copula sampling, optimal constant baselines), sigmoid continuation paths,
straight-through hybrids, exact variance analysis by multiset enumeration,
and a seeded experiment harness with CSV/SVG output.
"""

from .benchmarks import (
    GenLossSpec,
    MaskedRegressionSpec,
    make_checkerboard,
    make_counterexample,
    make_exponential_tabular,
    make_genloss,
    make_masked_regression,
    make_nnloss,
)
from .continuation import CPState, TemperatureSchedule, cp_gradient, cp_run, cp_step
from .estimators import (
    DirichletCopula,
    GradEstimate,
    arms,
    arms_correlation,
    bstar,
    loorf,
    optimal_baselines,
    reinforce,
    straight_through,
)
from .harness import RunConfig, build_benchmark, mean_valid_mask, optimize, true_gradient_mode
from .params import Parametrization, make_parametrization
from .pbcore import (
    CapabilityError,
    CapacityError,
    MultilinearPoly,
    PBFunction,
    TabularPB,
    entropy,
    exact_expectation,
    exact_gradient,
    hamming,
    pb_derivative,
    to_multilinear,
    vertex_decode,
    vertex_encode,
)
from .plotting import emit_svg
from .varlab import (
    exact_variance_arms,
    exact_variance_iid,
    mc_variance,
    multiset_count,
    variance_trajectory,
)

__version__ = "0.1.0"
