"""Invariance pressure of control systems on R^d.

Exact values via the spectral formula for controllable hyperbolic linear
systems, certified lower and upper bounds, and brute-force estimation via
spanning-set construction over quantized controls.
"""

from .controlset import ControlSetApprox, estimate_control_set, shrink_hull
from .errors import (
    BlowupError,
    ConfigError,
    DegenerateHullError,
    DomainError,
    InvpressError,
    NotAdmissibleError,
    NotControllableError,
    NotEquilibriumError,
    NotHyperbolicError,
    NotInteriorError,
    NotPeriodicError,
    NotRegularError,
    NumericError,
    PreconditionError,
    VacuousBoundError,
)
from .model import (
    CompactSet,
    ControlRange,
    GeneralSystem,
    LinearSystem,
    PotentialSpec,
    QuantizedControl,
    eval_control,
    eval_potential,
    make_builtin_system,
    membership,
)
from .pressure import (
    CoverageMatrix,
    CoverResult,
    LowerBound,
    PressureReport,
    build_candidates,
    concat_candidates,
    coverage_map,
    estimate_pressure,
    lower_bound,
    min_weight_cover,
    outer_pressure_series,
)
from .simulate import (
    ExponentSpectrum,
    FundamentalMatrix,
    Trajectory,
    divergence_integral,
    floquet_exponents,
    integrate_trajectory,
    integrate_variational,
    periodic_pair_upper_bound,
    running_potential,
)
from .spectral import (
    HyperbolicSplit,
    Spectrum,
    eigen_decompose,
    equilibrium_upper_bound,
    formula_pressure,
    hyperbolic_split,
    kalman_rank,
    min_potential,
    project_system,
    unstable_sum,
)

__version__ = "0.1.0"
