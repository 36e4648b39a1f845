"""Finite-horizon comparison and reduction of linear Gaussian state-space models.

Compares a model against state-frozen variants of itself through the
expected KL divergence of one-step output predictions over a finite number
of steps, ranks freeze candidates by that transfer, and provides balanced
truncation (gramians, Hankel singular values) as the asymptotic baseline.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    BoundsUndefined,
    DegenerateOutput,
    DimensionMismatch,
    IndexOutOfRange,
    InvalidSize,
    InvalidSubset,
    ItmorError,
    LengthMismatch,
    NoConvergence,
    NumericalError,
    ParseError,
    SingularCovariance,
    SingularGramian,
    SingularInnovation,
    SingularTargetNoise,
    Unstable,
    ValidationError,
)
from .linmodel import (  # noqa: F401
    FrozenModel,
    LinearGaussianModel,
    StateSubset,
    ValidationReport,
    freeze,
    load_model_file,
    model_from_dict,
    model_to_dict,
    partition,
    validate,
)
from .covprop import (  # noqa: F401
    CovTrajectory,
    FilterState,
    RiccatiSolution,
    covariance_trajectory,
    joint_discrepancy_cov,
    kalman_cov_step,
    lyapunov_steady,
    lyapunov_step,
    riccati_steady,
)
from .klmetrics import (  # noqa: F401
    CrossingResult,
    DecoupledParams,
    GaussianOutputBelief,
    KlTrajectory,
    asymptotic_kl_rate,
    crossing_time_bounds,
    crossing_analysis,
    decoupled_asymptote,
    decoupled_initial,
    gaussian_kl,
    nstep_kl_closed_form,
    nstep_kl_decoupled,
    nstep_kl_general,
)
from .itransfer import (  # noqa: F401
    ItTrajectory,
    ReductionRanking,
    enumerate_subsets,
    it_state_to_output,
    it_state_to_state,
    rank_reductions,
)
from .baltrunc import (  # noqa: F401
    BalancedModel,
    GramianPair,
    HankelSpectrum,
    balance,
    gramians,
    hankel_singular_values,
    truncate,
)
