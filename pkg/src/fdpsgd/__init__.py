"""f-DP guarantee engine for clipped-gradient SGD with subsampling and shuffling."""

from ._backend import NUMBA_ENABLED, backend_name
from .curves import (
    DivergenceSummary,
    EpsDelta,
    TradeoffCurve,
    compose_gaussians,
    convexify,
    curve_inverse,
    delta_of_epsilon,
    f_eps_delta_curve,
    gaussian_eval,
    gdp_to_divergences,
    group_iterate,
    subsample_operator,
)
from .engine import (
    AnalyzeOptions,
    GuaranteeBundle,
    UnsupportedConfigError,
    analyze,
    compare_group_paths,
    headline_mu,
)
from .mixture import (
    MixtureSpec,
    TailParams,
    lower_bound_curve,
    mixture_curve,
    mixture_tradeoff,
    sandwich_check,
    solve_lambda,
    upper_bound_curve,
)
from .oracle import empirical_qdist, empirical_tradeoff, infimum_oracle
from .sampling import (
    CVecDist,
    RoundKDist,
    SamplerConfig,
    epoch_convolve,
    filter_transform,
    hoeffding_tails,
    multiround_cdist,
    qdist_bc_shuffling,
    qk_general_subsampling,
    qk_ic_subsampling,
    shuffling_tail_params,
)
from .trainer import Model, TrainConfig, clip, paired_update, sample_epoch, train
from .verify import run_verification

__version__ = "0.1.0"
