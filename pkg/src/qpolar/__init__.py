"""Polarization of q-ary channels: transforms, exact and Monte Carlo construction, SC coding."""

from .errors import (
    AlphabetMismatchError,
    BudgetExceededError,
    DecodingError,
    FormatError,
    HypothesisError,
    InvalidDistributionError,
    PolarError,
    StageDecodingError,
)
from .dist import DistQ, convolve, cyclic_shift, entropy_norm, l1_distance, mix, sample_random_dist
from .channel import (
    JointChannel,
    bhattacharyya,
    channel_entropy,
    make_qsc,
    merge_equivalent_outputs,
    minus_transform,
    ml_error_prob,
    plus_transform,
    qsc_with_entropy,
)
from .transform import inverse_transform, transform, transform_matrix
from .construction import (
    CodeSpec,
    IndexStats,
    estimate_index_stats_mc,
    polarization_profile,
    select_frozen,
    track_channels_exact,
    z_bound_recursion,
)

__version__ = "0.1.0"
