"""Bucket-reuse sampling for online experiment programs.

Salted hash bucketing, exclusive-program coordination, exact design
probabilities, treatment-effect estimation under bucket sampling, and the
Monte Carlo studies that validate them.
"""

__version__ = "0.1.0"

from .bucketing import (
    HASH_FUNCTION_ID,
    BucketingConfig,
    hash_to_bucket,
    path_count_nonexclusive,
    uniformity_report,
)
from .coordination import (
    Experiment,
    ProgramState,
    advance_day,
    buckets_for_fraction,
    sample_nonexclusive,
    snapshot,
    start_experiment,
)
from .estimation import (
    Population,
    SampleDraw,
    ate_true,
    cor_star,
    delta_hat,
    diff_in_means,
    enumerate_restricted_unbiasedness,
    enumerate_unbiasedness,
    ht_mean,
    welch_t,
)
from .probability import (
    HypergeomParams,
    bad_bucket_window_prob,
    counting_identities_check,
    hypergeom_pmf,
    min_buckets_for_smallest_experiment,
    num_bucket_samples,
    overlap_within_margin_prob,
)
from .simulation import (
    MetricSeries,
    ProgramSimConfig,
    SamplingSimConfig,
    desk_scale,
    generate_starting_point,
    run_program_sim,
    run_sampling_distribution_sim,
    settings_catalog,
)
