"""Differentially private publication of location entropy.

Turns raw (user, location, time) check-ins into per-location Shannon
entropies released under calibrated Laplace noise, with the full
sensitivity calculus, synthetic data generators, and an evaluation
harness for utility studies. See the README for the command-line driver.
"""

from .core import (
    CheckIn,
    VisitTable,
    count_visits,
    entropy_add_user,
    entropy_remove_user,
    location_entropy,
    max_entropy,
)
from .errors import ConfigurationError, EntropySentryError, ParseError
from .evaluation import (
    SWEEPABLE_PARAMS,
    MetricReport,
    SweepRow,
    kl_divergence,
    mse,
    published_ratio,
    run_sweep,
)
from .mechanisms import (
    MECHANISMS,
    CheckinAggregate,
    PrivacyParams,
    PublicationRecord,
    clamp_visits,
    laplace_sample,
    location_noise_rng,
    publish,
    publish_baseline,
    publish_limit,
    publish_limit_cb,
    publish_limit_ss,
    truncate_locations,
)
from .sensitivity import (
    SensitivityParams,
    SensitivityTable,
    brute_force_local_sensitivity,
    crowd_blend_min_users,
    crowd_blend_sensitivity,
    global_sensitivity,
    local_sensitivity,
    min_entropy_bound,
    precompute_smooth_sensitivity,
)
from .dataio import (
    GENERATOR_PRESETS,
    GeneratorConfig,
    generate_synthetic,
    parse_checkins,
    preset_config,
    read_publication,
    read_sensitivity_table,
    write_bound_curve,
    write_checkins,
    write_manifest,
    write_metric_report,
    write_publication,
    write_sensitivity_table,
    write_sweep_table,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # core
    "CheckIn",
    "VisitTable",
    "count_visits",
    "location_entropy",
    "entropy_add_user",
    "entropy_remove_user",
    "max_entropy",
    # sensitivity
    "SensitivityParams",
    "SensitivityTable",
    "global_sensitivity",
    "local_sensitivity",
    "min_entropy_bound",
    "crowd_blend_min_users",
    "crowd_blend_sensitivity",
    "precompute_smooth_sensitivity",
    "brute_force_local_sensitivity",
    # mechanisms
    "MECHANISMS",
    "PrivacyParams",
    "PublicationRecord",
    "CheckinAggregate",
    "truncate_locations",
    "clamp_visits",
    "laplace_sample",
    "location_noise_rng",
    "publish",
    "publish_baseline",
    "publish_limit",
    "publish_limit_ss",
    "publish_limit_cb",
    # evaluation
    "MetricReport",
    "SweepRow",
    "SWEEPABLE_PARAMS",
    "kl_divergence",
    "mse",
    "published_ratio",
    "run_sweep",
    # dataio
    "GeneratorConfig",
    "GENERATOR_PRESETS",
    "preset_config",
    "generate_synthetic",
    "parse_checkins",
    "write_checkins",
    "write_publication",
    "read_publication",
    "write_sensitivity_table",
    "read_sensitivity_table",
    "write_bound_curve",
    "write_metric_report",
    "write_sweep_table",
    "write_manifest",
    # errors
    "EntropySentryError",
    "ConfigurationError",
    "ParseError",
]
