"""Common causal support for observational studies.

Fits a sum-of-trees outcome model whose posterior predictive spread flags
focal units with no empirical counterfactual counterparts, applies the
resulting discard rules (and a propensity-score range baseline), estimates
group effects on the retained units, and profiles the discarded region with
shallow regression trees.  A factorial simulation family with known truths
supports head-to-head evaluation of the strategies.
"""

from .bart import (
    BartConfig,
    PosteriorSummary,
    PosteriorSurface,
    fit_bart,
    individual_effect_draws,
    posterior_summary,
)
from .data import Dataset, child_seed, load_csv, rng_for, write_csv
from .errors import (
    AllFocalDiscardedError,
    CausalSupportError,
    ConfigError,
    DegenerateOutcomeError,
    DegenerateSampleError,
    EmptyComparisonGroupError,
    EmptyFocalGroupError,
    EmptyGroupError,
    ExtremeWeightError,
    MissingColumnError,
    MissingValueError,
    NoBracketError,
    NonBinaryTreatmentError,
    NotConvergedWarning,
    SeparationError,
    SingularError,
    TooFewDrawsError,
    TooFewRowsError,
    ZeroObservedSdWarning,
)
from .estimators import (
    EffectEstimate,
    PropensityModel,
    bart_effect,
    fit_logistic,
    iptw_effect,
    match_effect,
    ols_effect,
    reestimate_propensity_after_discard,
    score_with,
)
from .profiling import (
    CartNode,
    CartTree,
    ProfileResponse,
    fit_cart,
    one_sd_margin,
    profile_discards,
    propensity_margin,
    ratio_stat,
    render_tree,
)
from .simulate import (
    DEFAULT_STUDY_METHODS,
    STUDY_METHODS,
    GeneratedStudy,
    MetricRow,
    ScenarioConfig,
    SharedFits,
    StudyMetrics,
    all_scenarios,
    calibrate_offset,
    gen_example_1d,
    gen_example_2a,
    gen_example_2b,
    gen_profiling_example,
    gen_scenario,
    run_study,
    scenario_offset,
)
from .support import (
    ONE_SD,
    PROPENSITY_RANGE,
    RATIO_05,
    RATIO_10,
    RATIO_CUTOFFS,
    CounterfactualUncertainty,
    DiscardReport,
    counterfactual_sds,
    discard_one_sd,
    discard_propensity_range,
    discard_ratio,
)

__version__ = "0.1.0"

__all__ = [
    "AllFocalDiscardedError",
    "BartConfig",
    "CartNode",
    "CartTree",
    "CausalSupportError",
    "ConfigError",
    "CounterfactualUncertainty",
    "Dataset",
    "DEFAULT_STUDY_METHODS",
    "DegenerateOutcomeError",
    "DegenerateSampleError",
    "DiscardReport",
    "EffectEstimate",
    "EmptyComparisonGroupError",
    "EmptyFocalGroupError",
    "EmptyGroupError",
    "ExtremeWeightError",
    "GeneratedStudy",
    "MetricRow",
    "MissingColumnError",
    "MissingValueError",
    "NoBracketError",
    "NonBinaryTreatmentError",
    "NotConvergedWarning",
    "ONE_SD",
    "PosteriorSummary",
    "PosteriorSurface",
    "ProfileResponse",
    "PROPENSITY_RANGE",
    "PropensityModel",
    "RATIO_05",
    "RATIO_10",
    "RATIO_CUTOFFS",
    "ScenarioConfig",
    "SeparationError",
    "SharedFits",
    "SingularError",
    "StudyMetrics",
    "STUDY_METHODS",
    "TooFewDrawsError",
    "TooFewRowsError",
    "ZeroObservedSdWarning",
    "all_scenarios",
    "bart_effect",
    "calibrate_offset",
    "child_seed",
    "counterfactual_sds",
    "discard_one_sd",
    "discard_propensity_range",
    "discard_ratio",
    "fit_bart",
    "fit_cart",
    "fit_logistic",
    "gen_example_1d",
    "gen_example_2a",
    "gen_example_2b",
    "gen_profiling_example",
    "gen_scenario",
    "individual_effect_draws",
    "iptw_effect",
    "load_csv",
    "match_effect",
    "ols_effect",
    "one_sd_margin",
    "posterior_summary",
    "profile_discards",
    "propensity_margin",
    "ratio_stat",
    "reestimate_propensity_after_discard",
    "render_tree",
    "rng_for",
    "run_study",
    "scenario_offset",
    "score_with",
    "write_csv",
]
