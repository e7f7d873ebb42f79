"""Intersectional fairness auditing with confidence-interval sufficiency metrics."""

from .baselines import (
    BaselineResult,
    KearnsAudit,
    kearns_audit,
    kearns_value,
    ratio_epsilon,
    typical_disparity,
)
from .ci_metrics import (
    AuditConfig,
    AuditReport,
    CIBounds,
    GroupStats,
    OptimistDecision,
    PerformanceMetric,
    PessimistDecision,
    aggregate_audit,
    audit,
    bonferroni_z,
    ci_bounds,
    ensemble_group_metric,
    grid_axis,
    group_metric,
    mn_grid,
    norm_ppf,
    optimist_bound,
    optimist_test,
    pessimist_bound,
    pessimist_test,
    std_error,
)
from .dataset import AgeBinRule, AttributeSpec, Dataset, DatasetSchema, Record, apply_age_binning, load_csv
from .experiments import (
    SeriesPoint,
    SubsamplePlan,
    SynthSpec,
    TrendReport,
    evaluate,
    kearns_small_group_study,
    run_subsample_all,
    run_subsample_group,
    subsample_indices,
    synth_generate,
    trend,
)
from .learner import CVConfig, PredictorSpec, TrainedEnsemble, ensure_label_coverage, external_predict, fit_cv
from .subgroups import SubgroupIndex, SubgroupKey, alpha, enumerate_subgroups, group_size

__version__ = "0.1.0"
