"""Benchmark-stability toolkit for small-sample segmentation studies.

The package answers one recurring question: when models are compared on
a handful of cross-validated images, how much of the leaderboard is
signal and how much is fold luck?  It provides the segmentation metrics
and losses that produce score tables, split planning, the resampling
and rank statistics that quantify table stability, pixel-level
explanation maps, a small Bayesian hyperparameter optimizer, and
dependency-free SVG reporting.
"""

from .datamodel import (
    CompositeWeights,
    FocalParams,
    LabelMask,
    ProbMap,
    ScoreRecord,
    ScoreTable,
    SplitPlan,
    XaiWeights,
    read_grayscale_image,
    read_label_mask,
    read_prob_map,
    read_score_table,
    write_label_mask_png,
    write_label_mask_text,
    write_prob_map,
    write_score_table,
)
from .hpo import (
    Categorical,
    GPState,
    LogUniform,
    SearchSpace,
    TrialRecord,
    Uniform,
    builtin_objective,
    encode,
    expected_improvement,
    fit_gp,
    gp_posterior,
    run_sweep,
    sample_space,
    space_from_dict,
    suggest_next,
)
from .metrics import (
    ClassMetrics,
    composite_loss,
    dice_loss,
    dice_per_class,
    focal_loss,
    iou_per_class,
    macro_average,
    macro_metrics,
)
from .report import (
    render_cd_diagram,
    render_effect_grid,
    render_forest_plot,
    render_rank_trajectories,
    render_report_figures,
    write_figure,
)
from .splits import make_kfold, make_loocv
from .stability import (
    BootstrapCI,
    EffectSize,
    FriedmanResult,
    NemenyiResult,
    RankStats,
    StabilityReport,
    WinnerFlip,
    WinnerRangeRow,
    bootstrap_ci,
    build_stability_report,
    cd_cliques,
    cohens_d,
    fold_ranks,
    friedman_from_scores,
    friedman_test,
    instability_table,
    nemenyi_cd,
    nemenyi_test,
    rank_stats,
    spearman_fold_corr,
)
from .xai import (
    ExplanationMap,
    UncertaintyStability,
    class_attention_map,
    composite_map,
    entropy_bits,
    error_map,
    morphology_map,
    saliency_map,
    uncertainty_map,
    uncertainty_stability,
    write_map_png,
)

__version__ = "0.1.0"

FIXTURE_PROTOCOLS = ("loocv", "threefold")


def fixture_path(protocol: str) -> str:
    """Path of a bundled synthetic score table (protocols: loocv, threefold).

    The two tables describe the same four models under two fold
    protocols, constructed so the mean-score winner flips between them
    and the top two models are statistically tied under LOOCV.
    """
    import importlib.resources

    if protocol not in FIXTURE_PROTOCOLS:
        raise ValueError(f"unknown fixture protocol {protocol!r}; use {FIXTURE_PROTOCOLS}")
    ref = importlib.resources.files("segstab") / "fixtures" / f"scores_{protocol}.csv"
    return str(ref)
