"""boxboost: gradient boosting with axis-aligned box base learners.

A base learner is a box (closed, or a corner unbounded on one side per
feature) taking one constant value inside and another outside. Boxes are
drawn at random, fitted in closed form against a second-order expansion
of the loss, gated on a validation subset, and folded into an additive
ensemble. Trained ensembles admit exact Shapley-value attributions in
O(d) per box (structure-only) or with enumeration limited to the features
containing the point (expectation-based).
"""

from .boosting import (
    Ensemble,
    FoldedBox,
    TrainConfig,
    load_model,
    save_model,
    train,
    train_one_vs_rest,
    predict_one_vs_rest,
)
from .data import (
    Dataset,
    SplitPair,
    f1_score,
    gen_blobs,
    gen_friedman1,
    gen_two_moons,
    load_csv,
    paired_t_test,
    r2_score,
    read_table,
    split,
)
from .explain import (
    Attribution,
    DataShapExplainer,
    ModelShapExplainer,
    coalition_value_model,
    data_coalition_value,
    explain_ensemble,
    shap_brute_force,
    shap_data_based,
    shap_model_based,
)
from .fitting import (
    FittedBox,
    GradHessStats,
    NoValidCandidateError,
    accumulate_stats,
    make_rectangle,
    model_agnostic_values,
    optimal_values,
    surrogate_cost,
)
from .geometry import Rectangle, contains, contains_batch, generate_random_corner, generate_random_rectangle
from .losses import DerivPair, LossKind, derivatives, init_bias, loss_value
from .regularization import (
    InfeasibleBoundError,
    RegSpec,
    beta_lower_bound,
    bisect_eta2,
    eta2_from_beta,
    lambda1_from_beta,
    lambda2_from_beta,
    values_standard,
    values_step_height,
)

__version__ = "0.1.0"

__all__ = [
    "Attribution",
    "Dataset",
    "DataShapExplainer",
    "DerivPair",
    "Ensemble",
    "FittedBox",
    "FoldedBox",
    "GradHessStats",
    "InfeasibleBoundError",
    "LossKind",
    "ModelShapExplainer",
    "NoValidCandidateError",
    "Rectangle",
    "RegSpec",
    "SplitPair",
    "TrainConfig",
    "accumulate_stats",
    "beta_lower_bound",
    "bisect_eta2",
    "coalition_value_model",
    "contains",
    "contains_batch",
    "data_coalition_value",
    "derivatives",
    "eta2_from_beta",
    "explain_ensemble",
    "f1_score",
    "gen_blobs",
    "gen_friedman1",
    "gen_two_moons",
    "generate_random_corner",
    "generate_random_rectangle",
    "init_bias",
    "lambda1_from_beta",
    "lambda2_from_beta",
    "load_csv",
    "load_model",
    "loss_value",
    "make_rectangle",
    "model_agnostic_values",
    "optimal_values",
    "paired_t_test",
    "predict_one_vs_rest",
    "r2_score",
    "read_table",
    "save_model",
    "shap_brute_force",
    "shap_data_based",
    "shap_model_based",
    "split",
    "surrogate_cost",
    "train",
    "train_one_vs_rest",
    "values_standard",
    "values_step_height",
]
