"""Survey opinion completion: deep cross network training, matrix
factorization baseline, cross-validation harnesses, missingness
simulators, and trend aggregation for sparse binarized survey data.
"""

from .analysis import (
    AggregatedCell,
    CalibrationLine,
    ClassificationScores,
    RegressionResult,
    TrendPoint,
    accuracy_f1,
    apply_rescaling,
    auc,
    correlation,
    fit_rescaling,
    group_auc,
    margin_correct_rate,
    ols_robust,
    opinion_covariates,
    smooth_trend,
    weighted_aggregate,
)
from .data import (
    BinarizationMap,
    ResponseRecord,
    SurveyDataset,
    apply_binarization,
    dataset_stats,
    default_binarization_map,
    encode_ids,
    ingest_responses,
    ingest_responses_text,
    resolve_weights,
)
from .dcn import (
    DcnConfig,
    DcnParameters,
    DeepCrossOpinionModel,
    FeatureImportance,
    feature_importance,
    init_params,
    load_checkpoint,
    predict_proba_arrays,
    save_checkpoint,
    train_loop,
)
from .embeddings import (
    DEFAULT_PROMPT,
    EmbeddingMatrix,
    PromptTemplate,
    build_prompt,
    export_vectors,
    load_embeddings,
)
from .errors import SurveycastError
from .folds import (
    FoldPlan,
    PredictionSet,
    make_question_folds,
    make_response_folds,
    make_year_question_folds,
    missingness_sweep,
    plan_for_task,
    retrodiction_rows,
    run_cross_validation,
    run_mf_cross_validation,
    train_full_dataset,
    train_model,
)
from .mf import AlsCompleter, MfFactors, ObservedMatrix, als_fit, mf_predict
from .seeding import rng_for
from .simulate import (
    MissingMask,
    SyntheticTruth,
    fit_logistic,
    generate_synthetic_survey,
    simulate_mar,
    simulate_mcar,
    simulate_mnar,
    split_by_mask,
)

__version__ = "0.1.0"

__all__ = [
    "AggregatedCell",
    "AlsCompleter",
    "BinarizationMap",
    "CalibrationLine",
    "ClassificationScores",
    "DEFAULT_PROMPT",
    "DcnConfig",
    "DcnParameters",
    "DeepCrossOpinionModel",
    "EmbeddingMatrix",
    "FeatureImportance",
    "FoldPlan",
    "MfFactors",
    "MissingMask",
    "ObservedMatrix",
    "PredictionSet",
    "PromptTemplate",
    "RegressionResult",
    "ResponseRecord",
    "SurveyDataset",
    "SurveycastError",
    "SyntheticTruth",
    "TrendPoint",
    "accuracy_f1",
    "als_fit",
    "apply_binarization",
    "apply_rescaling",
    "auc",
    "build_prompt",
    "correlation",
    "dataset_stats",
    "default_binarization_map",
    "encode_ids",
    "export_vectors",
    "feature_importance",
    "fit_logistic",
    "fit_rescaling",
    "generate_synthetic_survey",
    "group_auc",
    "ingest_responses",
    "ingest_responses_text",
    "init_params",
    "load_checkpoint",
    "load_embeddings",
    "make_question_folds",
    "make_response_folds",
    "make_year_question_folds",
    "margin_correct_rate",
    "mf_predict",
    "missingness_sweep",
    "ols_robust",
    "opinion_covariates",
    "plan_for_task",
    "predict_proba_arrays",
    "resolve_weights",
    "retrodiction_rows",
    "rng_for",
    "run_cross_validation",
    "run_mf_cross_validation",
    "save_checkpoint",
    "simulate_mar",
    "simulate_mcar",
    "simulate_mnar",
    "smooth_trend",
    "split_by_mask",
    "train_full_dataset",
    "train_loop",
    "train_model",
    "weighted_aggregate",
]
