"""xcalib: calibrate black-box text models with perturbation attributions."""

__version__ = "0.1.0"

from .types import (
    AnnotatedInstance,
    Attribution,
    ExplainerKind,
    Prediction,
    Segment,
    Task,
    Token,
    Violation,
    validate_instance,
)
from .perturbation import Mask, PerturbationConfig, Strategy, apply_mask, sample_masks
from .explainers import (
    ExplainerConfig,
    SurrogateFit,
    TargetKind,
    exact_shapley,
    explain,
    fit_surrogate,
    lime_weight,
    shap_weight,
)
from .properties import (
    PropertyScheme,
    TagUniverse,
    TokenProperties,
    annotate,
    default_scheme,
    default_universe,
    merge_tag,
    overlap_flags,
    property_space,
)
from .features import (
    Family,
    FeatureVector,
    aggregate_attributions,
    assemble,
    bow_property_features,
    clsprob_features,
    kamath_features,
)
from .forest import ForestHyper, ForestModel, feature_importance, load, save, score, train_forest
from .evaluation import (
    CoverageCurve,
    auc,
    calibration_accuracy,
    coverage_curve,
    quality_at_coverage,
    token_f1,
)

__all__ = [name for name in dir() if not name.startswith("_")]
