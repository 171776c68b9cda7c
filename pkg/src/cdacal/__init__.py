"""Class-distribution-aware temperature scaling and label smoothing."""

from .calibrate import (
    CdaConfig,
    TsFitConfig,
    apply_temperature,
    cda_temperature,
    fit_optimal_temperature,
    temperature_line_search,
)
from .core import (
    ClassFrequencyProfile,
    LogitSet,
    ProbSet,
    SoftLabelSet,
    TemperatureVector,
    accuracy,
    log_softmax,
    nll,
    softmax,
)
from .datagen import Dataset, SyntheticSpec, frequency_profile, longtail_counts, sample_gaussian_mixture
from .distill import (
    DistillConfig,
    LinearModel,
    TrainConfig,
    forward,
    kd_loss,
    self_distill,
    train,
)
from .metrics import (
    BinReport,
    MetricsConfig,
    bin_stats,
    brier,
    confidence_by_class,
    ece,
    predictive_uncertainty,
    reliability_rows,
    sce,
    tace,
    uce,
)
from .smooth import SmoothingVector, cda_alpha, soft_ce_loss, soft_labels

__version__ = "0.1.0"
