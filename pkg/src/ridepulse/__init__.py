"""Heart-rate response modeling for cycling sessions.

Pipeline: parse per-second bike-computer CSVs, clean them, build
downsampled lag-augmented feature matrices, train a from-scratch LSTM to
predict heart rate, evaluate per-session RMSE in beats per minute, and
extract fixed-length session embeddings. A synthetic-physiology generator
provides a desk-scale corpus with known ground truth.
"""

from .cleanse import CleanReport, clean_dataset
from .evaluate import (
    EvalReport,
    Embedding,
    Trace,
    evaluate_dataset,
    extract_embedding,
    persistence_baseline_rmse,
    predict_trace,
    session_rmse,
)
from .features import (
    FEATURE_COLUMNS,
    FeatureMatrix,
    Standardizer,
    apply_standardizer,
    build_features,
    build_lag_channel,
    downsample,
    fit_standardizer,
)
from .ingest import (
    RiderProfile,
    Sample,
    Session,
    load_dataset,
    parse_rider_profile,
    parse_rider_profiles,
    parse_session,
    session_to_csv,
)
from .lstm import (
    Gradients,
    LstmParams,
    LstmState,
    cell_forward,
    init_params,
    sequence_backward,
    sequence_forward,
    truncated_windows,
)
from .metrics import LoadMetrics, normalized_power, tss
from .synth import SessionPlan, SynthRiderParams, generate_corpus, generate_power, simulate_hr
from .train import (
    Checkpoint,
    TrainConfig,
    TrainReport,
    adam_step,
    load_checkpoint,
    save_checkpoint,
    split_by_rider,
    train_model,
)

__version__ = "0.1.0"

__all__ = [
    "CleanReport",
    "clean_dataset",
    "EvalReport",
    "Embedding",
    "Trace",
    "evaluate_dataset",
    "extract_embedding",
    "persistence_baseline_rmse",
    "predict_trace",
    "session_rmse",
    "FEATURE_COLUMNS",
    "FeatureMatrix",
    "Standardizer",
    "apply_standardizer",
    "build_features",
    "build_lag_channel",
    "downsample",
    "fit_standardizer",
    "RiderProfile",
    "Sample",
    "Session",
    "load_dataset",
    "parse_rider_profile",
    "parse_rider_profiles",
    "parse_session",
    "session_to_csv",
    "Gradients",
    "LstmParams",
    "LstmState",
    "cell_forward",
    "init_params",
    "sequence_backward",
    "sequence_forward",
    "truncated_windows",
    "LoadMetrics",
    "normalized_power",
    "tss",
    "SessionPlan",
    "SynthRiderParams",
    "generate_corpus",
    "generate_power",
    "simulate_hr",
    "Checkpoint",
    "TrainConfig",
    "TrainReport",
    "adam_step",
    "load_checkpoint",
    "save_checkpoint",
    "split_by_rider",
    "train_model",
    "__version__",
]
