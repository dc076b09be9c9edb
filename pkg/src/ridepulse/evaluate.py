"""Per-session RMSE in beats per minute, trace export, baselines, embeddings.

All scores are reported after mapping predictions back to beats per minute,
so numbers are comparable across standardizers. The persistence baseline
predicts the heart rate 30 seconds ago (the lag input itself); a model has
to beat it to demonstrate it learned anything beyond inertia.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .features import (
    _COL_HR_LAG,
    FeatureMatrix,
    Standardizer,
    TooShortSessionError,
    build_features,
    destandardize_column,
    destandardize_targets,
)
from .ingest import RiderProfile, Session
from .lstm import LstmParams, sequence_forward

if TYPE_CHECKING:  # pragma: no cover
    from .train import Checkpoint

# Headline validation aggregates (min, mean, max RMSE in bpm) reported by the
# original experiment on its proprietary professional dataset. Recorded for
# reference only; they cannot be reproduced from the bundled synthetic data.
REFERENCE_VALIDATION_RMSE_BPM = (2.51, 5.62, 25.67)


@dataclass
class SessionScore:
    session_id: str
    rmse_bpm: float
    t_ds: int


@dataclass
class EvalReport:
    """Per-session scores plus min/mean/max aggregates, model and baseline."""

    sessions: list[SessionScore]
    rmse_min: float
    rmse_mean: float
    rmse_max: float
    baseline_min: float
    baseline_mean: float
    baseline_max: float
    excluded: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sessions": [
                {"session_id": s.session_id, "rmse_bpm": s.rmse_bpm, "t_ds": s.t_ds}
                for s in self.sessions
            ],
            "rmse_bpm": {"min": self.rmse_min, "mean": self.rmse_mean, "max": self.rmse_max},
            "baseline_rmse_bpm": {
                "min": self.baseline_min,
                "mean": self.baseline_mean,
                "max": self.baseline_max,
            },
            "excluded": [{"session_id": sid, "reason": r} for sid, r in self.excluded],
        }


@dataclass
class Embedding:
    session_id: str
    vector: np.ndarray


def rmse_bpm(
    predictions_std: np.ndarray, matrix: FeatureMatrix, standardizer: Standardizer
) -> float:
    """RMSE in bpm between model-space predictions and the matrix targets,
    over masked-in steps only."""
    mask = matrix.target_mask
    n = int(mask.sum())
    if n == 0:
        raise ValueError(f"session {matrix.session_id!r} has no masked-in steps")
    pred_bpm = destandardize_targets(standardizer, predictions_std[mask])
    actual_bpm = destandardize_targets(standardizer, matrix.targets[mask])
    diff = pred_bpm - actual_bpm
    return float(np.sqrt(diff @ diff / n))


def matrix_rmse_bpm(
    params: LstmParams, standardizer: Standardizer, matrix: FeatureMatrix
) -> float:
    """Forward the whole session from zero state and score it in bpm."""
    preds, _, _ = sequence_forward(params, matrix.rows, collect_cache=False)
    return rmse_bpm(preds, matrix, standardizer)


def session_rmse(checkpoint: "Checkpoint", session: Session, profile: RiderProfile) -> float:
    """RMSE in bpm for one cleaned session under a trained checkpoint."""
    matrix = build_features(session, profile, checkpoint.standardizer)
    return matrix_rmse_bpm(checkpoint.params, checkpoint.standardizer, matrix)


def persistence_baseline_rmse(matrix: FeatureMatrix, standardizer: Standardizer) -> float:
    """RMSE in bpm of predicting the heart rate 30 s ago (the lag column)."""
    lag_bpm = destandardize_column(standardizer, matrix.rows[:, _COL_HR_LAG], _COL_HR_LAG)
    lag_std = (lag_bpm - standardizer.target_mean) / standardizer.target_std
    return rmse_bpm(lag_std, matrix, standardizer)


def evaluate_dataset(
    checkpoint: "Checkpoint", pairs: list[tuple[Session, RiderProfile]]
) -> EvalReport:
    """Score every evaluable session; sessions too short for the lag window
    are listed under ``excluded`` instead of being silently dropped."""
    scores: list[SessionScore] = []
    baselines: list[float] = []
    excluded: list[tuple[str, str]] = []
    for session, profile in sorted(pairs, key=lambda sp: sp[0].session_id):
        try:
            matrix = build_features(session, profile, checkpoint.standardizer)
        except TooShortSessionError as exc:
            excluded.append((session.session_id, str(exc)))
            continue
        scores.append(
            SessionScore(
                session_id=session.session_id,
                rmse_bpm=matrix_rmse_bpm(checkpoint.params, checkpoint.standardizer, matrix),
                t_ds=len(matrix),
            )
        )
        baselines.append(persistence_baseline_rmse(matrix, checkpoint.standardizer))
    if not scores:
        raise ValueError("no evaluable sessions")
    rmses = np.array([s.rmse_bpm for s in scores])
    base = np.array(baselines)
    return EvalReport(
        sessions=scores,
        rmse_min=float(rmses.min()),
        rmse_mean=float(rmses.mean()),
        rmse_max=float(rmses.max()),
        baseline_min=float(base.min()),
        baseline_mean=float(base.mean()),
        baseline_max=float(base.max()),
        excluded=excluded,
    )


@dataclass
class Trace:
    """Time-aligned actual and predicted heart rate for one session.

    ``t_ds`` are downsampled timestamps (bin indices); ``actual_bpm`` is NaN
    on rows without a valid heart-rate reading.
    """

    session_id: str
    t_ds: np.ndarray
    actual_bpm: np.ndarray
    predicted_bpm: np.ndarray


def predict_trace(checkpoint: "Checkpoint", session: Session, profile: RiderProfile) -> Trace:
    """Prediction trace for plotting a session's actual vs predicted heart rate."""
    std = checkpoint.standardizer
    matrix = build_features(session, profile, std)
    preds, _, _ = sequence_forward(checkpoint.params, matrix.rows, collect_cache=False)
    actual = np.where(
        matrix.target_mask, destandardize_targets(std, matrix.targets), np.nan
    )
    return Trace(
        session_id=session.session_id,
        t_ds=destandardize_column(std, matrix.rows[:, 0], 0),
        actual_bpm=actual,
        predicted_bpm=destandardize_targets(std, preds),
    )


def trace_to_csv(trace: Trace) -> str:
    """CSV ``t_ds,actual_hr_bpm,predicted_hr_bpm``; blank actual when masked out."""
    lines = ["t_ds,actual_hr_bpm,predicted_hr_bpm"]
    for t, a, p in zip(trace.t_ds, trace.actual_bpm, trace.predicted_bpm):
        actual = "" if np.isnan(a) else str(float(a))
        lines.append(f"{int(round(float(t)))},{actual},{float(p)}")
    return "\n".join(lines) + "\n"


def extract_embedding(
    checkpoint: "Checkpoint",
    session: Session,
    profile: RiderProfile,
    mode: str = "final",
) -> Embedding:
    """Fixed-length encoding of a whole session from the model's hidden state.

    ``final`` takes the hidden state after the last step (zero initial
    state); ``mean`` averages the hidden state over all steps.
    """
    if mode not in ("final", "mean"):
        raise ValueError(f"unknown embedding mode {mode!r}")
    matrix = build_features(session, profile, checkpoint.standardizer)
    if mode == "final":
        _, _, state = sequence_forward(checkpoint.params, matrix.rows, collect_cache=False)
        vector = state.h
    else:
        _, cache, _ = sequence_forward(checkpoint.params, matrix.rows, collect_cache=True)
        vector = cache["hs"].mean(axis=0)
    return Embedding(session_id=session.session_id, vector=vector)


def pca_projection(vectors: np.ndarray, n_components: int = 2) -> np.ndarray:
    """Principal-component projection with a deterministic sign convention:
    each component's first nonzero loading is made positive."""
    centered = vectors - vectors.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:n_components]
    for row in components:
        nonzero = np.nonzero(np.abs(row) > 1e-12)[0]
        if nonzero.size and row[nonzero[0]] < 0:
            row *= -1
    return centered @ components.T


def embeddings_to_csv(embeddings: list[Embedding], include_pca: bool = False) -> str:
    """CSV ``session_id,e0,...,e{H-1}`` with optional ``pc1,pc2`` columns."""
    if not embeddings:
        raise ValueError("no embeddings to export")
    dim = embeddings[0].vector.shape[0]
    header = ["session_id"] + [f"e{i}" for i in range(dim)]
    projection = None
    if include_pca:
        projection = pca_projection(np.vstack([e.vector for e in embeddings]))
        header += ["pc1", "pc2"]
    lines = [",".join(header)]
    for i, emb in enumerate(embeddings):
        cells = [emb.session_id] + [str(float(v)) for v in emb.vector]
        if projection is not None:
            cells += [str(float(projection[i, 0])), str(float(projection[i, 1]))]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
