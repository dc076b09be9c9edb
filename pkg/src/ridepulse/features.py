"""Downsampled, lag-augmented, standardized model inputs with aligned targets.

The 1 Hz stream is reduced to 0.3 samples per second by averaging within
bins of index floor(0.3 * t) (computed exactly as ``3*t // 10``). The lagged
heart-rate channel is built on the original 1 Hz timebase so "30 seconds
prior" is exact, then binned like every other channel; the first 9
downsampled rows (the lag warm-up, 0.3 * 30) are dropped.

Feature column order is fixed and mirrors the model's input contract:
time, speed, distance, power, cadence, power per kg, altitude, lagged hr.

Targets are the per-bin average of valid (present and positive) heart
rates; bins without a valid reading are masked out of the loss rather than
imputed. Interior zero readings are treated as momentary sensor dropout:
the lag channel carries the last valid value forward across them, but they
never contribute to a target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ingest import RiderProfile, Sample, Session

FEATURE_COLUMNS = (
    "time_s",
    "speed_kmh",
    "distance_km",
    "power_w",
    "cadence_rpm",
    "power_per_kg",
    "altitude_m",
    "hr_lag30_bpm",
)

LAG_SECONDS = 30
LAG_ROWS_DROPPED = 9  # 0.3 * LAG_SECONDS downsampled rows have no lag value

# Column filled from the power column and the rider's weight.
_COL_TIME = 0
_COL_SPEED = 1
_COL_DISTANCE = 2
_COL_POWER = 3
_COL_CADENCE = 4
_COL_POWER_PER_KG = 5
_COL_ALTITUDE = 6
_COL_HR_LAG = 7


class TooShortSessionError(ValueError):
    """Session too short to produce any row once the lag warm-up is dropped."""


class ZeroVarianceError(ValueError):
    """A feature column has no variance (or no values at all) in the training pool."""


@dataclass
class FeatureMatrix:
    """Model input for one session.

    ``rows`` is (T, 8) in :data:`FEATURE_COLUMNS` order and ``targets`` is the
    per-row heart rate; ``target_mask`` marks the rows that contribute to the
    loss. Raw matrices (as built) hold native units with NaN for absent
    values; standardized matrices are NaN-free with absent cells mean-filled
    to 0.
    """

    session_id: str
    rows: np.ndarray
    targets: np.ndarray
    target_mask: np.ndarray

    def __len__(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class Standardizer:
    """Per-column and target mean/std, fit exclusively on training-split data."""

    feature_mean: np.ndarray
    feature_std: np.ndarray
    target_mean: float
    target_std: float


def bin_index(t: np.ndarray | int):
    """Downsampling bin of a 1 Hz timestamp: floor(0.3 * t), computed exactly."""
    return (3 * t) // 10


def _channel_array(session: Session, name: str) -> np.ndarray:
    values = [getattr(s, name) for s in session.samples]
    return np.array([np.nan if v is None else v for v in values], dtype=np.float64)


def _bin_means(values: np.ndarray, inverse: np.ndarray, n_bins: int) -> np.ndarray:
    """Mean of present (non-NaN) values per bin; NaN where a bin has none."""
    present = ~np.isnan(values)
    sums = np.bincount(inverse, weights=np.where(present, values, 0.0), minlength=n_bins)
    counts = np.bincount(inverse, weights=present.astype(np.float64), minlength=n_bins)
    with np.errstate(invalid="ignore"):
        means = sums / counts
    means[counts == 0] = np.nan
    return means


def downsample(session: Session) -> Session:
    """Reduce a 1 Hz session to 0.3 samples/s by bin-averaging each channel.

    Samples are grouped by floor(0.3 * t); within a bin each channel is the
    mean of its present values (absent iff all members are absent). The
    output timestamps are the bin indices.
    """
    ts = np.array([s.t for s in session.samples], dtype=np.int64)
    bins, inverse = np.unique(bin_index(ts), return_inverse=True)
    n = len(bins)
    channels = {
        name: _bin_means(_channel_array(session, name), inverse, n)
        for name in ("heart_rate", "power", "speed", "distance", "cadence", "altitude")
    }
    samples = tuple(
        Sample(
            t=int(bins[i]),
            **{
                name: (None if np.isnan(col[i]) else float(col[i]))
                for name, col in channels.items()
            },
        )
        for i in range(n)
    )
    return Session(session_id=session.session_id, rider_id=session.rider_id, samples=samples)


def _forward_filled_hr(session: Session) -> np.ndarray:
    """Dense per-second carry of the last present-and-positive heart rate."""
    t_max = session.samples[-1].t
    dense = np.full(t_max + 1, np.nan)
    for s in session.samples:
        if s.heart_rate is not None and s.heart_rate > 0:
            dense[s.t] = s.heart_rate
    idx = np.where(~np.isnan(dense), np.arange(t_max + 1), 0)
    np.maximum.accumulate(idx, out=idx)
    return dense[idx]


def build_lag_channel(session: Session) -> np.ndarray:
    """Heart rate 30 s before each sample, on the original 1 Hz timebase.

    Interior dropouts (absent or zero readings) are bridged by carrying the
    most recent valid value forward. Entries for t < 30 are NaN; they fall in
    the first 9 downsampled rows, which the feature pipeline drops.
    """
    t_first = session.samples[0].t
    t_last = session.samples[-1].t
    if t_last - t_first < LAG_SECONDS:
        raise TooShortSessionError(
            f"session {session.session_id!r} spans {t_last - t_first + 1} s; "
            f"need more than {LAG_SECONDS} s for the lag channel"
        )
    carry = _forward_filled_hr(session)
    lagged = np.full(len(session.samples), np.nan)
    for i, s in enumerate(session.samples):
        if s.t >= LAG_SECONDS:
            lagged[i] = carry[s.t - LAG_SECONDS]
    return lagged


def build_features(
    session: Session,
    profile: RiderProfile,
    standardizer: Standardizer | None = None,
) -> FeatureMatrix:
    """Build the (T, 8) matrix and aligned targets for one cleaned session.

    Pipeline: 1 Hz lag channel -> bin-average downsampling -> drop the 9
    warm-up rows -> derive power/kg from the rider's weight -> standardize
    when a fitted standardizer is given (absent cells become the training
    mean, i.e. standardized 0). Without a standardizer the raw matrix is
    returned, with NaN marking absent cells, for standardizer fitting.
    """
    lag_1hz = build_lag_channel(session)

    ts = np.array([s.t for s in session.samples], dtype=np.int64)
    bins, inverse = np.unique(bin_index(ts), return_inverse=True)
    n = len(bins)
    if n <= LAG_ROWS_DROPPED:
        raise TooShortSessionError(
            f"session {session.session_id!r} has only {n} downsampled rows; "
            f"need more than {LAG_ROWS_DROPPED}"
        )

    hr = _channel_array(session, "heart_rate")
    valid_hr = np.where(hr > 0, hr, np.nan)  # NaN-safe: absent stays NaN

    rows = np.empty((n, len(FEATURE_COLUMNS)), dtype=np.float64)
    rows[:, _COL_TIME] = bins
    rows[:, _COL_SPEED] = _bin_means(_channel_array(session, "speed"), inverse, n)
    rows[:, _COL_DISTANCE] = _bin_means(_channel_array(session, "distance"), inverse, n)
    rows[:, _COL_POWER] = _bin_means(_channel_array(session, "power"), inverse, n)
    rows[:, _COL_CADENCE] = _bin_means(_channel_array(session, "cadence"), inverse, n)
    rows[:, _COL_POWER_PER_KG] = rows[:, _COL_POWER] / profile.weight
    rows[:, _COL_ALTITUDE] = _bin_means(_channel_array(session, "altitude"), inverse, n)
    rows[:, _COL_HR_LAG] = _bin_means(lag_1hz, inverse, n)
    targets = _bin_means(valid_hr, inverse, n)

    rows = rows[LAG_ROWS_DROPPED:]
    targets = targets[LAG_ROWS_DROPPED:]
    mask = ~np.isnan(targets)

    matrix = FeatureMatrix(
        session_id=session.session_id, rows=rows, targets=targets, target_mask=mask
    )
    if standardizer is not None:
        matrix = apply_standardizer(standardizer, matrix)
    return matrix


def fit_standardizer(training_matrices: list[FeatureMatrix]) -> Standardizer:
    """Population mean/std per column over the pooled masked-in training rows.

    Absent (NaN) cells are excluded from the statistics. A column whose
    pooled values are constant or entirely absent cannot be standardized and
    raises :class:`ZeroVarianceError` naming the column.
    """
    if not training_matrices:
        raise ValueError("no training matrices to fit on")
    rows = np.concatenate([m.rows[m.target_mask] for m in training_matrices])
    targets = np.concatenate([m.targets[m.target_mask] for m in training_matrices])
    if rows.shape[0] < 2:
        raise ValueError(f"need at least 2 pooled training rows, got {rows.shape[0]}")

    with np.errstate(invalid="ignore"):
        mean = np.nanmean(rows, axis=0)
        std = np.nanstd(rows, axis=0)
    for i, name in enumerate(FEATURE_COLUMNS):
        if not np.isfinite(std[i]) or std[i] == 0:
            raise ZeroVarianceError(
                f"column {name!r} has no variance in the training pool"
            )
    target_mean = float(np.mean(targets))
    target_std = float(np.std(targets))
    if not np.isfinite(target_std) or target_std == 0:
        raise ZeroVarianceError("target heart rate has no variance in the training pool")
    return Standardizer(
        feature_mean=mean, feature_std=std, target_mean=target_mean, target_std=target_std
    )


def apply_standardizer(standardizer: Standardizer, matrix: FeatureMatrix) -> FeatureMatrix:
    """Rescale a raw matrix to mean 0 / std 1 per column; absent cells become 0.

    Masked-out targets are stored as 0 (the target mean) so the matrix stays
    finite; they never enter the loss. The transform is exactly invertible
    through :func:`destandardize_targets` / :func:`destandardize_column`.
    """
    rows = (matrix.rows - standardizer.feature_mean) / standardizer.feature_std
    np.nan_to_num(rows, copy=False, nan=0.0)
    targets = np.where(
        matrix.target_mask,
        (matrix.targets - standardizer.target_mean) / standardizer.target_std,
        0.0,
    )
    if not np.isfinite(rows).all() or not np.isfinite(targets).all():
        raise ValueError(f"non-finite values after standardizing {matrix.session_id!r}")
    return FeatureMatrix(
        session_id=matrix.session_id,
        rows=rows,
        targets=targets,
        target_mask=matrix.target_mask.copy(),
    )


def destandardize_targets(standardizer: Standardizer, values: np.ndarray) -> np.ndarray:
    """Map model-space targets/predictions back to beats per minute."""
    return values * standardizer.target_std + standardizer.target_mean


def standardize_targets(standardizer: Standardizer, values_bpm: np.ndarray) -> np.ndarray:
    return (values_bpm - standardizer.target_mean) / standardizer.target_std


def destandardize_column(
    standardizer: Standardizer, values: np.ndarray, column: int
) -> np.ndarray:
    """Map one standardized feature column back to its native units."""
    return values * standardizer.feature_std[column] + standardizer.feature_mean[column]
