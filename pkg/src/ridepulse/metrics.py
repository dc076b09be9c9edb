"""Training-load metrics: normalized power, intensity factor, TSS.

Normalized power is the fourth root of the mean fourth power of the
30-second trailing moving average of power. Raising the smoothed series to
the fourth power weights hard efforts supra-linearly, so NP is never below
plain average power. TSS scales the session so that one hour ridden exactly
at functional threshold power scores 100:

    IF  = NP / FTP
    TSS = (duration_s * NP * IF) / (FTP * 3600) * 100

Both are computed on the raw 1 Hz power series, before any downsampling,
because the 30 s smoothing window assumes one sample per second.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SMOOTHING_WINDOW_S = 30


@dataclass(frozen=True)
class LoadMetrics:
    normalized_power: float
    intensity_factor: float
    tss: float
    duration_s: int


def normalized_power(power) -> float:
    """NP in watts for a 1 Hz power series of at least 30 seconds.

    The trailing 30-sample moving average has its first complete window at
    t = 29; shorter series are an error rather than a guess.
    """
    p = np.asarray(power, dtype=np.float64)
    if p.ndim != 1:
        raise ValueError("power series must be one-dimensional")
    if len(p) < SMOOTHING_WINDOW_S:
        raise ValueError(
            f"power series of {len(p)} s is shorter than the {SMOOTHING_WINDOW_S} s window"
        )
    if np.any(p < 0):
        raise ValueError("power series contains negative values")
    windows = np.lib.stride_tricks.sliding_window_view(p, SMOOTHING_WINDOW_S)
    smoothed = windows.mean(axis=1)
    return float(np.mean(smoothed**4) ** 0.25)


def tss(power, ftp: float) -> LoadMetrics:
    """Load metrics for a session given the rider's functional threshold power."""
    if ftp is None or ftp <= 0:
        raise ValueError("ftp must be a positive number of watts")
    np_watts = normalized_power(power)
    intensity = np_watts / ftp
    duration = len(power)
    score = (duration * np_watts * intensity) / (ftp * 3600.0) * 100.0
    return LoadMetrics(
        normalized_power=np_watts,
        intensity_factor=intensity,
        tss=score,
        duration_s=duration,
    )
