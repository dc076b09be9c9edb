"""Synthetic riders and sessions with first-order heart-rate dynamics.

The real corpus this pipeline was designed for is proprietary, so tests and
demos run on generated data with known physiology: steady-state heart rate
rises linearly with power up to the rider's maximum, and the actual heart
rate approaches it exponentially with a fast rise and a slower recovery
time constant. That asymmetric first-order response is the simplest
dynamics the model has to learn, and it has a closed form on constant-power
stretches, which makes the simulator itself testable.

Two session regimes are generated: interval (square-wave power blocks) and
steady (roughly constant power), mirroring the two ride types the
prediction traces are meant to show. Speed, distance, cadence and altitude
are derived from power with light seeded noise so every feature column is
exercised. Generated files use exactly the ingest formats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import Sample, Session, session_to_csv

HR_CLAMP_BELOW_REST = 10.0  # noise may dip this far below resting rate

# Documented draw ranges for rider parameters (uniform).
RIDER_RANGES = {
    "weight": (55.0, 85.0),
    "hr_rest": (40.0, 60.0),
    "hr_max": (180.0, 205.0),
    "hr_gain": (0.18, 0.30),
    "tau_rise": (25.0, 45.0),
    "tau_fall": (50.0, 90.0),
    "ftp": (220.0, 360.0),
}


@dataclass(frozen=True)
class SynthRiderParams:
    rider_id: str
    weight: float
    hr_rest: float
    hr_max: float
    hr_gain: float  # bpm per watt at steady state
    tau_rise: float  # seconds, heart rate rising
    tau_fall: float  # seconds, heart rate recovering
    noise_std: float  # bpm
    ftp: float

    def __post_init__(self):
        if not self.hr_rest < self.hr_max:
            raise ValueError("hr_rest must be below hr_max")
        if self.tau_rise <= 0 or self.tau_fall <= 0:
            raise ValueError("time constants must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


@dataclass(frozen=True)
class SessionPlan:
    """Power schedule for one generated session.

    interval: alternate high_watts for high_seconds with low_watts for
    low_seconds. steady: hold target_watts with jitter_watts of seeded
    Gaussian jitter (also applied to interval blocks when nonzero).
    """

    regime: str  # "interval" or "steady"
    duration_s: int
    seed: int = 0
    high_watts: float = 380.0
    low_watts: float = 120.0
    high_seconds: int = 60
    low_seconds: int = 120
    target_watts: float = 230.0
    jitter_watts: float = 0.0

    def __post_init__(self):
        if self.regime not in ("interval", "steady"):
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.duration_s < 60:
            raise ValueError("duration must be at least 60 s")
        if min(self.high_watts, self.low_watts, self.target_watts) < 0:
            raise ValueError("powers must be non-negative")


def generate_power(plan: SessionPlan) -> np.ndarray:
    """Per-second power series for a plan; deterministic under its seed."""
    t = np.arange(plan.duration_s)
    if plan.regime == "interval":
        period = plan.high_seconds + plan.low_seconds
        power = np.where(t % period < plan.high_seconds, plan.high_watts, plan.low_watts)
        power = power.astype(np.float64)
    else:
        power = np.full(plan.duration_s, plan.target_watts)
    if plan.jitter_watts > 0:
        rng = np.random.default_rng(plan.seed)
        power = power + rng.normal(0.0, plan.jitter_watts, size=plan.duration_s)
    return np.maximum(power, 0.0)


def steady_state_hr(rider: SynthRiderParams, power: np.ndarray | float):
    """Heart rate the rider settles at for a held power."""
    return np.minimum(rider.hr_max, rider.hr_rest + rider.hr_gain * np.asarray(power))


def simulate_hr(
    rider: SynthRiderParams, power: np.ndarray, seed: int | None = None
) -> np.ndarray:
    """Euler-integrated heart-rate response at 1 Hz.

    hr[t+1] = hr[t] + (hr_ss(P[t]) - hr[t]) / tau, with tau_rise when below
    the steady state and tau_fall when above, plus seeded Gaussian noise
    clamped to [hr_rest - 10, hr_max]. hr[0] = hr_rest. With zero noise the
    response on constant power follows the geometric closed form exactly.
    """
    n = len(power)
    hr_ss = steady_state_hr(rider, power)
    hr = np.empty(n)
    hr[0] = rider.hr_rest
    inv_rise = 1.0 / rider.tau_rise
    inv_fall = 1.0 / rider.tau_fall
    for t in range(n - 1):
        delta = hr_ss[t] - hr[t]
        hr[t + 1] = hr[t] + delta * (inv_rise if delta > 0 else inv_fall)
    if rider.noise_std > 0:
        rng = np.random.default_rng(seed)
        hr = hr + rng.normal(0.0, rider.noise_std, size=n)
        hr = np.clip(hr, rider.hr_rest - HR_CLAMP_BELOW_REST, rider.hr_max)
    return hr


def _draw_rider(rider_id: str, rng: np.random.Generator, noise_std: float) -> SynthRiderParams:
    draws = {name: rng.uniform(lo, hi) for name, (lo, hi) in RIDER_RANGES.items()}
    return SynthRiderParams(rider_id=rider_id, noise_std=noise_std, **draws)


def _derive_kinematics(
    power: np.ndarray, ftp: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Speed, cumulative distance, cadence and altitude tied to the power
    series, with light noise; all positive and distance strictly increasing."""
    n = len(power)
    speed = 12.0 + 0.055 * power + rng.normal(0.0, 0.4, size=n)
    speed = np.clip(speed, 5.0, 65.0)
    distance = np.concatenate([[0.0], np.cumsum(speed[:-1]) / 3600.0])
    cadence = 88.0 + 16.0 * (power / ftp - 0.7) + rng.normal(0.0, 1.5, size=n)
    cadence = np.clip(cadence, 40.0, 130.0)
    altitude = 150.0 + 30.0 * np.sin(2 * np.pi * np.arange(n) / 900.0) + np.cumsum(
        rng.normal(0.0, 0.05, size=n)
    )
    altitude = np.maximum(altitude, 0.0)
    return speed, distance, cadence, altitude


def build_session(
    rider: SynthRiderParams,
    plan: SessionPlan,
    session_id: str,
) -> Session:
    """One fully-populated synthetic session in the ingest record format."""
    # distinct sub-streams: plan.seed drives power jitter, +1 hr noise, +2 kinematics
    rng = np.random.default_rng(plan.seed + 2)
    power = generate_power(plan)
    hr = simulate_hr(rider, power, seed=plan.seed + 1)
    speed, distance, cadence, altitude = _derive_kinematics(power, rider.ftp, rng)
    samples = tuple(
        Sample(
            t=t,
            heart_rate=round(float(hr[t]), 2),
            power=round(float(power[t]), 1),
            speed=round(float(speed[t]), 3),
            distance=round(float(distance[t]), 6),
            cadence=round(float(cadence[t]), 1),
            altitude=round(float(altitude[t]), 2),
        )
        for t in range(plan.duration_s)
    )
    return Session(session_id=session_id, rider_id=rider.rider_id, samples=samples)


def generate_corpus(
    out_dir: str | Path,
    n_riders: int = 15,
    sessions_per_rider: int = 20,
    regime_mix: float = 0.5,
    seed: int = 0,
    noise_std: float = 1.0,
    duration_range: tuple[int, int] = (900, 1800),
) -> tuple[list[Path], Path]:
    """Write a full synthetic corpus in the ingest file formats.

    Creates ``<out_dir>/sessions/<rider_id>__<session_id>.csv`` plus
    ``<out_dir>/profiles.json``. ``regime_mix`` is the probability that a
    session is an interval ride rather than a steady one. Byte-identical
    for identical arguments.
    """
    if n_riders < 2:
        raise ValueError("need at least 2 riders (downstream split is by rider)")
    if sessions_per_rider < 1:
        raise ValueError("sessions_per_rider must be >= 1")
    out_dir = Path(out_dir)
    session_dir = out_dir / "sessions"
    session_dir.mkdir(parents=True, exist_ok=True)

    root = np.random.SeedSequence(seed)
    rider_seeds = root.spawn(n_riders)
    profiles = []
    paths: list[Path] = []
    for r in range(n_riders):
        rider_rng = np.random.default_rng(rider_seeds[r])
        rider = _draw_rider(f"r{r:02d}", rider_rng, noise_std)
        profiles.append(
            {
                "rider_id": rider.rider_id,
                "weight_kg": round(rider.weight, 1),
                "max_hr_bpm": round(rider.hr_max, 1),
                "ftp_w": round(rider.ftp, 1),
            }
        )
        for s in range(sessions_per_rider):
            duration = int(rider_rng.integers(duration_range[0], duration_range[1] + 1))
            plan_seed = int(rider_rng.integers(0, 2**31 - 1))
            if rider_rng.random() < regime_mix:
                plan = SessionPlan(
                    regime="interval",
                    duration_s=duration,
                    seed=plan_seed,
                    high_watts=round(float(rider.ftp * rider_rng.uniform(1.15, 1.45)), 1),
                    low_watts=round(float(rider.ftp * rider_rng.uniform(0.35, 0.55)), 1),
                    high_seconds=int(rider_rng.integers(90, 136)),
                    low_seconds=int(rider_rng.integers(180, 271)),
                )
            else:
                plan = SessionPlan(
                    regime="steady",
                    duration_s=duration,
                    seed=plan_seed,
                    target_watts=round(float(rider.ftp * rider_rng.uniform(0.65, 0.85)), 1),
                    jitter_watts=8.0,
                )
            session = build_session(rider, plan, f"s{r:02d}{s:03d}")
            path = session_dir / f"{rider.rider_id}__{session.session_id}.csv"
            path.write_text(session_to_csv(session), encoding="utf-8")
            paths.append(path)

    profiles_path = out_dir / "profiles.json"
    profiles_path.write_text(json.dumps(profiles, indent=2, sort_keys=True) + "\n", "utf-8")
    return paths, profiles_path
