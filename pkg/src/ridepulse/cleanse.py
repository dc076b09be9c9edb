"""Session rejection rules and heart-rate end-trimming.

A session survives cleaning only if it carries at least one heart-rate
reading, has no spurious values (heart rate above the threshold, negative
distance/speed/power), and is not a stationary ride (power recorded while
the distance never increases). Kept sessions are trimmed of leading and
trailing seconds where heart rate is missing or zero, which happens when
the rider puts the monitor on late or takes it off early; interior zeros
are kept and dealt with downstream.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .ingest import Session

DEFAULT_SPURIOUS_HR_THRESHOLD = 220.0

REASON_NO_HR = "no_heart_rate"
REASON_SPURIOUS = "spurious_values"
REASON_STATIONARY = "stationary_with_power"
REASON_ALL_HR_ZERO = "all_hr_zero"


@dataclass
class CleanReport:
    """Accounting of one cleaning pass: kept + len(rejected) == input count."""

    kept: int = 0
    rejected: list[tuple[str, str]] = field(default_factory=list)
    trimmed_leading: dict[str, int] = field(default_factory=dict)
    trimmed_trailing: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kept": self.kept,
            "rejected": [{"session_id": sid, "reason": r} for sid, r in self.rejected],
            "trimmed_leading": dict(self.trimmed_leading),
            "trimmed_trailing": dict(self.trimmed_trailing),
        }


def reject_no_heart_rate(session: Session) -> bool:
    """True if the session should be rejected for carrying no heart-rate readings."""
    return all(s.heart_rate is None for s in session.samples)


def reject_spurious(session: Session, hr_threshold: float = DEFAULT_SPURIOUS_HR_THRESHOLD) -> bool:
    """True if any reading is implausible: hr above threshold, or negative
    distance, speed or power."""
    for s in session.samples:
        if s.heart_rate is not None and s.heart_rate > hr_threshold:
            return True
        if s.distance is not None and s.distance < 0:
            return True
        if s.speed is not None and s.speed < 0:
            return True
        if s.power is not None and s.power < 0:
            return True
    return False


def reject_stationary(session: Session) -> bool:
    """True if power was recorded (some value > 0) but distance never increased.

    All-absent distance counts as "did not increase"; the rule only fires
    when there is actual pedaling power, so unpowered sessions are kept.
    """
    if not any(s.power is not None and s.power > 0 for s in session.samples):
        return False
    distances = [s.distance for s in session.samples if s.distance is not None]
    if not distances:
        return True
    return max(distances) - min(distances) == 0


def _valid_hr_span(session: Session) -> tuple[int, int] | None:
    """Index range [lo, hi] of samples bounded by present, nonzero heart rate."""
    lo = None
    hi = None
    for i, s in enumerate(session.samples):
        if s.heart_rate is not None and s.heart_rate != 0:
            if lo is None:
                lo = i
            hi = i
    if lo is None:
        return None
    return lo, hi


def trim_heart_rate_zeros(session: Session) -> Session | None:
    """Drop the leading/trailing samples whose heart rate is absent or zero.

    Timestamps are re-based so the first kept sample has t = 0. Returns None
    when nothing is left (every heart rate absent or zero).
    """
    span = _valid_hr_span(session)
    if span is None:
        return None
    lo, hi = span
    t0 = session.samples[lo].t
    kept = tuple(
        dataclasses.replace(s, t=s.t - t0) for s in session.samples[lo : hi + 1]
    )
    return dataclasses.replace(session, samples=kept)


def clean_dataset(
    sessions: list[Session], spurious_hr_threshold: float = DEFAULT_SPURIOUS_HR_THRESHOLD
) -> tuple[list[Session], CleanReport]:
    """Apply every rule in fixed order and account for every input session.

    Rule order: no-heart-rate, spurious values, stationary ride, end trim.
    Rejections are data, not errors; the report lists each with its reason.
    """
    kept: list[Session] = []
    report = CleanReport()
    for session in sessions:
        if reject_no_heart_rate(session):
            report.rejected.append((session.session_id, REASON_NO_HR))
            continue
        if reject_spurious(session, spurious_hr_threshold):
            report.rejected.append((session.session_id, REASON_SPURIOUS))
            continue
        if reject_stationary(session):
            report.rejected.append((session.session_id, REASON_STATIONARY))
            continue
        span = _valid_hr_span(session)
        if span is None:
            report.rejected.append((session.session_id, REASON_ALL_HR_ZERO))
            continue
        lo, hi = span
        trimmed = trim_heart_rate_zeros(session)
        assert trimmed is not None
        kept.append(trimmed)
        report.trimmed_leading[session.session_id] = lo
        report.trimmed_trailing[session.session_id] = len(session.samples) - 1 - hi
    report.kept = len(kept)
    return kept, report
