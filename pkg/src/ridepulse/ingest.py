"""Parsing of session recordings and rider metadata into in-memory records.

A session file is a UTF-8 CSV with the exact header
``t_s,hr_bpm,power_w,speed_kmh,cadence_rpm,altitude_m,distance_km`` holding
one row per recorded second. An empty cell means the channel was not
recorded at that second; no sentinel numbers are ever used. Rider profiles
live in a single JSON array of objects keyed by ``rider_id``.

Session files are named ``<rider_id>__<session_id>.csv`` so the rider
linkage never has to be repeated inside the file.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

log = logging.getLogger(__name__)

SESSION_HEADER = "t_s,hr_bpm,power_w,speed_kmh,cadence_rpm,altitude_m,distance_km"

_FLOAT_FIELDS = ("heart_rate", "power", "speed", "cadence", "altitude", "distance")


class ParseError(ValueError):
    """Malformed session CSV or rider profile JSON."""


@dataclass(frozen=True)
class Sample:
    """One second of recorded channels; ``None`` marks an absent channel."""

    t: int
    heart_rate: float | None = None
    power: float | None = None
    speed: float | None = None
    distance: float | None = None
    cadence: float | None = None
    altitude: float | None = None


@dataclass(frozen=True)
class Session:
    session_id: str
    rider_id: str
    samples: tuple[Sample, ...]

    def duration_s(self) -> int:
        """Span in seconds from first to last sample, inclusive."""
        return self.samples[-1].t - self.samples[0].t + 1


@dataclass(frozen=True)
class RiderProfile:
    rider_id: str
    weight: float
    max_hr: float | None = None
    vo2max: float | None = None
    ftp: float | None = None
    lactate_threshold_hr: float | None = None


def _parse_cell(cell: str, column: str, row: int) -> float | None:
    if cell == "":
        return None
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"row {row}: non-numeric value {cell!r} in column {column}") from None


def parse_session(raw_bytes: bytes, rider_id: str, session_id: str = "") -> Session:
    """Parse one session CSV. Row numbers in errors count data rows, header excluded.

    Rows are re-sorted by ``t`` if needed; duplicate timestamps are a hard
    error because the recording is one sample per second.
    """
    try:
        text = raw_bytes.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8: {exc}") from None
    lines = text.replace("\r\n", "\n").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty file")
    if lines[0] != SESSION_HEADER:
        raise ParseError(f"malformed header {lines[0]!r}, expected {SESSION_HEADER!r}")
    if len(lines) == 1:
        raise ParseError("no data rows")

    columns = SESSION_HEADER.split(",")
    samples = []
    seen_t: dict[int, int] = {}
    for row, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != len(columns):
            raise ParseError(f"row {row}: expected {len(columns)} cells, got {len(cells)}")
        t_cell = cells[0]
        try:
            t = int(t_cell)
        except ValueError:
            raise ParseError(f"row {row}: non-integer timestamp {t_cell!r}") from None
        if t < 0:
            raise ParseError(f"row {row}: negative timestamp {t}")
        if t in seen_t:
            raise ParseError(f"row {row}: duplicate timestamp {t} (first seen at row {seen_t[t]})")
        seen_t[t] = row
        samples.append(
            Sample(
                t=t,
                heart_rate=_parse_cell(cells[1], "hr_bpm", row),
                power=_parse_cell(cells[2], "power_w", row),
                speed=_parse_cell(cells[3], "speed_kmh", row),
                cadence=_parse_cell(cells[4], "cadence_rpm", row),
                altitude=_parse_cell(cells[5], "altitude_m", row),
                distance=_parse_cell(cells[6], "distance_km", row),
            )
        )
    samples.sort(key=lambda s: s.t)
    return Session(session_id=session_id, rider_id=rider_id, samples=tuple(samples))


def _format_cell(value: float | None) -> str:
    return "" if value is None else str(value)


def session_to_csv(session: Session) -> str:
    """Serialize back to the canonical CSV; exact inverse of :func:`parse_session`."""
    lines = [SESSION_HEADER]
    for s in session.samples:
        lines.append(
            ",".join(
                (
                    str(s.t),
                    _format_cell(s.heart_rate),
                    _format_cell(s.power),
                    _format_cell(s.speed),
                    _format_cell(s.cadence),
                    _format_cell(s.altitude),
                    _format_cell(s.distance),
                )
            )
        )
    return "\n".join(lines) + "\n"


_PROFILE_OPTIONAL_KEYS = {
    "max_hr_bpm": "max_hr",
    "vo2max": "vo2max",
    "ftp_w": "ftp",
    "lt_hr_bpm": "lactate_threshold_hr",
}


def _profile_from_obj(obj: object) -> RiderProfile:
    if not isinstance(obj, dict):
        raise ParseError("rider profile must be a JSON object")
    if "rider_id" not in obj:
        raise ParseError("rider profile missing required key 'rider_id'")
    if "weight_kg" not in obj:
        raise ParseError("rider profile missing required key 'weight_kg'")
    rider_id = str(obj["rider_id"])
    weight = float(obj["weight_kg"])
    if weight <= 0:
        raise ParseError(f"rider {rider_id}: non-positive weight {weight}")
    fields: dict[str, float] = {}
    for key, field in _PROFILE_OPTIONAL_KEYS.items():
        if key in obj and obj[key] is not None:
            value = float(obj[key])
            if value <= 0:
                raise ParseError(f"rider {rider_id}: non-positive {key} {value}")
            fields[field] = value
    return RiderProfile(rider_id=rider_id, weight=weight, **fields)


def parse_rider_profile(raw_bytes: bytes) -> RiderProfile:
    """Parse a single rider profile JSON object."""
    try:
        obj = json.loads(raw_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"invalid profile JSON: {exc}") from None
    return _profile_from_obj(obj)


def parse_rider_profiles(raw_bytes: bytes) -> dict[str, RiderProfile]:
    """Parse the profiles file: a JSON array of profile objects, keyed by rider."""
    try:
        arr = json.loads(raw_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"invalid profiles JSON: {exc}") from None
    if not isinstance(arr, list):
        raise ParseError("profiles file must be a JSON array")
    profiles: dict[str, RiderProfile] = {}
    for obj in arr:
        profile = _profile_from_obj(obj)
        if profile.rider_id in profiles:
            raise ParseError(f"duplicate rider_id {profile.rider_id!r} in profiles file")
        profiles[profile.rider_id] = profile
    return profiles


def load_dataset(
    session_dir: str | Path, profiles_file: str | Path
) -> tuple[list[tuple[Session, RiderProfile]], list[tuple[str, str]]]:
    """Parse every ``*.csv`` in ``session_dir`` and join it to its rider profile.

    Files that fail to parse, have an unrecognized name, or belong to riders
    without a profile are skipped; the second return value lists each skipped
    filename with the reason. Directory scan order is sorted for determinism.
    """
    session_dir = Path(session_dir)
    profiles = parse_rider_profiles(Path(profiles_file).read_bytes())
    pairs: list[tuple[Session, RiderProfile]] = []
    skipped: list[tuple[str, str]] = []
    files = sorted(session_dir.glob("*.csv"))
    if not files:
        log.warning("no session files found in %s", session_dir)
    for path in files:
        name = path.name
        stem = path.stem
        if "__" not in stem:
            skipped.append((name, "filename not of the form <rider_id>__<session_id>.csv"))
            continue
        rider_id, session_id = stem.split("__", 1)
        if rider_id not in profiles:
            skipped.append((name, f"no profile for rider {rider_id!r}"))
            continue
        try:
            session = parse_session(path.read_bytes(), rider_id, session_id=session_id)
        except ParseError as exc:
            skipped.append((name, str(exc)))
            continue
        pairs.append((session, profiles[rider_id]))
    return pairs, skipped
