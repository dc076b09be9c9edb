import numpy as np
import pytest

from ridepulse.cleanse import (
    REASON_ALL_HR_ZERO,
    REASON_NO_HR,
    REASON_SPURIOUS,
    REASON_STATIONARY,
    clean_dataset,
    reject_no_heart_rate,
    reject_spurious,
    reject_stationary,
    trim_heart_rate_zeros,
)

from conftest import make_session


class TestNoHeartRate:
    def test_all_absent_rejected(self):
        assert reject_no_heart_rate(make_session(hr=[None, None, None]))

    def test_single_present_kept(self):
        assert not reject_no_heart_rate(make_session(hr=[None, 90, None]))

    def test_zero_counts_as_present(self):
        # all-zero heart rate is handled later by the trim rule, not here
        assert not reject_no_heart_rate(make_session(hr=[0, 0]))


class TestSpurious:
    def test_high_hr_rejected(self):
        assert reject_spurious(make_session(hr=[120, 250, 110]))

    def test_negative_speed_rejected(self):
        assert reject_spurious(make_session(hr=[120], speed=[-3]))

    def test_negative_distance_rejected(self):
        assert reject_spurious(make_session(hr=[120], distance=[-0.1]))

    def test_negative_power_rejected(self):
        assert reject_spurious(make_session(hr=[120], power=[-1]))

    def test_plausible_session_kept(self):
        assert not reject_spurious(
            make_session(hr=[40, 200, 150], power=[0, 300, 200], speed=[0, 40, 30])
        )

    def test_threshold_boundary(self):
        assert not reject_spurious(make_session(hr=[220]))
        assert reject_spurious(make_session(hr=[221]))

    def test_threshold_configurable(self):
        assert reject_spurious(make_session(hr=[210]), hr_threshold=200)


class TestStationary:
    def test_power_with_constant_distance_rejected(self):
        assert reject_stationary(make_session(hr=[100] * 3, power=[200] * 3, distance=[0.0] * 3))

    def test_no_power_kept(self):
        assert not reject_stationary(make_session(hr=[100] * 3, distance=[5.0] * 3))

    def test_zero_power_kept(self):
        assert not reject_stationary(
            make_session(hr=[100] * 3, power=[0.0] * 3, distance=[5.0] * 3)
        )

    def test_power_with_increasing_distance_kept(self):
        assert not reject_stationary(
            make_session(hr=[100] * 3, power=[200] * 3, distance=[0.0, 0.01, 0.02])
        )

    def test_power_with_absent_distance_rejected(self):
        assert reject_stationary(make_session(hr=[100] * 3, power=[200] * 3))


class TestTrim:
    def test_leading_and_trailing_zeros_dropped(self):
        session = make_session(hr=[0, 0, 90, 95, 0])
        trimmed = trim_heart_rate_zeros(session)
        assert [s.heart_rate for s in trimmed.samples] == [90, 95]
        assert [s.t for s in trimmed.samples] == [0, 1]

    def test_interior_zero_untouched(self):
        session = make_session(hr=[80, 0, 85])
        trimmed = trim_heart_rate_zeros(session)
        assert [s.heart_rate for s in trimmed.samples] == [80, 0, 85]

    def test_absent_ends_also_dropped(self):
        session = make_session(hr=[None, 90, None])
        trimmed = trim_heart_rate_zeros(session)
        assert [s.heart_rate for s in trimmed.samples] == [90]
        assert trimmed.samples[0].t == 0

    def test_all_zero_returns_none(self):
        assert trim_heart_rate_zeros(make_session(hr=[0, 0, 0])) is None


class TestCleanDataset:
    def test_composition_with_distinct_reasons(self):
        sessions = [
            make_session(hr=[None, None], session_id="no_hr"),
            make_session(hr=[120, 250], session_id="spike"),
            make_session(hr=[100, 110, 105], session_id="ok"),
        ]
        kept, report = clean_dataset(sessions)
        assert report.kept == 1
        assert kept[0].session_id == "ok"
        assert dict(report.rejected) == {"no_hr": REASON_NO_HR, "spike": REASON_SPURIOUS}

    def test_empty_input(self):
        kept, report = clean_dataset([])
        assert kept == [] and report.kept == 0 and report.rejected == []

    def test_trim_counts_recorded(self):
        kept, report = clean_dataset([make_session(hr=[0, 0, 90, 95], session_id="a")])
        assert report.kept == 1
        assert report.trimmed_leading["a"] == 2
        assert report.trimmed_trailing["a"] == 0

    def test_all_zero_hr_rejected_by_pipeline(self):
        _, report = clean_dataset([make_session(hr=[0, 0, 0], session_id="z")])
        assert report.rejected == [("z", REASON_ALL_HR_ZERO)]

    def test_stationary_reason(self):
        _, report = clean_dataset(
            [make_session(hr=[100, 100], power=[250, 250], distance=[1.0, 1.0], session_id="t")]
        )
        assert report.rejected == [("t", REASON_STATIONARY)]

    def test_report_serializable(self):
        import json

        _, report = clean_dataset([make_session(hr=[0, 90, 0], session_id="a")])
        parsed = json.loads(json.dumps(report.to_dict()))
        assert parsed["kept"] == 1


def _random_sessions(rng, n):
    sessions = []
    for k in range(n):
        length = int(rng.integers(1, 25))
        hr = [
            None
            if rng.random() < 0.15
            else float(rng.choice([0.0, 0.0, 80.0, 120.0, 150.0, 230.0]))
            for _ in range(length)
        ]
        power = (
            None
            if rng.random() < 0.3
            else [float(rng.choice([0.0, 150.0, 300.0])) for _ in range(length)]
        )
        distance = (
            None
            if rng.random() < 0.3
            else list(np.round(np.cumsum(rng.uniform(0, 0.01, size=length)), 4))
        )
        if rng.random() < 0.2 and distance is not None:
            distance = [5.0] * length
        sessions.append(make_session(hr=hr, power=power, distance=distance, session_id=f"s{k}"))
    return sessions


class TestProperties:
    def test_accounting(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            sessions = _random_sessions(rng, int(rng.integers(0, 12)))
            kept, report = clean_dataset(sessions)
            assert report.kept + len(report.rejected) == len(sessions)
            assert report.kept == len(kept)

    def test_idempotence(self):
        rng = np.random.default_rng(5)
        sessions = _random_sessions(rng, 60)
        kept1, _ = clean_dataset(sessions)
        kept2, report2 = clean_dataset(kept1)
        assert kept2 == kept1
        assert report2.rejected == []
        assert all(v == 0 for v in report2.trimmed_leading.values())
        assert all(v == 0 for v in report2.trimmed_trailing.values())

    def test_kept_is_contiguous_subsequence(self):
        rng = np.random.default_rng(9)
        sessions = _random_sessions(rng, 60)
        kept, _ = clean_dataset(sessions)
        originals = {s.session_id: s for s in sessions}
        for session in kept:
            raw = originals[session.session_id]
            hrs = [s.heart_rate for s in raw.samples]
            kept_hrs = [s.heart_rate for s in session.samples]
            found = any(
                hrs[i : i + len(kept_hrs)] == kept_hrs
                for i in range(len(hrs) - len(kept_hrs) + 1)
            )
            assert found, f"{session.session_id} not a contiguous slice"

    def test_order_invariance(self):
        rng = np.random.default_rng(13)
        sessions = _random_sessions(rng, 40)
        kept_fwd, _ = clean_dataset(sessions)
        kept_rev, _ = clean_dataset(list(reversed(sessions)))
        assert {s.session_id for s in kept_fwd} == {s.session_id for s in kept_rev}
