import numpy as np
import pytest

from ridepulse.features import (
    FEATURE_COLUMNS,
    LAG_ROWS_DROPPED,
    LAG_SECONDS,
    FeatureMatrix,
    TooShortSessionError,
    ZeroVarianceError,
    apply_standardizer,
    bin_index,
    build_features,
    build_lag_channel,
    destandardize_column,
    destandardize_targets,
    downsample,
    fit_standardizer,
)

from conftest import make_session, make_profile


class TestDownsample:
    def test_bin_pattern_for_first_ten_seconds(self):
        # oracle: enumerate floor(0.3 * t) for t = 0..9 by hand
        oracle = [int(np.floor(0.3 * t)) for t in range(10)]
        assert oracle == [0, 0, 0, 0, 1, 1, 1, 2, 2, 2]
        session = make_session(hr=list(range(10)))
        ds = downsample(session)
        assert [s.t for s in ds.samples] == [0, 1, 2]
        # bin sizes 4, 3, 3: means of 0..3, 4..6, 7..9
        assert [s.heart_rate for s in ds.samples] == [1.5, 5.0, 8.0]

    def test_integer_bins_match_float_floor_for_large_t(self):
        t = np.arange(100_000)
        assert np.array_equal(bin_index(t), np.floor(0.3 * t).astype(np.int64))

    def test_constant_hr_preserved(self):
        session = make_session(hr=[100.0] * 47)
        assert all(s.heart_rate == 100.0 for s in downsample(session).samples)

    def test_single_sample(self):
        ds = downsample(make_session(hr=[123.0], power=[250.0]))
        assert len(ds.samples) == 1
        assert ds.samples[0].t == 0
        assert ds.samples[0].heart_rate == 123.0
        assert ds.samples[0].power == 250.0

    def test_absent_values_excluded_from_mean(self):
        session = make_session(hr=[100, None, 110, None])
        ds = downsample(session)
        assert ds.samples[0].heart_rate == 105.0

    def test_all_absent_bin_stays_absent(self):
        session = make_session(hr=[100] * 4, power=[None] * 4)
        assert downsample(session).samples[0].power is None


class TestLagChannel:
    def test_ramp_shift(self, ramp_session):
        lagged = build_lag_channel(ramp_session)
        assert lagged[40] == 10.0

    def test_ramp_matches_brute_force_shift(self, ramp_session):
        lagged = build_lag_channel(ramp_session)
        hr = [s.heart_rate for s in ramp_session.samples]
        for i, s in enumerate(ramp_session.samples):
            if s.t >= LAG_SECONDS:
                assert lagged[i] == hr[s.t - LAG_SECONDS] or (
                    hr[s.t - LAG_SECONDS] == 0
                )
            else:
                assert np.isnan(lagged[i])

    def test_constant_hr(self):
        session = make_session(hr=[120.0] * 60)
        lagged = build_lag_channel(session)
        assert np.all(lagged[30:] == 120.0)
        assert np.all(np.isnan(lagged[:30]))

    def test_too_short_rejected(self):
        with pytest.raises(TooShortSessionError):
            build_lag_channel(make_session(hr=[100.0] * 20))

    def test_interior_dropout_carries_forward(self):
        hr = [100.0] * 35
        hr[4] = 0.0
        hr[5] = None
        session = make_session(hr=hr)
        lagged = build_lag_channel(session)
        # t=34 looks back to t=4 (dropout): carries the last valid value (t=3)
        assert lagged[34] == 100.0
        assert lagged[35 - 1] == 100.0


class TestStandardizer:
    def _matrix(self, columns, targets=None, mask=None):
        rows = np.array(columns, dtype=np.float64)
        t = np.arange(rows.shape[0], dtype=np.float64) if targets is None else np.array(targets, dtype=np.float64)
        m = np.ones(rows.shape[0], dtype=bool) if mask is None else np.array(mask, dtype=bool)
        return FeatureMatrix(session_id="m", rows=rows, targets=t, target_mask=m)

    def test_population_stats_oracle(self):
        # population std of [1,2,3]: sqrt(((1-2)^2 + 0 + (3-2)^2) / 3) = sqrt(2/3)
        col = np.array([1.0, 2.0, 3.0])
        rows = np.tile(col[:, None], (1, 8))
        rows[:, 1] = [0.0, 5.0, 10.0]  # give other columns variance too
        rows[:, 2:] = np.arange(3)[:, None] + np.arange(6)[None, :]
        matrix = self._matrix(rows, targets=[60.0, 70.0, 80.0])
        std = fit_standardizer([matrix])
        assert std.feature_mean[0] == pytest.approx(2.0, abs=1e-12)
        assert std.feature_std[0] == pytest.approx(np.sqrt(2.0 / 3.0), abs=1e-12)

    def test_zero_variance_column_named(self):
        rows = np.random.default_rng(0).normal(size=(5, 8))
        rows[:, 4] = 7.0
        with pytest.raises(ZeroVarianceError, match="cadence_rpm"):
            fit_standardizer([self._matrix(rows, targets=[1, 2, 3, 4, 5])])

    def test_training_pool_standardizes_to_zero_mean_unit_std(self):
        rng = np.random.default_rng(1)
        mats = [
            self._matrix(rng.normal(size=(20, 8)) * 3 + 5, targets=rng.uniform(60, 180, 20))
            for _ in range(4)
        ]
        std = fit_standardizer(mats)
        out = [apply_standardizer(std, m) for m in mats]
        pooled = np.concatenate([m.rows[m.target_mask] for m in out])
        np.testing.assert_allclose(pooled.mean(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(pooled.std(axis=0), 1.0, atol=1e-9)
        pooled_t = np.concatenate([m.targets[m.target_mask] for m in out])
        assert abs(pooled_t.mean()) < 1e-9

    def test_mean_maps_to_zero_and_mean_plus_std_to_one(self):
        rng = np.random.default_rng(2)
        mats = [self._matrix(rng.normal(size=(30, 8)), targets=rng.uniform(60, 180, 30))]
        std = fit_standardizer(mats)
        probe = self._matrix(
            np.vstack([std.feature_mean, std.feature_mean + std.feature_std]),
            targets=[std.target_mean, std.target_mean + std.target_std],
        )
        out = apply_standardizer(std, probe)
        np.testing.assert_allclose(out.rows[0], 0.0, atol=1e-12)
        np.testing.assert_allclose(out.rows[1], 1.0, atol=1e-12)
        np.testing.assert_allclose(out.targets, [0.0, 1.0], atol=1e-12)

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(3)
        mats = [self._matrix(rng.normal(size=(50, 8)) * 2 + 1, targets=rng.uniform(60, 180, 50))]
        std = fit_standardizer(mats)
        raw = rng.normal(size=(25, 8)) * 4 - 2
        targets = rng.uniform(50, 200, 25)
        out = apply_standardizer(std, self._matrix(raw, targets=targets))
        np.testing.assert_allclose(
            destandardize_targets(std, out.targets), targets, atol=1e-9
        )
        for col in range(8):
            np.testing.assert_allclose(
                destandardize_column(std, out.rows[:, col], col), raw[:, col], atol=1e-9
            )

    def test_absent_cells_become_zero(self):
        rng = np.random.default_rng(4)
        mats = [self._matrix(rng.normal(size=(30, 8)), targets=rng.uniform(60, 180, 30))]
        std = fit_standardizer(mats)
        raw = rng.normal(size=(10, 8))
        raw[3, 5] = np.nan
        out = apply_standardizer(std, self._matrix(raw, targets=rng.uniform(60, 180, 10)))
        assert out.rows[3, 5] == 0.0
        assert np.isfinite(out.rows).all()

    def test_masked_out_targets_stored_as_zero(self):
        rng = np.random.default_rng(5)
        mats = [self._matrix(rng.normal(size=(30, 8)), targets=rng.uniform(60, 180, 30))]
        std = fit_standardizer(mats)
        targets = np.array([100.0, np.nan, 120.0])
        out = apply_standardizer(
            std,
            self._matrix(rng.normal(size=(3, 8)), targets=targets, mask=[True, False, True]),
        )
        assert out.targets[1] == 0.0
        assert np.isfinite(out.targets).all()


def full_session(n=200, power_value=280.0, weight=70.0):
    hr = [90.0 + 10 * np.sin(i / 17) for i in range(n)]
    return (
        make_session(
            hr=hr,
            power=[power_value] * n,
            speed=[30.0 + (i % 7) for i in range(n)],
            distance=[round(i * 0.008, 5) for i in range(n)],
            cadence=[85.0 + (i % 5) for i in range(n)],
            altitude=[100.0 + (i % 11) for i in range(n)],
        ),
        make_profile(weight=weight),
    )


class TestBuildFeatures:
    def test_power_per_kg(self):
        session, profile = full_session(power_value=280.0, weight=70.0)
        raw = build_features(session, profile)
        col = list(FEATURE_COLUMNS).index("power_per_kg")
        np.testing.assert_allclose(raw.rows[:, col], 4.0)

    def test_row_count_is_bins_minus_nine(self):
        for n in (40, 100, 333):
            session, profile = full_session(n=n)
            raw = build_features(session, profile)
            n_bins = len(np.unique(bin_index(np.arange(n))))
            assert len(raw) == n_bins - LAG_ROWS_DROPPED

    def test_absent_power_column_standardized_zero(self):
        rng = np.random.default_rng(6)
        sessions = [full_session(n=150, power_value=200.0 + 40 * k)[0] for k in range(3)]
        profile = make_profile()
        raws = [build_features(s, profile) for s in sessions]
        std = fit_standardizer(raws)

        bare = make_session(hr=[90.0 + 10 * np.sin(i / 17) for i in range(150)])
        out = build_features(bare, profile, std)
        power_col = list(FEATURE_COLUMNS).index("power_w")
        ppk_col = list(FEATURE_COLUMNS).index("power_per_kg")
        assert np.all(out.rows[:, power_col] == 0.0)
        assert np.all(out.rows[:, ppk_col] == 0.0)

    def test_lag_column_matches_shift_oracle_through_pipeline(self):
        # hr[t] = t: after binning, the lag column must equal the bin-mean
        # of (t - 30), i.e. the target's raw bin mean minus 30
        n = 200
        session = make_session(hr=[float(t) if t > 0 else 0.5 for t in range(n)])
        profile = make_profile()
        raw = build_features(session, profile)
        lag_col = list(FEATURE_COLUMNS).index("hr_lag30_bpm")
        ts = np.arange(n, dtype=float)
        bins = bin_index(np.arange(n))
        expect = []
        for b in np.unique(bins)[LAG_ROWS_DROPPED:]:
            members = ts[bins == b]
            vals = [t - 30 if t - 30 > 0 else 0.5 for t in members]
            expect.append(np.mean(vals))
        np.testing.assert_allclose(raw.rows[:, lag_col], expect, atol=1e-9)

    def test_mask_excludes_dropout_bins(self):
        hr = [100.0] * 120
        for i in range(50, 58):  # a whole bin-and-a-half of dropout
            hr[i] = 0.0
        session = make_session(hr=hr)
        raw = build_features(session, make_profile())
        bins = bin_index(np.arange(120))
        dropped_bins = {b for i, b in enumerate(bins) if 50 <= i < 58}
        fully_dropped = [
            b for b in dropped_bins if all(50 <= i < 58 for i in np.nonzero(bins == b)[0])
        ]
        assert fully_dropped, "test construction should fully cover at least one bin"
        kept_bins = np.unique(bins)[LAG_ROWS_DROPPED:]
        for row, b in enumerate(kept_bins):
            if b in fully_dropped:
                assert not raw.target_mask[row]
            elif b not in dropped_bins:
                assert raw.target_mask[row]

    def test_partial_dropout_bin_targets_average_valid_only(self):
        hr = [100.0] * 120
        hr[40] = 0.0  # one second of dropout inside a bin
        session = make_session(hr=hr)
        raw = build_features(session, make_profile())
        assert np.all(raw.targets[raw.target_mask] == 100.0)

    def test_deterministic(self):
        session, profile = full_session()
        a = build_features(session, profile)
        b = build_features(session, profile)
        assert np.array_equal(a.rows, b.rows)
        assert np.array_equal(a.targets, b.targets)
        assert np.array_equal(a.target_mask, b.target_mask)

    def test_too_short_propagates(self):
        session = make_session(hr=[100.0] * 25)
        with pytest.raises(TooShortSessionError):
            build_features(session, make_profile())

    def test_standardized_round_trip_of_targets(self):
        session, profile = full_session()
        raw = build_features(session, profile)
        std = fit_standardizer([raw])
        out = apply_standardizer(std, raw)
        back = destandardize_targets(std, out.targets[out.target_mask])
        np.testing.assert_allclose(back, raw.targets[raw.target_mask], atol=1e-9)
