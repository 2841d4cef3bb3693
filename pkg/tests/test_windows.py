from __future__ import annotations

from datetime import date, timedelta

import numpy as np
import pytest

from senticast.errors import ConfigError, ValidationError
from senticast.market import BusinessCalendar
from senticast.text import AlignedPanel, PanelRow
from senticast.windows import (
    FeatureSetSpec,
    Normalizer,
    build_windows,
    fit_normalizer,
    windows_from_normalizer,
)

CAL = BusinessCalendar()


def make_panel(ticker: str, closes: list[float], embedding_dim: int = 0, seed: int = 0) -> AlignedPanel:
    rng = np.random.default_rng(seed)
    day = date(2021, 1, 4)
    rows = []
    for i, close in enumerate(closes):
        while day.weekday() >= 5:
            day += timedelta(days=1)
        emb = rng.normal(size=embedding_dim).tolist() if embedding_dim else None
        rows.append(
            PanelRow(
                day=day,
                high=close * 1.01,
                low=close * 0.99,
                open=close,
                volume=1000.0 + i,
                close=close,
                score=float(np.sin(i / 7.0)),
                score_raw=float(np.sin(i / 7.0)) + 0.1,
                embedding=emb,
                holiday=0,
                day_of_week=day.weekday(),
            )
        )
        day += timedelta(days=1)
    return AlignedPanel(ticker=ticker, rows=rows, embedding_dim=embedding_dim)


class TestFeatureSetSpec:
    def test_column_counts(self):
        assert FeatureSetSpec("HLOV").feature_count == 5
        assert FeatureSetSpec("HLOVS").feature_count == 6
        assert FeatureSetSpec("HLOVE", embedding_dim=16).feature_count == 21

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            FeatureSetSpec("HLOVX")

    def test_hlove_needs_dimension(self):
        with pytest.raises(ConfigError):
            FeatureSetSpec("HLOVE")


class TestBuildWindows:
    def test_window_count_without_split(self):
        panel = make_panel("AAA", list(np.linspace(50, 80, 100)))
        train, test, _ = build_windows([panel], FeatureSetSpec("HLOV"), 15, 3, split=1.0)
        assert len(train) == 100 - 15 - 3 + 1 == 83
        assert test == []

    def test_window_count_formula_various_sizes(self):
        for T, L, h in [(30, 5, 2), (60, 15, 3), (45, 10, 5)]:
            panel = make_panel("AAA", list(np.linspace(10, 20, T)))
            train, test, _ = build_windows([panel], FeatureSetSpec("HLOV"), L, h, split=1.0)
            assert len(train) == T - L - h + 1

    def test_hlovs_has_six_feature_columns(self):
        panel = make_panel("AAA", list(np.linspace(50, 80, 40)))
        train, _, _ = build_windows([panel], FeatureSetSpec("HLOVS"), 15, 3, split=1.0)
        assert train[0].past.shape == (15, 6)

    def test_two_companies_pool_with_indices(self):
        a = make_panel("AAA", list(np.linspace(50, 80, 60)))
        b = make_panel("BBB", list(np.linspace(10, 30, 50)))
        train, test, _ = build_windows([a, b], FeatureSetSpec("HLOV"), 15, 3, split=1.0)
        singles = [
            len(build_windows([p], FeatureSetSpec("HLOV"), 15, 3, split=1.0)[0]) for p in (a, b)
        ]
        assert len(train) == sum(singles)
        assert {w.company_index for w in train} == {0, 1}

    def test_split_keeps_targets_out_of_train(self):
        panel = make_panel("AAA", list(np.linspace(50, 80, 100)))
        train, test, norm = build_windows([panel], FeatureSetSpec("HLOV"), 15, 3, split=0.8)
        split_at = norm.train_rows[0]
        assert split_at == 80
        days = [row.day for row in panel.rows]
        for w in train:
            assert all(d < days[split_at] for d in w.target_days)
        for w in test:
            assert all(d >= days[split_at] for d in w.target_days)
        # windows straddling the boundary are dropped entirely
        assert len(train) + len(test) < 100 - 15 - 3 + 1

    def test_normalization_uses_train_rows_only(self):
        closes = [10.0] * 80 + [1000.0] * 20  # regime change in the test region
        panel = make_panel("AAA", closes)
        _, _, norm = build_windows([panel], FeatureSetSpec("HLOV"), 15, 3, split=0.8)
        close_idx = norm.close_index
        assert norm.means[0][close_idx] == pytest.approx(10.0)
        assert norm.stds[0][close_idx] == pytest.approx(1.0)  # degenerate std guard

    def test_normalization_round_trip(self):
        rng = np.random.default_rng(1)
        closes = (100 + rng.normal(0, 5, 60).cumsum()).tolist()
        panel = make_panel("AAA", closes)
        _, _, norm = build_windows([panel], FeatureSetSpec("HLOVS"), 15, 3, split=0.8)
        values = np.asarray(closes)
        round_trip = norm.denormalize_close(0, norm.normalize_close(0, values))
        assert np.allclose(round_trip, values, atol=1e-10)

    def test_anchor_is_last_observed_close(self):
        panel = make_panel("AAA", list(np.linspace(50, 80, 40)))
        train, _, norm = build_windows([panel], FeatureSetSpec("HLOV"), 15, 3, split=1.0)
        w = train[0]
        assert w.anchor_close == pytest.approx(w.past[-1, norm.close_index])
        assert w.anchor_day < w.target_days[0]

    def test_too_short_panel_names_ticker(self):
        panel = make_panel("TINY", [10.0] * 10)
        with pytest.raises(ValidationError, match="TINY"):
            build_windows([panel], FeatureSetSpec("HLOV"), 15, 3)

    def test_hlove_requires_matching_dim(self):
        panel = make_panel("AAA", list(np.linspace(50, 80, 40)), embedding_dim=4)
        with pytest.raises(ConfigError):
            build_windows([panel], FeatureSetSpec("HLOVE", embedding_dim=8), 15, 3)
        train, _, _ = build_windows([panel], FeatureSetSpec("HLOVE", embedding_dim=4), 15, 3, split=1.0)
        assert train[0].past.shape == (15, 9)

    def test_known_future_is_holiday_plus_dow_onehot(self):
        panel = make_panel("AAA", list(np.linspace(50, 80, 40)))
        train, _, _ = build_windows([panel], FeatureSetSpec("HLOV"), 15, 3, split=1.0)
        w = train[0]
        assert w.known_future.shape == (3, 6)
        assert np.array_equal(w.known_future[:, 1:].sum(axis=1), np.ones(3))

    def test_windows_from_normalizer_reuses_fitted_stats(self):
        panel = make_panel("AAA", list(np.linspace(50, 80, 60)))
        spec = FeatureSetSpec("HLOV")
        norm = fit_normalizer([panel], spec, 15, 3, split=0.8)
        restored = Normalizer.from_dict(norm.to_dict())
        train_a, test_a = windows_from_normalizer([panel], spec, norm, 15, 3)
        train_b, test_b = windows_from_normalizer([panel], spec, restored, 15, 3)
        assert len(train_a) == len(train_b) and len(test_a) == len(test_b)
        assert np.array_equal(train_a[0].past, train_b[0].past)

    def test_duplicate_tickers_rejected(self):
        panel = make_panel("AAA", list(np.linspace(50, 80, 40)))
        with pytest.raises(ValidationError):
            build_windows([panel, panel], FeatureSetSpec("HLOV"), 15, 3)
