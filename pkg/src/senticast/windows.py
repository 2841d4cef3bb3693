"""Sliding-window construction over aligned panels with leak-free scaling.

Windows from every company are pooled into one multi-series training set;
normalization statistics are fitted on each company's training rows only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .errors import ConfigError, ValidationError
from .text import AlignedPanel

FEATURE_SET_KINDS = ("HLOV", "HLOVS", "HLOVE")
BASE_COLUMNS = ("high", "low", "open", "volume", "close")
KNOWN_DIM = 6  # holiday flag + day-of-week one-hot
CLOSE_COLUMN = BASE_COLUMNS.index("close")


@dataclass(frozen=True)
class FeatureSetSpec:
    kind: str
    embedding_dim: int = 0

    def __post_init__(self) -> None:
        if self.kind not in FEATURE_SET_KINDS:
            raise ConfigError(f"unknown feature set {self.kind!r}; expected one of {FEATURE_SET_KINDS}")
        if self.kind == "HLOVE" and self.embedding_dim < 1:
            raise ConfigError("HLOVE needs a positive embedding dimension")

    @property
    def columns(self) -> list[str]:
        cols = list(BASE_COLUMNS)
        if self.kind == "HLOVS":
            cols.append("score")
        elif self.kind == "HLOVE":
            cols += [f"e{i}" for i in range(self.embedding_dim)]
        return cols

    @property
    def feature_count(self) -> int:
        return len(self.columns)


@dataclass
class WindowSample:
    company_index: int
    past: np.ndarray  # (lookback, features), normalized
    known_future: np.ndarray  # (horizon, KNOWN_DIM)
    target: np.ndarray  # (horizon,), normalized close
    anchor_close: float  # last observed normalized close
    target_days: list[date] = field(default_factory=list)
    anchor_day: date | None = None


@dataclass
class Normalizer:
    """Per-company column statistics fitted on training rows."""

    tickers: list[str]
    columns: list[str]
    means: np.ndarray  # (companies, features)
    stds: np.ndarray  # (companies, features)
    train_rows: list[int]

    @property
    def close_index(self) -> int:
        return self.columns.index("close")

    def normalize(self, company: int, matrix: np.ndarray) -> np.ndarray:
        return (matrix - self.means[company]) / self.stds[company]

    def denormalize_close(self, company: int, values: np.ndarray) -> np.ndarray:
        idx = self.close_index
        return np.asarray(values) * self.stds[company][idx] + self.means[company][idx]

    def normalize_close(self, company: int, values: np.ndarray) -> np.ndarray:
        idx = self.close_index
        return (np.asarray(values) - self.means[company][idx]) / self.stds[company][idx]

    def to_dict(self) -> dict:
        return {
            "tickers": list(self.tickers),
            "columns": list(self.columns),
            "means": [[float(v) for v in row] for row in self.means],
            "stds": [[float(v) for v in row] for row in self.stds],
            "train_rows": list(self.train_rows),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Normalizer":
        return cls(
            tickers=list(data["tickers"]),
            columns=list(data["columns"]),
            means=np.asarray(data["means"], dtype=np.float64),
            stds=np.asarray(data["stds"], dtype=np.float64),
            train_rows=[int(v) for v in data["train_rows"]],
        )


def panel_matrix(panel: AlignedPanel, spec: FeatureSetSpec) -> np.ndarray:
    """Panel rows as a (T, features) array in the spec's column order."""
    rows = []
    for row in panel.rows:
        values = [row.high, row.low, row.open, row.volume, row.close]
        if spec.kind == "HLOVS":
            values.append(row.score)
        elif spec.kind == "HLOVE":
            if row.embedding is None:
                raise ConfigError(f"{panel.ticker}: HLOVE requested but panel has no embeddings")
            if len(row.embedding) != spec.embedding_dim:
                raise ConfigError(
                    f"{panel.ticker}: embedding dim {len(row.embedding)} != spec {spec.embedding_dim}"
                )
            values += row.embedding
        rows.append(values)
    return np.asarray(rows, dtype=np.float64)


def known_future_matrix(panel: AlignedPanel) -> np.ndarray:
    out = np.zeros((len(panel.rows), KNOWN_DIM))
    for t, row in enumerate(panel.rows):
        out[t, 0] = row.holiday
        out[t, 1 + row.day_of_week] = 1.0
    return out


def fit_normalizer(
    panels: list[AlignedPanel], spec: FeatureSetSpec, lookback: int, horizon: int, split: float
) -> Normalizer:
    """Per-company column mean/std over the training rows only."""
    if lookback < 1 or horizon < 1:
        raise ValidationError(f"lookback and horizon must be >= 1, got {lookback}, {horizon}")
    if not 0.0 < split <= 1.0:
        raise ValidationError(f"split must be in (0, 1], got {split}")
    if not panels:
        raise ValidationError("no panels supplied")
    tickers = [panel.ticker for panel in panels]
    if len(set(tickers)) != len(tickers):
        raise ValidationError(f"duplicate tickers in panels: {tickers}")

    means, stds, train_rows = [], [], []
    for panel in panels:
        T = len(panel.rows)
        if T < lookback + horizon:
            raise ValidationError(
                f"{panel.ticker}: panel of {T} rows is too short for lookback {lookback} + horizon {horizon}"
            )
        matrix = panel_matrix(panel, spec)
        split_at = T if split == 1.0 else int(split * T)
        if split_at < 2:
            raise ValidationError(f"{panel.ticker}: split leaves {split_at} training rows")
        head = matrix[:split_at]
        mean = head.mean(axis=0)
        std = head.std(axis=0)
        std[std < 1e-12] = 1.0
        means.append(mean)
        stds.append(std)
        train_rows.append(split_at)

    return Normalizer(
        tickers=tickers,
        columns=spec.columns,
        means=np.asarray(means),
        stds=np.asarray(stds),
        train_rows=train_rows,
    )


def windows_from_normalizer(
    panels: list[AlignedPanel],
    spec: FeatureSetSpec,
    normalizer: Normalizer,
    lookback: int,
    horizon: int,
) -> tuple[list[WindowSample], list[WindowSample]]:
    """Slide stride-1 windows using previously fitted statistics."""
    if [p.ticker for p in panels] != normalizer.tickers:
        raise ValidationError(
            f"panels {[p.ticker for p in panels]} do not match normalizer tickers {normalizer.tickers}"
        )
    train, test = [], []
    close_idx = normalizer.close_index
    for company, panel in enumerate(panels):
        z = normalizer.normalize(company, panel_matrix(panel, spec))
        known = known_future_matrix(panel)
        days = panel.dates()
        T = len(panel.rows)
        split_at = normalizer.train_rows[company]
        for i in range(lookback - 1, T - horizon):
            sample = WindowSample(
                company_index=company,
                past=z[i - lookback + 1 : i + 1],
                known_future=known[i + 1 : i + 1 + horizon],
                target=z[i + 1 : i + 1 + horizon, close_idx],
                anchor_close=float(z[i, close_idx]),
                target_days=days[i + 1 : i + 1 + horizon],
                anchor_day=days[i],
            )
            if i + horizon <= split_at - 1:
                train.append(sample)
            elif i + 1 >= split_at:
                test.append(sample)
    return train, test


def build_windows(
    panels: list[AlignedPanel],
    spec: FeatureSetSpec,
    lookback: int,
    horizon: int,
    split: float = 0.8,
) -> tuple[list[WindowSample], list[WindowSample], Normalizer]:
    """Stride-1 windows per company, pooled, with a chronological train/test split.

    Train windows have every target row before the split point; test windows
    have every target row at or after it (their lookback may reach into
    history).  split=1.0 puts everything in train.
    """
    normalizer = fit_normalizer(panels, spec, lookback, horizon, split)
    train, test = windows_from_normalizer(panels, spec, normalizer, lookback, horizon)
    return train, test, normalizer
