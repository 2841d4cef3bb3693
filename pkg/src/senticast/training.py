"""Seeded training loop with multi-series batching, plus grid search."""

from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, SenticastError, TrainingError, ValidationError
from .losses import dmse_loss_batch, mse_loss_batch
from .models import NLinear, TftLite, TrainConfig
from .nn.autograd import no_grad, zero_grads
from .nn.optim import adam_step
from .text import AlignedPanel
from .windows import CLOSE_COLUMN, FeatureSetSpec, WindowSample, build_windows

log = logging.getLogger(__name__)

MODEL_KINDS = ("nlinear", "tft_lite")


@dataclass
class WindowArrays:
    past: np.ndarray
    known: np.ndarray
    company: np.ndarray
    target: np.ndarray
    anchor: np.ndarray

    def __len__(self) -> int:
        return self.past.shape[0]

    def take(self, indices: np.ndarray) -> "WindowArrays":
        return WindowArrays(
            self.past[indices],
            self.known[indices],
            self.company[indices],
            self.target[indices],
            self.anchor[indices],
        )


def stack_windows(windows: Sequence[WindowSample]) -> WindowArrays:
    if not windows:
        raise ValidationError("no windows to stack")
    return WindowArrays(
        past=np.stack([w.past for w in windows]),
        known=np.stack([w.known_future for w in windows]),
        company=np.asarray([w.company_index for w in windows], dtype=np.int64),
        target=np.stack([w.target for w in windows]),
        anchor=np.asarray([w.anchor_close for w in windows]),
    )


def build_model(
    kind: str,
    config: TrainConfig,
    n_features: int,
    n_companies: int,
    rng: np.random.Generator,
    close_col: int = CLOSE_COLUMN,
):
    if kind == "nlinear":
        return NLinear(
            config.lookback, config.horizon, close_col, rng, const_init=config.nlinear_const_init
        )
    if kind == "tft_lite":
        return TftLite(config, n_features, n_companies, rng)
    raise ConfigError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def train_model(
    model_kind: str,
    windows: Sequence[WindowSample],
    config: TrainConfig,
    loss: str = "dmse",
    n_companies: int | None = None,
):
    """Train a fresh model of the given kind; returns (model, per-epoch mean loss).

    All randomness (init, shuffling, dropout) derives from config.seed.
    """
    config.validate()
    if loss not in ("dmse", "mse"):
        raise ConfigError(f"loss must be dmse or mse, got {loss!r}")
    if not windows:
        raise ValidationError("training set is empty")

    arrays = stack_windows(windows)
    if n_companies is None:
        n_companies = int(arrays.company.max()) + 1
    init_rng, shuffle_rng, dropout_rng = [
        np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(3)
    ]
    model = build_model(model_kind, config, arrays.past.shape[2], n_companies, init_rng)
    params = model.parameters()

    total = len(arrays)
    curve: list[float] = []
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(total)
        epoch_loss = 0.0
        for start in range(0, total, config.batch_size):
            batch_idx = order[start : start + config.batch_size]
            batch = arrays.take(batch_idx)
            pred = model.forward_batch(
                batch.past, batch.known, batch.company, training=True, rng=dropout_rng
            )
            if loss == "dmse":
                loss_t = dmse_loss_batch(pred, batch.target, batch.anchor, config.dmse_alpha)
            else:
                loss_t = mse_loss_batch(pred, batch.target)
            value = loss_t.item()
            if not np.isfinite(value):
                raise TrainingError(
                    f"non-finite training loss at epoch {epoch}, batch {start // config.batch_size}"
                )
            zero_grads(params)
            loss_t.backward()
            adam_step(params, config.learning_rate, config.beta1, config.beta2, config.adam_eps)
            epoch_loss += value * len(batch_idx)
        curve.append(epoch_loss / total)
    return model, curve


def predict_windows(model, windows: Sequence[WindowSample], chunk: int = 512) -> np.ndarray:
    """Eval-mode predictions, (n_windows, horizon), in normalized units."""
    arrays = stack_windows(windows)
    outputs = []
    with no_grad():
        for start in range(0, len(arrays), chunk):
            batch = arrays.take(np.arange(start, min(start + chunk, len(arrays))))
            outputs.append(
                model.forward_batch(batch.past, batch.known, batch.company, training=False).data
            )
    return np.concatenate(outputs, axis=0)


def _mape_rmse(truth: np.ndarray, pred: np.ndarray) -> tuple[float, float]:
    if np.any(truth == 0):
        raise ValidationError("validation truth contains zeros; MAPE undefined")
    mape = 100.0 * float(np.mean(np.abs((truth - pred) / truth)))
    rmse = float(np.sqrt(np.mean((truth - pred) ** 2)))
    return mape, rmse


@dataclass
class GridPoint:
    index: int
    model_kind: str
    overrides: dict
    config: TrainConfig
    status: str = "ok"
    val_mape: float = float("nan")
    val_rmse: float = float("nan")


@dataclass
class GridSearchResult:
    best: GridPoint
    leaderboard: list[GridPoint] = field(default_factory=list)


def _validation_split(
    windows: Sequence[WindowSample], fraction: float
) -> tuple[list[WindowSample], list[WindowSample]]:
    """Chronological tail of each company's windows becomes validation."""
    by_company: dict[int, list[WindowSample]] = {}
    for w in windows:
        by_company.setdefault(w.company_index, []).append(w)
    fit, val = [], []
    for company in sorted(by_company):
        group = by_company[company]
        n_val = max(1, int(round(fraction * len(group))))
        if n_val >= len(group):
            raise ValidationError(f"company {company}: validation fraction leaves no fit windows")
        fit += group[: len(group) - n_val]
        val += group[len(group) - n_val :]
    return fit, val


def grid_search(
    space: dict[str, list],
    panels: list[AlignedPanel],
    spec: FeatureSetSpec,
    validation_fraction: float,
    base_config: TrainConfig | None = None,
    model_kind: str = "tft_lite",
    split: float = 0.8,
    loss: str = "dmse",
    jobs: int = 1,
) -> GridSearchResult:
    """Train one model per grid point; rank by validation MAPE, then RMSE, then order.

    A failed training run marks its point instead of aborting the search.
    The key "model" may appear in the space to vary the model kind.  Points
    run on up to `jobs` threads; results are assembled in grid order.
    """
    if not space or any(len(v) == 0 for v in space.values()):
        raise ValidationError("grid space must be a nonempty Cartesian product")
    if not 0.0 < validation_fraction < 1.0:
        raise ValidationError(f"validation fraction must be in (0, 1), got {validation_fraction}")
    base = base_config if base_config is not None else TrainConfig()

    keys = list(space)
    points: list[GridPoint] = []
    for index, values in enumerate(itertools.product(*(space[k] for k in keys))):
        overrides = dict(zip(keys, values))
        kind = overrides.pop("model", model_kind)
        try:
            config = replace(base, **overrides)
            config.validate()
        except (TypeError, ConfigError) as exc:
            points.append(
                GridPoint(index, kind, dict(zip(keys, values)), base, status=f"failed: {exc}")
            )
            continue
        points.append(GridPoint(index, kind, dict(zip(keys, values)), config))

    def run_point(point: GridPoint) -> None:
        if point.status != "ok":
            return
        try:
            train, _, normalizer = build_windows(
                panels, spec, point.config.lookback, point.config.horizon, split
            )
            fit, val = _validation_split(train, validation_fraction)
            model, _ = train_model(
                point.model_kind, fit, point.config, loss=loss, n_companies=len(panels)
            )
            pred_n = predict_windows(model, val)
            truths, preds = [], []
            for row, sample in zip(pred_n, val):
                truths.append(normalizer.denormalize_close(sample.company_index, sample.target))
                preds.append(normalizer.denormalize_close(sample.company_index, row))
            point.val_mape, point.val_rmse = _mape_rmse(
                np.concatenate(truths), np.concatenate(preds)
            )
        except (SenticastError, FloatingPointError, np.linalg.LinAlgError) as exc:
            point.status = f"failed: {exc}"
            log.warning("grid point %d failed: %s", point.index, exc)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(run_point, points))
    else:
        for point in points:
            run_point(point)

    ranked = sorted(
        (p for p in points if p.status == "ok"),
        key=lambda p: (p.val_mape, p.val_rmse, p.index),
    )
    if not ranked:
        raise TrainingError("every grid point failed")
    leaderboard = ranked + [p for p in points if p.status != "ok"]
    return GridSearchResult(best=ranked[0], leaderboard=leaderboard)
