"""Shared builders and independent oracles for the test suite."""

from __future__ import annotations

import math
from datetime import date, timedelta

import numpy as np

from senticast.losses import directional_weights
from senticast.models import TftLite, TrainConfig
from senticast.text import AlignedPanel, PanelRow


def dmse_oracle(pred, truth, anchor, alpha=1e3) -> float:
    """Brute-force per-step directional MSE."""
    total = 0.0
    x_prev = anchor
    y_prev = anchor
    for x, y in zip(truth, pred):
        weight = 1.0 if (x - x_prev) * (y - y_prev) >= 0 else alpha
        total += weight * (x - y) ** 2
        x_prev = x
        y_prev = y
    return total / len(truth)


def spearman_oracle(x, y) -> float:
    """Explicit rank assignment plus the textbook Pearson formula."""

    def ranks(values):
        out = []
        for v in values:
            smaller = sum(1 for u in values if u < v)
            equal = sum(1 for u in values if u == v)
            out.append(smaller + (equal + 1) / 2.0)
        return out

    rx, ry = ranks(list(x)), ranks(list(y))
    n = len(rx)
    mx = sum(rx) / n
    my = sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    return cov / math.sqrt(vx * vy)


def latent_sentiment_panels(
    seed: int,
    n_companies: int = 2,
    length: int = 240,
    embed_dim: int = 16,
    drive: float = 0.04,
    return_noise: float = 0.003,
    score_noise: float = 0.05,
    embed_noise: float = 2.5,
    persistence: float = 0.8,
    innovation: float = 0.35,
    reversion: float = 0.05,
) -> list[AlignedPanel]:
    """Panels whose close dynamics follow a latent mood process.

    The score column observes the latent state with little noise; the
    embedding columns mix it into embed_dim dimensions under heavy noise.
    Mild mean reversion keeps the test region inside the training range.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 77]))
    panels = []
    for c in range(n_companies):
        direction = rng.normal(size=embed_dim)
        direction /= np.linalg.norm(direction)
        state = 0.0
        base = 100.0 * (1 + c)
        close = base
        day = date(2021, 1, 4)
        rows = []
        for _ in range(length):
            while day.weekday() >= 5:
                day += timedelta(days=1)
            score = state + rng.normal(0, score_noise)
            embedding = (state * direction + embed_noise * rng.normal(size=embed_dim)).tolist()
            high = close * (1 + abs(rng.normal(0, 0.004)))
            low = close * (1 - abs(rng.normal(0, 0.004)))
            open_px = close * (1 + rng.normal(0, 0.002))
            volume = 1e6 * (1 + 0.3 * abs(state) + 0.05 * rng.random())
            rows.append(
                PanelRow(day, high, low, open_px, volume, close, score, score, embedding, 0, day.weekday())
            )
            state = persistence * state + rng.normal(0, innovation)
            ret = drive * state + reversion * np.log(base / close) + rng.normal(0, return_noise)
            close *= 1.0 + ret
            day += timedelta(days=1)
        panels.append(AlignedPanel(f"C{c}", rows, embed_dim))
    return panels


def tft_gradcheck_fixture(seed: int, batch: int = 1):
    """Tiny TFT plus DMSE data placed at a smooth, direction-stable point.

    Truth sits a constant offset from the model's own initial prediction, so
    all directional products are decisively nonnegative and the loss is
    small enough for central differences to resolve.
    """
    cfg = TrainConfig(
        lookback=6, horizon=2, hidden_size=8, n_heads=2, hidden_continuous_size=4, dropout=0.0
    )
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]
    model = TftLite(cfg, n_features=3, n_companies=batch, rng=rngs[0])
    past = rngs[1].normal(size=(batch, 6, 3))
    known = np.zeros((batch, 2, 6))
    known[:, :, 0] = rngs[2].integers(0, 2, size=(batch, 2))
    known[:, :, 1] = 1.0
    company = np.arange(batch)
    pred0 = model.forward_batch(past, known, company, training=False).data
    truth = pred0 + 0.02
    anchor = pred0[:, 0] - 0.4
    weights = directional_weights(truth, pred0, anchor, 1e3)
    assert (weights == 1.0).all(), "fixture must sit away from the direction boundary"
    return model, past, known, company, truth, anchor
