#!/usr/bin/env python3
"""Regenerate the bundled synthetic pipeline fixture under tests/fixtures/pipeline.

Two tickers with a latent daily mood process: the mood drives next-day
returns, tweet sentiment labels, and tweet embeddings, so every pipeline
stage has real signal to find.  The corpus deliberately contains weekend
posts, duplicate bodies, multi-ticker bodies, and blank writers to give
the preprocess stage something to remove.
"""

from __future__ import annotations

import csv
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "pipeline"
TICKERS = ("AAA", "BBB")
HOLIDAYS = (date(2020, 7, 3), date(2020, 12, 25))
START = date(2020, 1, 6)
END = date(2020, 12, 31)
EMBED_DIM = 8

POSITIVE_PHRASES = [
    "earnings beat expectations big time",
    "strong quarter ahead for this one",
    "loving the momentum here",
    "solid guidance from management today",
    "breakout looks real to me",
    "adding more on this dip",
]
NEGATIVE_PHRASES = [
    "guidance cut again this quarter",
    "weak demand showing up in numbers",
    "trimming my position here",
    "this selloff has more room",
    "margins getting squeezed hard",
    "chart looks broken to me",
]
DECORATIONS = ["", " https://t.co/{}", " @trader{}", " check www.chart.example/{}"]


def business_days() -> list[date]:
    days = []
    day = START
    while day <= END:
        if day.weekday() < 5 and day not in HOLIDAYS:
            days.append(day)
        day += timedelta(days=1)
    return days


def main() -> None:
    rng = np.random.default_rng(20200106)
    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    (FIXTURE_DIR / "ohlcv").mkdir(exist_ok=True)

    days = business_days()
    all_days = [START + timedelta(days=i) for i in range((END - START).days + 1)]

    # latent mood per ticker on calendar days
    moods: dict[str, dict[date, float]] = {}
    for t_idx, ticker in enumerate(TICKERS):
        mood = 0.0
        series = {}
        for day in all_days:
            mood = 0.9 * mood + rng.normal(0, 0.25)
            series[day] = mood
        moods[ticker] = series

    # prices: next-day return follows the latest business-day mood
    for t_idx, ticker in enumerate(TICKERS):
        close = 80.0 + 40.0 * t_idx
        rows = []
        for day in days:
            ret = 0.012 * np.tanh(moods[ticker][day]) + rng.normal(0, 0.006)
            close *= 1.0 + ret
            spread_hi = abs(rng.normal(0, 0.006))
            spread_lo = abs(rng.normal(0, 0.006))
            open_px = close * (1.0 + rng.normal(0, 0.003))
            high = max(open_px, close) * (1.0 + spread_hi)
            low = min(open_px, close) * (1.0 - spread_lo)
            volume = float(np.round(1e6 * (1.0 + 0.5 * abs(moods[ticker][day]) + 0.1 * rng.random())))
            rows.append(
                (
                    day.isoformat(),
                    f"{open_px:.4f}",
                    f"{high:.4f}",
                    f"{low:.4f}",
                    f"{close:.4f}",
                    f"{close:.4f}",
                    f"{volume:.0f}",
                )
            )
        with (FIXTURE_DIR / "ohlcv" / f"{ticker}.csv").open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(("date", "open", "high", "low", "close", "adj_close", "volume"))
            writer.writerows(rows)

    # tweets + embeddings
    directions = {ticker: rng.normal(size=EMBED_DIM) for ticker in TICKERS}
    for ticker in TICKERS:
        directions[ticker] /= np.linalg.norm(directions[ticker])

    tweet_rows = []
    embed_rows = []
    tweet_id = 0
    for ticker in TICKERS:
        for day in all_days:
            n_tweets = int(rng.integers(2, 6))
            mood = moods[ticker][day]
            p_positive = 1.0 / (1.0 + np.exp(-2.0 * mood))
            for _ in range(n_tweets):
                tweet_id += 1
                label = int(rng.random() < p_positive)
                phrase = rng.choice(POSITIVE_PHRASES if label else NEGATIVE_PHRASES)
                deco = rng.choice(DECORATIONS).format(tweet_id)
                body = f"${ticker} {phrase}{deco}"
                stamp = datetime(day.year, day.month, day.day, int(rng.integers(8, 20)), int(rng.integers(0, 60)))
                writer_name = f"user{int(rng.integers(1, 400))}"
                tweet_rows.append((str(tweet_id), writer_name, stamp.isoformat(sep=" "), ticker, body, str(label)))
                if rng.random() < 0.92:
                    vector = directions[ticker] * (2.0 * label - 1.0) * 0.9 + rng.normal(0, 0.45, EMBED_DIM)
                    embed_rows.append((str(tweet_id), *(f"{v:.6f}" for v in vector)))

    # noise records the preprocess stage must drop
    noise_day = date(2020, 3, 10)
    tweet_rows.append(("900001", "dupbot", "2020-03-10 09:00:00", "AAA", "$AAA same words every time", "1"))
    tweet_rows.append(("900002", "dupbot", "2020-03-10 15:00:00", "AAA", "$AAA same words every time", "1"))
    tweet_rows.append(("900003", "shouter", "2020-03-11 10:00:00", "AAA", "$AAA and $BBB both moving today", "0"))
    tweet_rows.append(("900004", "", "2020-03-12 10:00:00", "BBB", "$BBB orphaned account post", "1"))
    tweet_rows.append(("900005", "caser", "2020-03-13 09:00:00", "BBB", "$BBB Big Rally Coming", "1"))
    tweet_rows.append(("900006", "caser2", "2020-03-13 11:00:00", "BBB", "$BBB big rally coming!!", "1"))

    order = sorted(range(len(tweet_rows)), key=lambda i: tweet_rows[i][2])
    with (FIXTURE_DIR / "tweets.csv").open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("tweet_id", "writer", "post_date", "ticker", "body", "sentiment"))
        writer.writerows(tweet_rows[i] for i in order)

    with (FIXTURE_DIR / "embeddings.csv").open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("tweet_id", *(f"v{i}" for i in range(EMBED_DIM))))
        writer.writerows(embed_rows)

    (FIXTURE_DIR / "holidays.txt").write_text(
        "\n".join(d.isoformat() for d in HOLIDAYS) + "\n"
    )

    (FIXTURE_DIR / "config.cfg").write_text(
        "\n".join(
            [
                "# bundled synthetic two-ticker fixture",
                "paths.ohlcv_dir = ohlcv",
                "paths.tweets = tweets.csv",
                "paths.embeddings = embeddings.csv",
                "paths.holidays = holidays.txt",
                "paths.output = out",
                "tickers = AAA,BBB",
                "feature_set = HLOVS",
                "seed = 7",
                "smoothing_span = 15",
                "split = 0.8",
                "analysis.atr_period = 14",
                "gridsearch.validation_fraction = 0.25",
                "train.model = tft_lite",
                "train.loss = dmse",
                "train.lookback = 15",
                "train.horizon = 3",
                "train.hidden_size = 16",
                "train.n_heads = 2",
                "train.hidden_continuous_size = 8",
                "train.dropout = 0.1",
                "train.batch_size = 32",
                "train.epochs = 3",
                "grid.lookback = 5,15",
                "grid.model = nlinear",
            ]
        )
        + "\n"
    )
    print(f"fixture written to {FIXTURE_DIR}: {len(tweet_rows)} tweets, {len(embed_rows)} embeddings, {len(days)} trading days")


if __name__ == "__main__":
    main()
