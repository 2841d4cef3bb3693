"""Tweet corpus cleaning, daily aggregation, and panel alignment.

Per-tweet sentiment labels and embedding vectors arrive precomputed; this
module turns them into business-day features and joins them with market
data into gap-free per-ticker panels.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import Iterable, Sequence

from .errors import AlignmentError, NoObservations, ParseError, ValidationError
from .market import BusinessCalendar, PriceSeries, smooth

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_CASHTAG_RE = re.compile(r"\$[A-Za-z][A-Za-z0-9]*")
_NON_ALNUM_RE = re.compile(r"[^A-Za-z0-9\s]+")
_WS_RE = re.compile(r"\s+")


@dataclass
class TweetRecord:
    tweet_id: str
    writer: str
    post_date: datetime
    ticker: str
    body: str
    sentiment: int | None = None
    embedding: list[float] | None = None

    def calendar_day(self) -> date:
        return self.post_date.date()


@dataclass
class DailyTextFeatures:
    business_day: date
    ticker: str
    n_pos: int
    n_neg: int
    score1: float
    score2: float
    mean_embedding: list[float] | None = None


@dataclass
class PanelRow:
    day: date
    high: float
    low: float
    open: float
    volume: float
    close: float
    score: float  # EWMA-smoothed score2
    score_raw: float  # forward-filled score2 before smoothing
    embedding: list[float] | None
    holiday: int
    day_of_week: int


@dataclass
class AlignedPanel:
    ticker: str
    rows: list[PanelRow]
    embedding_dim: int = 0

    def column(self, name: str) -> list[float]:
        return [getattr(row, name) for row in self.rows]

    def dates(self) -> list[date]:
        return [row.day for row in self.rows]


def clean_tweet(body: str) -> str:
    """Strip links, mentions, cashtags, and punctuation; lowercase and collapse."""
    text = _URL_RE.sub(" ", body)
    text = _MENTION_RE.sub(" ", text)
    text = _CASHTAG_RE.sub(" ", text)
    text = _NON_ALNUM_RE.sub("", text)
    return _WS_RE.sub(" ", text).strip().lower()


def _mentioned_tickers(body: str, known: dict[str, re.Pattern]) -> set[str]:
    return {ticker for ticker, pattern in known.items() if pattern.search(body)}


def filter_corpus(
    tweets: Sequence[TweetRecord], known_tickers: Iterable[str]
) -> tuple[list[TweetRecord], dict[str, int]]:
    """Drop unusable records in four stages and report counts per stage.

    Stages: missing writer, multi-ticker bodies, intra-day raw-body
    duplicates, intra-day cleaned-body duplicates.  Duplicates keep the
    earliest post.
    """
    tickers = sorted({t.upper() for t in known_tickers})
    if not tickers:
        raise ValidationError("known_tickers must be nonempty")
    patterns = {
        t: re.compile(rf"(?<![A-Za-z0-9])\$?{re.escape(t)}(?![A-Za-z0-9])", re.IGNORECASE)
        for t in tickers
    }
    stats = {
        "input": len(tweets),
        "missing_writer": 0,
        "multi_ticker": 0,
        "raw_duplicate": 0,
        "clean_duplicate": 0,
        "kept": 0,
    }

    staged = []
    for tweet in tweets:
        if not tweet.writer or not tweet.writer.strip():
            stats["missing_writer"] += 1
            continue
        if len(_mentioned_tickers(tweet.body, patterns)) >= 2:
            stats["multi_ticker"] += 1
            continue
        staged.append(tweet)

    # Earliest-first ordering; ties resolved by input position for determinism.
    staged.sort(key=lambda t: t.post_date)

    seen_raw: set[tuple[str, date, str]] = set()
    deduped = []
    for tweet in staged:
        key = (tweet.ticker, tweet.calendar_day(), tweet.body)
        if key in seen_raw:
            stats["raw_duplicate"] += 1
            continue
        seen_raw.add(key)
        deduped.append(tweet)

    seen_clean: set[tuple[str, date, str]] = set()
    kept = []
    for tweet in deduped:
        key = (tweet.ticker, tweet.calendar_day(), clean_tweet(tweet.body))
        if key in seen_clean:
            stats["clean_duplicate"] += 1
            continue
        seen_clean.add(key)
        kept.append(tweet)

    stats["kept"] = len(kept)
    return kept, stats


def sentiment_scores(n_neg: int, n_pos: int) -> tuple[float, float]:
    """Share of negatives and the neg/pos ratio (guarded at zero positives)."""
    total = n_neg + n_pos
    if total <= 0:
        raise NoObservations("no labeled tweets in this bucket")
    score1 = n_neg / total
    score2 = n_neg / max(n_pos, 1)
    return score1, score2


def aggregate_daily_text(
    tweets: Sequence[TweetRecord], calendar: BusinessCalendar
) -> list[DailyTextFeatures]:
    """Pool tweets onto business days and compute per-day scores and mean embeddings.

    Weekend and holiday posts roll forward to the next trading day; their
    embeddings pool into that day's mean.
    """
    dim: int | None = None
    buckets: dict[tuple[str, date], list[TweetRecord]] = {}
    for tweet in tweets:
        if tweet.sentiment not in (0, 1):
            raise ValidationError(f"tweet {tweet.tweet_id}: sentiment label required for aggregation")
        if tweet.embedding is not None:
            if dim is None:
                dim = len(tweet.embedding)
            elif len(tweet.embedding) != dim:
                raise ValidationError(
                    f"tweet {tweet.tweet_id}: embedding dimension {len(tweet.embedding)} != {dim}"
                )
        day = calendar.next_business_day(tweet.calendar_day())
        buckets.setdefault((tweet.ticker, day), []).append(tweet)

    out = []
    for (ticker, day), group in sorted(buckets.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        n_pos = sum(1 for t in group if t.sentiment == 1)
        n_neg = sum(1 for t in group if t.sentiment == 0)
        score1, score2 = sentiment_scores(n_neg, n_pos)
        vectors = [t.embedding for t in group if t.embedding is not None]
        mean_embedding = None
        if vectors:
            # Welford running mean: exact when all vectors coincide.
            mean_embedding = list(vectors[0])
            for count, vec in enumerate(vectors[1:], start=2):
                for j, value in enumerate(vec):
                    mean_embedding[j] += (value - mean_embedding[j]) / count
        out.append(DailyTextFeatures(day, ticker, n_pos, n_neg, score1, score2, mean_embedding))
    return out


def align_panel(
    prices: PriceSeries,
    text: Sequence[DailyTextFeatures],
    calendar: BusinessCalendar,
    smoothing_span: int = 15,
) -> AlignedPanel:
    """Join one ticker's prices and daily text features on the trading calendar.

    The covered range is the intersection of both date spans.  Days with no
    tweets carry the previous day's score and embedding forward; leading
    gaps backfill from the first observed day.  The score column is the
    EWMA of the filled raw score.
    """
    if smoothing_span < 1:
        raise ValidationError(f"smoothing_span must be >= 1, got {smoothing_span}")
    if not prices.bars or not text:
        raise AlignmentError(f"{prices.ticker}: nothing to align")
    mismatched = {f.ticker for f in text} - {prices.ticker}
    if mismatched:
        raise AlignmentError(f"text features for {sorted(mismatched)} joined against {prices.ticker}")

    start = max(prices.bars[0].date, min(f.business_day for f in text))
    end = min(prices.bars[-1].date, max(f.business_day for f in text))
    if start > end:
        raise AlignmentError(f"{prices.ticker}: price and text date ranges do not overlap")

    days = calendar.days_between(start, end)
    bars_by_day = {bar.date: bar for bar in prices.bars}
    text_by_day = {f.business_day: f for f in text}

    dim = 0
    for f in text:
        if f.mean_embedding is not None:
            dim = len(f.mean_embedding)
            break

    first_day_with_text = min(d for d in days if d in text_by_day) if any(d in text_by_day for d in days) else None
    if first_day_with_text is None:
        raise AlignmentError(f"{prices.ticker}: no text features inside the aligned range")

    raw_scores: list[float] = []
    embeddings: list[list[float] | None] = []
    last_score = text_by_day[first_day_with_text].score2
    last_embedding = None
    if dim:
        for d in days:
            feats = text_by_day.get(d)
            if feats is not None and feats.mean_embedding is not None:
                last_embedding = list(feats.mean_embedding)
                break
    for d in days:
        feats = text_by_day.get(d)
        if feats is not None:
            last_score = feats.score2
            if feats.mean_embedding is not None:
                last_embedding = list(feats.mean_embedding)
        raw_scores.append(last_score)
        embeddings.append(list(last_embedding) if last_embedding is not None else None)

    smoothed = smooth(raw_scores, "ewma", smoothing_span)

    rows = []
    for idx, d in enumerate(days):
        bar = bars_by_day.get(d)
        if bar is None:
            raise AlignmentError(f"{prices.ticker}: missing price bar on business day {d.isoformat()}")
        rows.append(
            PanelRow(
                day=d,
                high=bar.high,
                low=bar.low,
                open=bar.open,
                volume=bar.volume,
                close=bar.close,
                score=smoothed[idx],
                score_raw=raw_scores[idx],
                embedding=embeddings[idx],
                holiday=int(calendar.follows_holiday(d)),
                day_of_week=d.weekday(),
            )
        )
    return AlignedPanel(ticker=prices.ticker, rows=rows, embedding_dim=dim)


# ---------------------------------------------------------------------------
# File formats


def load_tweets_csv(path: Path | str) -> list[TweetRecord]:
    """Read `tweet_id,writer,post_date,ticker,body,sentiment` rows."""
    path = Path(path)
    expected = ("tweet_id", "writer", "post_date", "ticker", "body", "sentiment")
    out = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != expected:
            raise ParseError(f"{path}:1: expected header {','.join(expected)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(expected):
                raise ParseError(f"{path}:{lineno}: expected {len(expected)} fields, got {len(row)}")
            try:
                post_date = datetime.fromisoformat(row[2])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad post_date {row[2]!r}") from exc
            raw_sentiment = row[5].strip()
            sentiment: int | None = None
            if raw_sentiment:
                if raw_sentiment not in ("0", "1"):
                    raise ParseError(f"{path}:{lineno}: sentiment must be blank, 0, or 1")
                sentiment = int(raw_sentiment)
            out.append(
                TweetRecord(
                    tweet_id=row[0],
                    writer=row[1],
                    post_date=post_date,
                    ticker=row[3].upper(),
                    body=row[4],
                    sentiment=sentiment,
                )
            )
    return out


def write_tweets_csv(path: Path | str, tweets: Sequence[TweetRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(("tweet_id", "writer", "post_date", "ticker", "body", "sentiment"))
        for t in tweets:
            label = "" if t.sentiment is None else str(t.sentiment)
            writer.writerow((t.tweet_id, t.writer, t.post_date.isoformat(sep=" "), t.ticker, t.body, label))


def load_embeddings_csv(path: Path | str) -> dict[str, list[float]]:
    """Read `tweet_id,v0,...,v{d-1}`; the column count declares d."""
    path = Path(path)
    out: dict[str, list[float]] = {}
    dim: int | None = None
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if not header or header[0].strip() != "tweet_id" or len(header) < 2:
            raise ParseError(f"{path}:1: expected header tweet_id,v0,...")
        dim = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != dim + 1:
                raise ParseError(f"{path}:{lineno}: expected {dim + 1} fields, got {len(row)}")
            try:
                vector = [float(cell) for cell in row[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if any(not math.isfinite(v) for v in vector):
                raise ValidationError(f"{path}:{lineno}: non-finite embedding value")
            out[row[0]] = vector
    return out


def attach_embeddings(tweets: Sequence[TweetRecord], vectors: dict[str, list[float]]) -> int:
    """Set each tweet's embedding from the lookup; returns how many matched."""
    matched = 0
    for tweet in tweets:
        vec = vectors.get(tweet.tweet_id)
        if vec is not None:
            tweet.embedding = list(vec)
            matched += 1
    return matched


def write_panel_csv(path: Path | str, panel: AlignedPanel) -> None:
    header = ["date", "high", "low", "open", "volume", "close", "score", "score_raw", "holiday", "dow"]
    header += [f"e{i}" for i in range(panel.embedding_dim)]
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in panel.rows:
            record = [
                row.day.isoformat(),
                repr(row.high),
                repr(row.low),
                repr(row.open),
                repr(row.volume),
                repr(row.close),
                repr(row.score),
                repr(row.score_raw),
                str(row.holiday),
                str(row.day_of_week),
            ]
            if panel.embedding_dim:
                vec = row.embedding if row.embedding is not None else [0.0] * panel.embedding_dim
                record += [repr(v) for v in vec]
            writer.writerow(record)


def read_panel_csv(path: Path | str, ticker: str) -> AlignedPanel:
    path = Path(path)
    rows = []
    dim = 0
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        base = ["date", "high", "low", "open", "volume", "close", "score", "score_raw", "holiday", "dow"]
        if header[: len(base)] != base:
            raise ParseError(f"{path}:1: unexpected panel header")
        dim = len(header) - len(base)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                embedding = [float(v) for v in row[len(base) :]] if dim else None
                rows.append(
                    PanelRow(
                        day=date.fromisoformat(row[0]),
                        high=float(row[1]),
                        low=float(row[2]),
                        open=float(row[3]),
                        volume=float(row[4]),
                        close=float(row[5]),
                        score=float(row[6]),
                        score_raw=float(row[7]),
                        embedding=embedding,
                        holiday=int(row[8]),
                        day_of_week=int(row[9]),
                    )
                )
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return AlignedPanel(ticker=ticker, rows=rows, embedding_dim=dim)
