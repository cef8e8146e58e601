"""Realized-volatility labels, samples, and time-ordered splits.

A label for a window [start, start+W) is the realized volatility of the
per-second vwap over the following horizon seconds [start+W, start+W+h):
h sample points, h-1 log returns, nothing at or before the window's last
second. The naive guess is the same statistic over the window's final 60
seconds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bookstate import BookView
from .encoder import EncodingParams, FlowImage, build_window, encode_window, window_starts
from .errors import DayTooShort, NonPositivePrice, TooFewSamples
from .features import FeatureCatalog, FeatureVector, compute_features
from .marketdata import SecondRecord

NAIVE_LOOKBACK_S = 60


def log_returns(
    prices: Sequence[float] | np.ndarray,
    ts: Sequence[int] | np.ndarray | None = None,
) -> np.ndarray:
    """ln(p[i+1]) - ln(p[i]); timestamps, when given, must strictly increase."""
    p = np.asarray(prices, dtype=np.float64)
    if p.size and p.min() <= 0.0:
        raise NonPositivePrice(f"min price {p.min()!r}")
    if ts is not None:
        t = np.asarray(ts)
        if t.shape != p.shape:
            raise ValueError("prices and timestamps differ in length")
        if t.size > 1 and not (np.diff(t) > 0).all():
            raise ValueError("timestamps must strictly increase")
    if p.size < 2:
        return np.empty(0)
    lp = np.log(p)
    return lp[1:] - lp[:-1]


def realized_volatility(
    prices: Sequence[float] | np.ndarray,
    ts: Sequence[int] | np.ndarray | None = None,
) -> float:
    """sqrt of the sum of squared log returns; 0 for fewer than two points."""
    r = log_returns(prices, ts)
    if r.size == 0:
        return 0.0
    return float(math.sqrt(float(np.dot(r, r))))


@dataclass(frozen=True)
class RVLabel:
    window_start_s: int
    horizon_s: int
    rv: float
    naive_rv: float


@dataclass(frozen=True)
class Sample:
    image: FlowImage
    features: FeatureVector
    label: RVLabel
    day_id: str


@dataclass(frozen=True)
class DatasetSplit:
    """Global time-ordered 3:1:1 split over the sample sequence."""

    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]

    def as_dict(self) -> dict[str, list[int]]:
        return {
            "train": list(self.train),
            "val": list(self.val),
            "test": list(self.test),
        }


def split_time_ordered(n_samples: int) -> DatasetSplit:
    """First floor(3N/5) train, next floor(N/5) validation, rest test."""
    if n_samples < 5:
        raise TooFewSamples(f"{n_samples} samples cannot split 3:1:1")
    n_train = (3 * n_samples) // 5
    n_val = n_samples // 5
    return DatasetSplit(
        train=tuple(range(0, n_train)),
        val=tuple(range(n_train, n_train + n_val)),
        test=tuple(range(n_train + n_val, n_samples)),
    )


def label_source_span(
    start_s: int, params: EncodingParams, horizon_s: int
) -> tuple[int, int]:
    """[first, last] second indices a label reads; strictly after the window."""
    end = start_s + params.window_s
    return end, end + horizon_s - 1


def label_for_window(
    vwap_by_second: dict[int, float],
    start_s: int,
    params: EncodingParams,
    horizon_s: int,
) -> RVLabel:
    end = start_s + params.window_s
    try:
        horizon = [vwap_by_second[s] for s in range(end, end + horizon_s)]
        lookback = [vwap_by_second[s]
                    for s in range(end - NAIVE_LOOKBACK_S, end)]
    except KeyError as exc:
        raise DayTooShort(
            f"window at {start_s}: no vwap for second {exc.args[0]}"
        ) from None
    return RVLabel(
        window_start_s=start_s,
        horizon_s=horizon_s,
        rv=realized_volatility(horizon),
        naive_rv=realized_volatility(lookback),
    )


def build_day_samples(
    records: Sequence[SecondRecord],
    views: Sequence[BookView],
    params: EncodingParams,
    catalog: FeatureCatalog,
    horizon_s: int = 60,
    day_id: str = "day",
) -> list[Sample]:
    """Walk-forward samples for one aligned day: image, features, label."""
    if len(records) != len(views):
        raise ValueError("records and views differ in length")
    vwap_by_second = {rec.ts_s: rec.vwap for rec in records}
    day0 = records[0].ts_s
    out: list[Sample] = []
    for start in window_starts(day0, len(records), params, horizon_s):
        # windows shorter than the naive lookback need history from before
        # the window; the day's first few starts cannot supply it
        if start - day0 + params.window_s < NAIVE_LOOKBACK_S:
            continue
        window = build_window(records, views, start, params)
        out.append(Sample(
            image=encode_window(window, params),
            features=compute_features(window, catalog),
            label=label_for_window(vwap_by_second, start, params, horizon_s),
            day_id=day_id,
        ))
    return out
