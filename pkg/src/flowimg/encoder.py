"""Order-flow image encoding and walk-forward window enumeration.

Row 0 is the highest price. Green holds buy-aggressor trades, red holds
sell-aggressor trades (buyer_is_maker=True means the aggressor sold); each
trade paints a (2*pad+1)^2 square truncated at the borders, overlaps
summing. Blue holds reconstructed book depth, one unpadded pixel per level
and second. Red/green are clipped at the per-image `clip_q` nearest-rank
quantile of their nonzero pixels before normalization; blue is not clipped.
Each channel is normalized to 0..255 independently (round half up).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bookstate import BookView
from .errors import DayTooShort, InvalidConfig, WindowShapeMismatch
from .marketdata import OrderFlowWindow, SecondRecord


@dataclass(frozen=True)
class EncodingParams:
    n: int = 240            # columns (time)
    m: int = 240            # rows (price)
    t_unit: int = 1         # seconds per column
    v_unit: float = 1.0     # price per row
    pad: int = 1            # trade square half-width
    clip_q: float = 0.99
    epsilon_s: int = 10     # walk-forward stride

    def __post_init__(self) -> None:
        if self.n < 0 or self.m < 0 or self.pad < 0:
            raise InvalidConfig("n, m, pad must be non-negative")
        if self.t_unit <= 0 or self.v_unit <= 0:
            raise InvalidConfig("t_unit and v_unit must be positive")
        if not 0.0 < self.clip_q <= 1.0:
            raise InvalidConfig("clip_q must lie in (0, 1]")
        if self.epsilon_s <= 0:
            raise InvalidConfig("epsilon_s must be positive")

    @property
    def window_s(self) -> int:
        return self.n * self.t_unit

    @property
    def price_span(self) -> float:
        return self.m * self.v_unit


@dataclass(frozen=True)
class FlowImage:
    """Encoded window: post-clip pre-normalization floats plus 0..255 bytes."""

    window_start_s: int
    v0: float
    red: np.ndarray
    green: np.ndarray
    blue: np.ndarray
    norm_red: np.ndarray
    norm_green: np.ndarray
    norm_blue: np.ndarray

    def rgb_bytes(self) -> np.ndarray:
        """(m, n, 3) uint8 with channel order R, G, B."""
        return np.stack([self.norm_red, self.norm_green, self.norm_blue], axis=-1)

    def unit_tensor(self) -> np.ndarray:
        """(3, m, n) float32, each channel divided by its max (R, G, B)."""
        out = np.empty((3,) + self.red.shape, dtype=np.float32)
        for k, ch in enumerate((self.red, self.green, self.blue)):
            mx = ch.max()
            out[k] = (ch / mx) if mx > 0 else 0.0
        return out


def price_to_row(price: float, v0: float, params: EncodingParams) -> int | None:
    """Row j with price in [v0+(m-1-j)*v_unit, v0+(m-j)*v_unit); None outside."""
    off = (price - v0) / params.v_unit
    if off < 0.0 or off >= params.m:
        return None
    return params.m - 1 - int(math.floor(off))


def clip_percentile(values: np.ndarray, q: float) -> np.ndarray:
    """Cap entries above the nearest-rank q-quantile of the nonzero entries."""
    if not 0.0 < q <= 1.0:
        raise InvalidConfig("q must lie in (0, 1]")
    nz = values[values > 0.0]
    if nz.size == 0 or q == 1.0:
        return values.copy()
    rank = math.ceil(q * nz.size)            # 1-based nearest rank
    thr = np.partition(nz, rank - 1)[rank - 1]
    return np.minimum(values, thr)


def _normalize_255(x: np.ndarray) -> np.ndarray:
    mx = x.max()
    if mx <= 0.0:
        return np.zeros(x.shape, dtype=np.uint8)
    return np.floor(255.0 * x / mx + 0.5).astype(np.uint8)


def window_anchor(window: OrderFlowWindow, params: EncodingParams) -> float:
    """v0: first-second mid-price minus half the image price span."""
    return window.records[0].snapshot.mid - 0.5 * params.price_span


def encode_window(window: OrderFlowWindow, params: EncodingParams) -> FlowImage:
    records = window.records
    if len(records) != params.window_s:
        raise WindowShapeMismatch(
            f"window has {len(records)} records, expected {params.window_s}"
        )
    m, n, pad = params.m, params.n, params.pad
    v0 = window_anchor(window, params)
    hi = v0 + params.price_span

    red = np.zeros((m, n))
    green = np.zeros((m, n))
    blue = np.zeros((m, n))

    for i, rec in enumerate(records):
        col = i // params.t_unit
        for tr in rec.trades:
            row = price_to_row(tr.price, v0, params)
            if row is None:
                continue
            r0, r1 = max(0, row - pad), min(m, row + pad + 1)
            c0, c1 = max(0, col - pad), min(n, col + pad + 1)
            target = red if tr.buyer_is_maker else green
            target[r0:r1, c0:c1] += tr.size

        view: BookView = window.book_states[i]
        prices, sizes = view.in_range(v0, hi)
        if prices.size:
            rows = m - 1 - np.floor((prices - v0) / params.v_unit).astype(np.int64)
            np.add.at(blue[:, col], rows, sizes)

    red = clip_percentile(red, params.clip_q)
    green = clip_percentile(green, params.clip_q)
    for arr in (red, green, blue):
        arr.setflags(write=False)
    return FlowImage(
        window_start_s=window.start_s,
        v0=v0,
        red=red,
        green=green,
        blue=blue,
        norm_red=_normalize_255(red),
        norm_green=_normalize_255(green),
        norm_blue=_normalize_255(blue),
    )


# ---------------------------------------------------------------------------
# walk-forward enumeration


def window_count(day_seconds: int, params: EncodingParams, horizon_s: int) -> int:
    """floor((T - n*t_unit - h) / epsilon) + 1; raises DayTooShort below one."""
    usable = day_seconds - params.window_s - horizon_s
    if usable < 0:
        raise DayTooShort(
            f"day of {day_seconds}s cannot fit a {params.window_s}s window "
            f"plus a {horizon_s}s horizon"
        )
    return usable // params.epsilon_s + 1


def window_starts(
    day_start_s: int, day_seconds: int, params: EncodingParams, horizon_s: int
) -> list[int]:
    count = window_count(day_seconds, params, horizon_s)
    return [day_start_s + k * params.epsilon_s for k in range(count)]


def build_window(
    records: Sequence[SecondRecord],
    views: Sequence[BookView],
    start_s: int,
    params: EncodingParams,
) -> OrderFlowWindow:
    """Slice one window out of a day's aligned records and book views."""
    day0 = records[0].ts_s
    i0 = start_s - day0
    i1 = i0 + params.window_s
    if i0 < 0 or i1 > len(records):
        raise WindowShapeMismatch(f"window [{start_s}, +{params.window_s}) "
                                  "falls outside the day")
    recs = tuple(records[i0:i1])
    for k in range(1, len(recs)):
        if recs[k].ts_s != recs[k - 1].ts_s + 1:
            raise WindowShapeMismatch("records are not gap-free")
    return OrderFlowWindow(
        start_s=start_s,
        records=recs,
        book_states=tuple(views[i0:i1]),
    )


def walk_forward_images(
    records: Sequence[SecondRecord],
    views: Sequence[BookView],
    params: EncodingParams,
    horizon_s: int = 60,
) -> list[FlowImage]:
    """Encode every stride-epsilon_s window that leaves room for the horizon."""
    if len(records) != len(views):
        raise WindowShapeMismatch("records and views differ in length")
    day0 = records[0].ts_s
    out = []
    for start in window_starts(day0, len(records), params, horizon_s):
        out.append(encode_window(build_window(records, views, start, params), params))
    return out
