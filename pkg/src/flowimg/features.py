"""Window feature extraction.

The default catalog has exactly 393 entries: 85 per-second raw series
(20 ask prices, 20 ask sizes, 20 bid prices, 20 bid sizes, vwap,
order_count, total_size, buy_size, sell_size) summarized by mean /
population std / last / OLS slope (340), plus 53 microstructure
aggregates. Zero-variance denominators are guarded to 0 so every feature
is finite on degenerate windows.

Catalogs are versioned; a dataset build refuses to mix versions. A catalog
manifest (version + ordered feature ids) can subset or reorder the default
entries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .encoder import EncodingParams, window_anchor
from .errors import InvalidConfig, NonFiniteFeature
from .marketdata import DEPTH_LEVELS, OrderFlowWindow, SecondRecord

DEFAULT_CATALOG_VERSION = "default-1"
N_RAW_SERIES = 85
N_FEATURES = 393

_STATS = ("mean", "std", "last", "slope")

RAW_SERIES_NAMES: tuple[str, ...] = tuple(
    [f"ask_px_{i}" for i in range(1, DEPTH_LEVELS + 1)]
    + [f"ask_sz_{i}" for i in range(1, DEPTH_LEVELS + 1)]
    + [f"bid_px_{i}" for i in range(1, DEPTH_LEVELS + 1)]
    + [f"bid_sz_{i}" for i in range(1, DEPTH_LEVELS + 1)]
    + ["vwap", "order_count", "total_size", "buy_size", "sell_size"]
)

# ids of features that read only sizes/counts, never price levels; used by
# the translation-invariance property test
SIZE_ONLY_SERIES = tuple(
    name for name in RAW_SERIES_NAMES
    if name.startswith(("ask_sz", "bid_sz"))
    or name in ("order_count", "total_size", "buy_size", "sell_size")
)


@dataclass(frozen=True)
class CatalogEntry:
    feature_id: str
    description: str
    extractor: str


@dataclass(frozen=True)
class FeatureCatalog:
    entries: tuple[CatalogEntry, ...]
    version: str
    params: EncodingParams

    def __post_init__(self) -> None:
        ids = [e.feature_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise InvalidConfig("duplicate feature ids in catalog")

    def feature_ids(self) -> list[str]:
        return [e.feature_id for e in self.entries]

    def to_manifest(self) -> dict:
        return {"version": self.version, "feature_ids": self.feature_ids()}


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    catalog_version: str
    window_start_s: int


def _aggregate_entries() -> list[CatalogEntry]:
    out: list[CatalogEntry] = []

    def add(fid: str, desc: str) -> None:
        out.append(CatalogEntry(fid, desc, f"aggregate:{fid}"))

    for stat in ("mean", "std", "last"):
        add(f"spread_{stat}", f"best ask minus best bid, {stat} over window")
    for stat in ("mean", "std", "min", "max"):
        add(f"mid_ret_{stat}", f"1s mid-price log return, {stat}")
    for k in (60, 120, 240):
        add(f"rv_last_{k}s", f"realized volatility of the window's last {k}s "
                             "(clamped to the window length)")
    for d in (1, 5, 10, 20):
        for stat in ("mean", "std", "last"):
            add(f"imbalance_{d}_{stat}",
                f"book imbalance over the top {d} levels, {stat}")
    for stat in ("mean", "std", "last"):
        add(f"buy_frac_{stat}", f"buy volume share of traded volume, {stat} "
                                "(0.5 on trade-less seconds)")
    add("trade_count_slope", "OLS slope of per-second trade counts")
    for stat in ("mean", "std", "last"):
        add(f"vwap_mid_dev_{stat}", f"vwap minus mid-price, {stat}")
    for q in range(1, 5):
        add(f"rv_quarter_{q}", f"realized volatility of window quarter {q}")
    for side in ("bid", "ask"):
        for stat in ("mean", "std", "last"):
            add(f"depth_{side}_{stat}", f"total visible {side} size, {stat}")
    add("signed_volume_sum", "sum of buy volume minus sell volume")
    add("trade_size_max", "largest single trade in the window")
    add("large_trade_count", "trades above the window's nearest-rank 99th "
                             "size percentile")
    for stat in ("mean", "max"):
        add(f"time_since_trade_{stat}", f"seconds since the last trade, {stat}")
    for stat in ("mean", "std", "last"):
        add(f"book_levels_{stat}", f"book levels inside the image price range, {stat}")
    add("price_range", "max minus min vwap over the window")
    add("close_open_logret", "log return from first to last vwap")
    add("ret_skew", "skewness of 1s vwap log returns")
    add("ret_kurt", "excess kurtosis of 1s vwap log returns")
    add("trade_size_mean", "mean single-trade size over the window")
    add("trade_size_std", "population std of single-trade sizes")
    return out


def default_catalog(params: EncodingParams | None = None) -> FeatureCatalog:
    params = params if params is not None else EncodingParams()
    entries: list[CatalogEntry] = []
    for name in RAW_SERIES_NAMES:
        for stat in _STATS:
            entries.append(CatalogEntry(
                f"{name}_{stat}",
                f"per-second {name}, {stat} over window",
                f"series:{name}:{stat}",
            ))
    entries.extend(_aggregate_entries())
    assert len(entries) == N_FEATURES
    return FeatureCatalog(tuple(entries), DEFAULT_CATALOG_VERSION, params)


def catalog_from_manifest(manifest: dict, params: EncodingParams | None = None) -> FeatureCatalog:
    """Build a catalog from {version, feature_ids}; ids must be known."""
    base = default_catalog(params)
    by_id = {e.feature_id: e for e in base.entries}
    ids = manifest.get("feature_ids")
    version = manifest.get("version")
    if not ids or not version:
        raise InvalidConfig("catalog manifest needs version and feature_ids")
    unknown = [i for i in ids if i not in by_id]
    if unknown:
        raise InvalidConfig(f"unknown feature ids {unknown[:5]}")
    return FeatureCatalog(tuple(by_id[i] for i in ids), version, base.params)


# ---------------------------------------------------------------------------
# extraction


def raw_second_vector(rec: SecondRecord) -> np.ndarray:
    """The 85-dim per-second vector in catalog series order."""
    snap = rec.snapshot
    out = np.empty(N_RAW_SERIES)
    out[0:20] = [p for p, _ in snap.asks]
    out[20:40] = [z for _, z in snap.asks]
    out[40:60] = [p for p, _ in snap.bids]
    out[60:80] = [z for _, z in snap.bids]
    out[80] = rec.vwap
    out[81] = rec.order_count
    out[82] = rec.total_size
    out[83] = rec.buy_size
    out[84] = rec.sell_size
    return out


def _ols_slope(y: np.ndarray) -> np.ndarray:
    """Slope per column of y against 0..len-1; 0 when fewer than 2 rows."""
    w = y.shape[0]
    if w < 2:
        return np.zeros(y.shape[1:])
    x = np.arange(w, dtype=np.float64)
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))
    return (xc @ (y - y.mean(axis=0))) / denom


def _rv(prices: np.ndarray) -> float:
    if prices.size < 2:
        return 0.0
    r = np.diff(np.log(prices))
    return float(math.sqrt(float(np.dot(r, r))))


def _skew_kurt(r: np.ndarray) -> tuple[float, float]:
    if r.size < 2:
        return 0.0, 0.0
    m = r.mean()
    d = r - m
    m2 = float(np.mean(d * d))
    if m2 <= 0.0:
        return 0.0, 0.0
    m3 = float(np.mean(d ** 3))
    m4 = float(np.mean(d ** 4))
    return m3 / m2 ** 1.5, m4 / (m2 * m2) - 3.0


def compute_features(window: OrderFlowWindow, catalog: FeatureCatalog) -> FeatureVector:
    """Extract the catalog's features for one window, in catalog order."""
    records = window.records
    w = len(records)
    raw = np.stack([raw_second_vector(rec) for rec in records])  # (w, 85)

    values: dict[str, float] = {}

    means = raw.mean(axis=0)
    stds = raw.std(axis=0)
    lasts = raw[-1]
    slopes = _ols_slope(raw)
    for k, name in enumerate(RAW_SERIES_NAMES):
        values[f"{name}_mean"] = float(means[k])
        values[f"{name}_std"] = float(stds[k])
        values[f"{name}_last"] = float(lasts[k])
        values[f"{name}_slope"] = float(slopes[k])

    best_ask = raw[:, 0]
    best_bid = raw[:, 40]
    ask_sizes = raw[:, 20:40]
    bid_sizes = raw[:, 60:80]
    vwap = raw[:, 80]
    counts = raw[:, 81]
    buys = raw[:, 83]
    sells = raw[:, 84]

    spread = best_ask - best_bid
    values["spread_mean"] = float(spread.mean())
    values["spread_std"] = float(spread.std())
    values["spread_last"] = float(spread[-1])

    mid = 0.5 * (best_ask + best_bid)
    mid_ret = np.diff(np.log(mid)) if w >= 2 else np.empty(0)
    values["mid_ret_mean"] = float(mid_ret.mean()) if mid_ret.size else 0.0
    values["mid_ret_std"] = float(mid_ret.std()) if mid_ret.size else 0.0
    values["mid_ret_min"] = float(mid_ret.min()) if mid_ret.size else 0.0
    values["mid_ret_max"] = float(mid_ret.max()) if mid_ret.size else 0.0

    for k in (60, 120, 240):
        tail = vwap[-min(k, w):]
        values[f"rv_last_{k}s"] = _rv(tail)

    for d in (1, 5, 10, 20):
        b = bid_sizes[:, :d].sum(axis=1)
        a = ask_sizes[:, :d].sum(axis=1)
        imb = (b - a) / (b + a)
        values[f"imbalance_{d}_mean"] = float(imb.mean())
        values[f"imbalance_{d}_std"] = float(imb.std())
        values[f"imbalance_{d}_last"] = float(imb[-1])

    traded = buys + sells
    frac = np.where(traded > 0.0, buys / np.where(traded > 0.0, traded, 1.0), 0.5)
    values["buy_frac_mean"] = float(frac.mean())
    values["buy_frac_std"] = float(frac.std())
    values["buy_frac_last"] = float(frac[-1])

    values["trade_count_slope"] = float(_ols_slope(counts[:, None])[0])

    dev = vwap - mid
    values["vwap_mid_dev_mean"] = float(dev.mean())
    values["vwap_mid_dev_std"] = float(dev.std())
    values["vwap_mid_dev_last"] = float(dev[-1])

    for q in range(4):
        chunk = vwap[q * w // 4 : (q + 1) * w // 4]
        values[f"rv_quarter_{q + 1}"] = _rv(chunk)

    depth_bid = bid_sizes.sum(axis=1)
    depth_ask = ask_sizes.sum(axis=1)
    for side, series in (("bid", depth_bid), ("ask", depth_ask)):
        values[f"depth_{side}_mean"] = float(series.mean())
        values[f"depth_{side}_std"] = float(series.std())
        values[f"depth_{side}_last"] = float(series[-1])

    values["signed_volume_sum"] = float((buys - sells).sum())

    sizes = np.array([t.size for rec in records for t in rec.trades])
    values["trade_size_max"] = float(sizes.max()) if sizes.size else 0.0
    if sizes.size:
        rank = math.ceil(0.99 * sizes.size)
        thr = np.partition(sizes, rank - 1)[rank - 1]
        values["large_trade_count"] = float((sizes > thr).sum())
        values["trade_size_mean"] = float(sizes.mean())
        values["trade_size_std"] = float(sizes.std())
    else:
        values["large_trade_count"] = 0.0
        values["trade_size_mean"] = 0.0
        values["trade_size_std"] = 0.0

    tsl = np.empty(w)
    last_idx = -1
    for i in range(w):
        if counts[i] > 0:
            last_idx = i
        tsl[i] = i - last_idx  # i+1 when no trade seen yet
    values["time_since_trade_mean"] = float(tsl.mean())
    values["time_since_trade_max"] = float(tsl.max())

    v0 = window_anchor(window, catalog.params)
    hi = v0 + catalog.params.price_span
    levels = np.empty(w)
    for i, view in enumerate(window.book_states):
        prices, _ = view.in_range(v0, hi)
        levels[i] = prices.size
    values["book_levels_mean"] = float(levels.mean())
    values["book_levels_std"] = float(levels.std())
    values["book_levels_last"] = float(levels[-1])

    values["price_range"] = float(vwap.max() - vwap.min())
    values["close_open_logret"] = float(math.log(vwap[-1] / vwap[0]))

    ret1s = np.diff(np.log(vwap)) if w >= 2 else np.empty(0)
    sk, ku = _skew_kurt(ret1s)
    values["ret_skew"] = sk
    values["ret_kurt"] = ku

    vec = np.array([values[e.feature_id] for e in catalog.entries])
    bad = ~np.isfinite(vec)
    if bad.any():
        idx = int(np.argmax(bad))
        raise NonFiniteFeature(catalog.entries[idx].feature_id, float(vec[idx]))
    return FeatureVector(
        values=vec,
        catalog_version=catalog.version,
        window_start_s=window.start_s,
    )
