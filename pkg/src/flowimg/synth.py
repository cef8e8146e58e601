"""Seeded synthetic trade/depth stream generator.

The price process is a per-second log random walk whose volatility and trade
intensity follow a piecewise regime schedule. Output uses the exact same
types the parsers produce, so generated streams round-trip through
serialize/parse unchanged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig
from .marketdata import DEPTH_LEVELS, LobSnapshot, Trade

# Sizes are quantized to 2^-10 so that volume sums are exactly representable
# in float64 regardless of summation order.
SIZE_STEP = 1.0 / 1024.0


@dataclass(frozen=True)
class RegimeSpec:
    """One volatility regime segment."""

    duration_s: int
    sigma: float            # per-second log-return std
    trades_per_s: float     # Poisson intensity
    mean_trade_size: float = 1.0
    depth_scale: float = 1.0


@dataclass(frozen=True)
class SynthConfig:
    regimes: tuple[RegimeSpec, ...]
    base_price: float = 29000.0
    start_ts_s: int = 0
    tick: float = 1.0
    spread_ticks: int = 2
    depth_base: float = 50.0
    depth_slope: float = 0.05       # per-level size growth
    snapshot_every_s: int = 1
    price_jitter: float = 0.5       # trade price noise, in units of sigma
    deterministic: bool = False     # alternating +/- sigma, fixed trade grid

    @property
    def duration_s(self) -> int:
        return sum(r.duration_s for r in self.regimes)


def _validate(cfg: SynthConfig) -> None:
    if not cfg.regimes:
        raise InvalidConfig("at least one regime required")
    for r in cfg.regimes:
        if r.duration_s <= 0:
            raise InvalidConfig(f"non-positive regime duration {r.duration_s}")
        if r.trades_per_s <= 0:
            raise InvalidConfig(f"non-positive intensity {r.trades_per_s}")
        if r.sigma < 0:
            raise InvalidConfig(f"negative sigma {r.sigma}")
        if r.mean_trade_size <= 0:
            raise InvalidConfig(f"non-positive trade size {r.mean_trade_size}")
        if r.depth_scale <= 0:
            raise InvalidConfig(f"non-positive depth scale {r.depth_scale}")
    if cfg.base_price <= 0:
        raise InvalidConfig("non-positive base price")
    if cfg.tick <= 0:
        raise InvalidConfig("non-positive tick")
    if cfg.spread_ticks < 1:
        raise InvalidConfig("spread must be at least one tick")
    if cfg.depth_base <= 0:
        raise InvalidConfig("non-positive depth base")
    if cfg.snapshot_every_s < 1:
        raise InvalidConfig("snapshot cadence must be >= 1 s")


def _quantize_size(x: np.ndarray | float) -> np.ndarray | float:
    q = np.round(np.asarray(x) / SIZE_STEP) * SIZE_STEP
    return np.maximum(q, SIZE_STEP)


def gen_synthetic_flow(
    cfg: SynthConfig, seed: int
) -> tuple[list[Trade], list[LobSnapshot]]:
    """Generate one day of trades and snapshots; byte-identical per seed."""
    _validate(cfg)
    rng = np.random.default_rng(seed)
    total = cfg.duration_s

    sigma = np.empty(total)
    intensity = np.empty(total)
    mean_size = np.empty(total)
    depth_scale = np.empty(total)
    pos = 0
    for r in cfg.regimes:
        sl = slice(pos, pos + r.duration_s)
        sigma[sl] = r.sigma
        intensity[sl] = r.trades_per_s
        mean_size[sl] = r.mean_trade_size
        depth_scale[sl] = r.depth_scale
        pos += r.duration_s

    if cfg.deterministic:
        z = np.where(np.arange(total) % 2 == 0, 1.0, -1.0)
    else:
        z = rng.standard_normal(total)
    logp = math.log(cfg.base_price) + np.concatenate(
        [[0.0], np.cumsum(sigma[1:] * z[1:])]
    )
    mid = np.exp(logp)

    if cfg.deterministic:
        counts = np.maximum(np.rint(intensity), 1).astype(np.int64)
    else:
        counts = rng.poisson(intensity)
    n_trades = int(counts.sum())
    if cfg.deterministic:
        jitter = np.zeros(n_trades)
        makers = np.arange(n_trades) % 2 == 0
        raw_sizes = np.repeat(mean_size, counts)
    else:
        jitter = rng.uniform(-1.0, 1.0, size=n_trades)
        makers = rng.random(n_trades) < 0.5
        raw_sizes = rng.lognormal(mean=0.0, sigma=0.6, size=n_trades) \
            * np.repeat(mean_size, counts)
    sizes = _quantize_size(raw_sizes)

    sec_of_trade = np.repeat(np.arange(total), counts)
    if cfg.deterministic:
        # evenly spaced inside the second, never on the boundary
        offs = np.concatenate([
            (np.arange(k) + 1) * (1000 // (k + 1)) for k in counts
        ]) if n_trades else np.empty(0, dtype=np.int64)
    else:
        offs = rng.integers(0, 1000, size=n_trades)
    order = np.lexsort((offs, sec_of_trade))

    trade_sigma = sigma[sec_of_trade]
    prices = mid[sec_of_trade] * np.exp(cfg.price_jitter * trade_sigma * jitter)

    base_s = cfg.start_ts_s
    trades = [
        Trade(
            ts_ms=int((base_s + sec_of_trade[i]) * 1000 + offs[i]),
            price=float(prices[i]),
            size=float(sizes[i]),
            buyer_is_maker=bool(makers[i]),
        )
        for i in order
    ]

    snapshots: list[LobSnapshot] = []
    level_idx = np.arange(DEPTH_LEVELS)
    for s in range(0, total, cfg.snapshot_every_s):
        half = 0.5 * cfg.spread_ticks * cfg.tick
        b1 = math.floor((mid[s] - half) / cfg.tick) * cfg.tick
        a1 = b1 + cfg.spread_ticks * cfg.tick
        bid_px = b1 - level_idx * cfg.tick
        ask_px = a1 + level_idx * cfg.tick
        base = cfg.depth_base * depth_scale[s] * (1.0 + cfg.depth_slope * level_idx)
        if cfg.deterministic:
            noise_b = noise_a = np.ones(DEPTH_LEVELS)
        else:
            noise_b = np.exp(0.3 * rng.standard_normal(DEPTH_LEVELS))
            noise_a = np.exp(0.3 * rng.standard_normal(DEPTH_LEVELS))
        bid_sz = _quantize_size(base * noise_b)
        ask_sz = _quantize_size(base * noise_a)
        snapshots.append(LobSnapshot(
            ts_ms=(base_s + s) * 1000,
            bids=tuple((float(p), float(z)) for p, z in zip(bid_px, bid_sz)),
            asks=tuple((float(p), float(z)) for p, z in zip(ask_px, ask_sz)),
        ))
    return trades, snapshots


def two_regime_config(
    sigma_low: float = 1e-4,
    sigma_high: float = 1e-3,
    duration_s: int = 600,
    trades_per_s: float = 5.0,
) -> SynthConfig:
    """Convenience config: one low-vol and one high-vol segment."""
    return SynthConfig(regimes=(
        RegimeSpec(duration_s=duration_s, sigma=sigma_low, trades_per_s=trades_per_s),
        RegimeSpec(duration_s=duration_s, sigma=sigma_high, trades_per_s=trades_per_s),
    ))


def regime_switching_config(
    n_segments: int,
    segment_s: int,
    seed: int,
    sigma_low: float = 2e-4,
    sigma_high: float = 1e-3,
    intensity_low: float = 2.0,
    intensity_high: float = 8.0,
    start_ts_s: int = 0,
) -> SynthConfig:
    """Random alternating-regime schedule with intensity and depth cues.

    High-volatility segments carry more and larger trades on a thinner book,
    so the regime is inferable from the encoded image alone.
    """
    rng = np.random.default_rng(seed)
    high = rng.random(n_segments) < 0.5
    regimes = []
    for h in high:
        if h:
            regimes.append(RegimeSpec(
                duration_s=segment_s, sigma=sigma_high,
                trades_per_s=intensity_high, mean_trade_size=2.0,
                depth_scale=0.4,
            ))
        else:
            regimes.append(RegimeSpec(
                duration_s=segment_s, sigma=sigma_low,
                trades_per_s=intensity_low, mean_trade_size=1.0,
                depth_scale=1.0,
            ))
    return SynthConfig(regimes=tuple(regimes), start_ts_s=start_ts_s)
