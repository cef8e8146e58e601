"""Reconstructed order book with out-of-view level persistence.

A level seen in a snapshot stays in the state after it scrolls out of the
visible top-20 range (persisted=True) until a later snapshot covers its
price without listing it, a trade consumes it, or the book crosses it.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import StaleSnapshot
from .marketdata import LobSnapshot, Trade

BID = -1
ASK = 1


@dataclass
class _Level:
    __slots__ = ("size", "last_confirmed_ts", "persisted")
    size: float
    last_confirmed_ts: int
    persisted: bool


@dataclass(frozen=True)
class BookView:
    """Immutable per-second snapshot of the full book state.

    Arrays are aligned and sorted by ascending price; side is -1 for bids,
    +1 for asks.
    """

    ts_ms: int
    prices: np.ndarray
    sizes: np.ndarray
    sides: np.ndarray
    persisted: np.ndarray

    def in_range(self, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
        """(prices, sizes) of all levels with lo <= price < hi."""
        i = np.searchsorted(self.prices, lo, side="left")
        j = np.searchsorted(self.prices, hi, side="left")
        return self.prices[i:j], self.sizes[i:j]

    def depth_in_range(self, lo: float, hi: float) -> list[tuple[float, float, int]]:
        i = np.searchsorted(self.prices, lo, side="left")
        j = np.searchsorted(self.prices, hi, side="left")
        return [
            (float(self.prices[k]), float(self.sizes[k]), int(self.sides[k]))
            for k in range(i, j)
        ]


class BookState:
    """Mutable book fold state; `view()` freezes the current contents."""

    def __init__(self) -> None:
        self.bids: dict[float, _Level] = {}
        self.asks: dict[float, _Level] = {}
        self.last_snapshot_ts: int | None = None
        self.persisted_fill_count = 0
        self._view: BookView | None = None

    # -- snapshot ----------------------------------------------------------

    def apply_snapshot(self, snap: LobSnapshot) -> "BookState":
        if self.last_snapshot_ts is not None and snap.ts_ms < self.last_snapshot_ts:
            raise StaleSnapshot(
                f"snapshot ts {snap.ts_ms} precedes {self.last_snapshot_ts}"
            )
        self._view = None
        best_bid = snap.best_bid
        best_ask = snap.best_ask

        for side_levels, snap_levels, lo, hi in (
            (self.bids, snap.bids, snap.bids[-1][0], snap.bids[0][0]),
            (self.asks, snap.asks, snap.asks[0][0], snap.asks[-1][0]),
        ):
            listed = {p for p, _ in snap_levels}
            for price in list(side_levels):
                if lo <= price <= hi and price not in listed:
                    # inside the visible range but absent: genuinely gone
                    del side_levels[price]
                elif price not in listed:
                    side_levels[price].persisted = True
            for price, size in snap_levels:
                side_levels[price] = _Level(size, snap.ts_ms, False)

        # crossed leftovers are stale by definition
        for price in [p for p in self.bids if p >= best_ask]:
            del self.bids[price]
        for price in [p for p in self.asks if p <= best_bid]:
            del self.asks[price]

        self.last_snapshot_ts = snap.ts_ms
        return self

    # -- trades ------------------------------------------------------------

    def apply_trade(self, trade: Trade) -> "BookState":
        # buyer_is_maker: the buyer rested, so the passive side is the bid
        side = self.bids if trade.buyer_is_maker else self.asks
        level = side.get(trade.price)
        if level is None:
            return self
        self._view = None
        if level.persisted:
            self.persisted_fill_count += 1
        level.size -= trade.size
        if level.size <= 0.0:
            del side[trade.price]
        return self

    # -- queries -----------------------------------------------------------

    def best_bid(self) -> float | None:
        return max(self.bids) if self.bids else None

    def best_ask(self) -> float | None:
        return min(self.asks) if self.asks else None

    def view(self, ts_ms: int | None = None) -> BookView:
        if self._view is None:
            n = len(self.bids) + len(self.asks)
            prices = np.empty(n)
            sizes = np.empty(n)
            sides = np.empty(n, dtype=np.int8)
            persisted = np.empty(n, dtype=bool)
            i = 0
            for side_code, levels in ((BID, self.bids), (ASK, self.asks)):
                for price, lv in levels.items():
                    prices[i] = price
                    sizes[i] = lv.size
                    sides[i] = side_code
                    persisted[i] = lv.persisted
                    i += 1
            order = np.argsort(prices, kind="stable")
            view = BookView(
                ts_ms=self.last_snapshot_ts if self.last_snapshot_ts is not None else 0,
                prices=prices[order],
                sizes=sizes[order],
                sides=sides[order],
                persisted=persisted[order],
            )
            for arr in (view.prices, view.sizes, view.sides, view.persisted):
                arr.setflags(write=False)
            self._view = view
        if ts_ms is not None and self._view.ts_ms != ts_ms:
            return dataclasses.replace(self._view, ts_ms=ts_ms)
        return self._view

    def depth_in_range(self, lo: float, hi: float) -> list[tuple[float, float, int]]:
        return self.view().depth_in_range(lo, hi)

    def visible_levels(self) -> dict[int, list[tuple[float, float]]]:
        """persisted=False levels per side, best-first; equals the last snapshot."""
        bids = sorted(
            ((p, lv.size) for p, lv in self.bids.items() if not lv.persisted),
            key=lambda l: -l[0],
        )
        asks = sorted(
            ((p, lv.size) for p, lv in self.asks.items() if not lv.persisted),
            key=lambda l: l[0],
        )
        return {BID: bids, ASK: asks}

    def equals(self, other: "BookState") -> bool:
        def plain(levels: dict[float, _Level]):
            return {
                p: (lv.size, lv.last_confirmed_ts, lv.persisted)
                for p, lv in levels.items()
            }

        return (
            plain(self.bids) == plain(other.bids)
            and plain(self.asks) == plain(other.asks)
            and self.last_snapshot_ts == other.last_snapshot_ts
        )


def fold_day(
    snapshots: list[LobSnapshot],
    trades: list[Trade],
    t0_s: int,
    t1_s: int,
) -> list[BookView]:
    """Replay a day's events and freeze one BookView per second.

    The view for second s reflects every event with ts_ms < (s+1)*1000;
    at equal timestamps snapshots apply before trades.
    """
    state = BookState()
    # (ts, kind, seq); kind 0 = snapshot applies before kind 1 = trade
    events: list[tuple[int, int, int]] = []
    for i, sn in enumerate(snapshots):
        events.append((sn.ts_ms, 0, i))
    for i, tr in enumerate(trades):
        if t0_s * 1000 <= tr.ts_ms < t1_s * 1000:
            events.append((tr.ts_ms, 1, i))
    events.sort()

    views: list[BookView] = []
    ei = 0
    for s in range(t0_s, t1_s):
        end_ms = (s + 1) * 1000
        while ei < len(events) and events[ei][0] < end_ms:
            ts, kind, idx = events[ei]
            if kind == 0:
                state.apply_snapshot(snapshots[idx])
            else:
                state.apply_trade(trades[idx])
            ei += 1
        views.append(state.view(ts_ms=end_ms - 1))
    return views
