"""Replay depth snapshots and trades into per-second book views.

Snapshots show only the top 20 levels per side. A level that scrolls out
of that range has not necessarily been cancelled, so the replay keeps it
as "persisted" until evidence says otherwise; trades consume the passive
side, including persisted levels at matching prices.
"""
from flowimg import (
    BookState, LobSnapshot, RegimeSpec, SynthConfig, Trade, gen_synthetic_flow,
)
from flowimg.bookstate import ASK, BID, fold_day

trades, snapshots = gen_synthetic_flow(SynthConfig(regimes=(
    RegimeSpec(duration_s=600, sigma=8e-4, trades_per_s=5.0),
)), seed=11)

# fold the whole day: one frozen view per second
views = fold_day(snapshots, trades, 0, 600)
print(f"{len(views)} per-second views")

v = views[300]
n_persisted = int(v.persisted.sum())
print(f"second 300: {len(v.prices)} levels, "
      f"{n_persisted} persisted from earlier snapshots")
bid_mask = v.sides == BID
best_bid = v.prices[bid_mask].max()
best_ask = v.prices[~bid_mask].min()
print(f"best bid {best_bid}  best ask {best_ask}  (never crossed)")

# the same machinery, driven by hand on a toy book
book = BookState()
book.apply_snapshot(LobSnapshot(
    ts_ms=0,
    bids=((100.0, 5.0), (99.0, 8.0)),
    asks=((101.0, 4.0), (102.0, 6.0)),
))


def size_at(side: int, price: float) -> float:
    return next((s for p, s in book.visible_levels()[side] if p == price), 0.0)


# a market buy consumes the resting ask at its price
book.apply_trade(Trade(ts_ms=500, price=101.0, size=1.5, buyer_is_maker=False))
print(f"ask 101 after a 1.5 buy: {size_at(ASK, 101.0)}  (was 4.0)")

# the next snapshot's bid range spans 97..100 and omits 99: genuinely
# gone. The one after narrows to 98..100; bid 97 now sits below the
# visible range, so the fold keeps it around as persisted
book.apply_snapshot(LobSnapshot(
    ts_ms=1000,
    bids=((100.0, 5.0), (98.0, 2.0), (97.0, 3.0)),
    asks=((101.0, 2.5), (102.0, 6.0)),
))
book.apply_snapshot(LobSnapshot(
    ts_ms=2000,
    bids=((100.0, 5.0), (98.0, 2.0)),
    asks=((101.0, 2.5), (102.0, 6.0)),
))
frozen = book.view(ts_ms=2000)
kept = [(float(p), float(s)) for p, s, is_kept
        in zip(frozen.prices, frozen.sizes, frozen.persisted) if is_kept]
print(f"persisted levels after the book narrowed: {kept}")

# a sell at that price is evidence the level was real; the fold counts it
book.apply_trade(Trade(ts_ms=2500, price=97.0, size=1.0, buyer_is_maker=True))
print(f"fills against persisted levels: {book.persisted_fill_count}")

# price range a view actually covers, half-open on the right
lo, hi = best_bid - 5, best_ask + 5
prices, sizes = v.in_range(lo, hi)
print(f"levels with {lo} <= price < {hi}: {len(prices)}, "
      f"total size {sizes.sum():.2f}")
