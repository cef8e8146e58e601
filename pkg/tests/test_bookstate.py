import numpy as np
import pytest

from flowimg import BookState, LobSnapshot, Trade, fold_day
from flowimg.bookstate import ASK, BID
from flowimg.errors import StaleSnapshot


def snap(ts_ms, bids, asks):
    return LobSnapshot(ts_ms=ts_ms, bids=tuple(bids), asks=tuple(asks))


def ladder(best, side, n=20, size=5.0, tick=1.0):
    """n levels away from the touch; side -1 walks down, +1 walks up."""
    return [(best + side * i * tick, size) for i in range(n)]


class TestPersistence:
    def test_scrolled_out_level_persists(self):
        st = BookState()
        st.apply_snapshot(snap(1000, ladder(100, -1), ladder(102, 1)))
        # book moves up 30: old deep bids fall below the new visible range
        st.apply_snapshot(snap(2000, ladder(130, -1), ladder(132, 1)))
        assert 100.0 not in {p for p, _ in st.visible_levels()[BID]}
        assert st.bids[100.0].persisted is True
        assert st.bids[100.0].size == 5.0

    def test_absent_inside_range_deletes(self):
        st = BookState()
        st.apply_snapshot(snap(1000, ladder(100, -1), ladder(102, 1)))
        bids2 = [lv for lv in ladder(100, -1) if lv[0] != 95.0]
        bids2.append((80.0, 5.0))  # keep 20 levels, range extends to 80
        bids2.sort(key=lambda l: -l[0])
        st.apply_snapshot(snap(2000, bids2, ladder(102, 1)))
        assert 95.0 not in st.bids
        assert 96.0 in st.bids

    def test_crossed_leftovers_removed(self):
        st = BookState()
        st.apply_snapshot(snap(1000, ladder(100, -1), ladder(102, 1)))
        # price collapses; persisted asks near 102 would cross the new book
        st.apply_snapshot(snap(2000, ladder(70, -1), ladder(72, 1)))
        assert all(p > 70.0 for p in st.asks)
        # bids that sat at 100 now cross the 72 ask: gone as well
        assert all(p < 72.0 for p in st.bids)

    def test_relisted_level_clears_flag(self):
        st = BookState()
        st.apply_snapshot(snap(1000, ladder(100, -1), ladder(102, 1)))
        st.apply_snapshot(snap(2000, ladder(110, -1), ladder(112, 1)))
        assert st.bids[85.0].persisted is True
        st.apply_snapshot(snap(3000, ladder(100, -1), ladder(102, 1)))
        assert st.bids[85.0].persisted is False
        assert st.bids[85.0].last_confirmed_ts == 3000


class TestTrades:
    def test_trade_consumes_passive_ask(self):
        st = BookState()
        st.apply_snapshot(snap(1000, ladder(100, -1), ladder(102, 1)))
        # aggressive buy lifts the ask at 102
        st.apply_trade(Trade(1500, 102.0, 2.0, buyer_is_maker=False))
        assert st.asks[102.0].size == 3.0
        st.apply_trade(Trade(1600, 102.0, 3.0, buyer_is_maker=False))
        assert 102.0 not in st.asks

    def test_trade_consumes_passive_bid(self):
        st = BookState()
        st.apply_snapshot(snap(1000, ladder(100, -1), ladder(102, 1)))
        st.apply_trade(Trade(1500, 100.0, 1.5, buyer_is_maker=True))
        assert st.bids[100.0].size == 3.5

    def test_trade_off_book_ignored(self):
        st = BookState()
        st.apply_snapshot(snap(1000, ladder(100, -1), ladder(102, 1)))
        st.apply_trade(Trade(1500, 150.0, 1.0, buyer_is_maker=False))
        assert 150.0 not in st.asks
        assert st.persisted_fill_count == 0

    def test_persisted_fill_counted(self):
        st = BookState()
        st.apply_snapshot(snap(1000, ladder(100, -1), ladder(102, 1)))
        st.apply_snapshot(snap(2000, ladder(130, -1), ladder(132, 1)))
        assert st.bids[100.0].persisted
        st.apply_trade(Trade(2500, 100.0, 1.0, buyer_is_maker=True))
        assert st.persisted_fill_count == 1


class TestOrdering:
    def test_stale_snapshot_rejected(self):
        st = BookState()
        st.apply_snapshot(snap(2000, ladder(100, -1), ladder(102, 1)))
        with pytest.raises(StaleSnapshot):
            st.apply_snapshot(snap(1000, ladder(100, -1), ladder(102, 1)))

    def test_never_crossed_after_snapshot(self, day_streams):
        trades, snaps = day_streams
        st = BookState()
        ti = 0
        for sn in snaps:
            while ti < len(trades) and trades[ti].ts_ms < sn.ts_ms:
                st.apply_trade(trades[ti])
                ti += 1
            st.apply_snapshot(sn)
            bb, ba = st.best_bid(), st.best_ask()
            assert bb is not None and ba is not None and bb < ba

    def test_visible_equals_last_snapshot(self, day_streams):
        trades, snaps = day_streams
        st = BookState()
        # apply a few snapshots with no intervening trades
        for sn in snaps[:5]:
            st.apply_snapshot(sn)
        vis = st.visible_levels()
        assert vis[BID] == list(snaps[4].bids)
        assert vis[ASK] == list(snaps[4].asks)


class TestViews:
    def test_view_sorted_and_frozen(self):
        st = BookState()
        st.apply_snapshot(snap(1000, ladder(100, -1), ladder(102, 1)))
        v = st.view()
        assert np.all(np.diff(v.prices) > 0)
        assert v.sides[0] == BID and v.sides[-1] == ASK
        with pytest.raises(ValueError):
            v.prices[0] = 0.0

    def test_in_range_half_open(self):
        st = BookState()
        st.apply_snapshot(snap(1000, ladder(100, -1), ladder(102, 1)))
        prices, sizes = st.view().in_range(100.0, 103.0)
        assert prices.tolist() == [100.0, 102.0]
        assert sizes.tolist() == [5.0, 5.0]
        # hi is exclusive
        prices, _ = st.view().in_range(100.0, 102.0)
        assert prices.tolist() == [100.0]

    def test_fold_day_event_boundary(self):
        snaps = [snap(0, ladder(100, -1), ladder(102, 1)),
                 snap(1000, ladder(100, -1), ladder(102, 1))]
        # ts_ms=999 lands in second 0; ts_ms=1000 is second 1's snapshot
        trades = [Trade(999, 102.0, 1.0, buyer_is_maker=False)]
        views = fold_day(snaps, trades, 0, 2)
        assert len(views) == 2
        # second 0: trade already applied
        _, sz = views[0].in_range(102.0, 103.0)
        assert sz[0] == 4.0
        # second 1: fresh snapshot restored the level
        _, sz = views[1].in_range(102.0, 103.0)
        assert sz[0] == 5.0
        assert views[0].ts_ms == 999 and views[1].ts_ms == 1999

    def test_fold_day_snapshot_before_trade_at_same_ts(self):
        snaps = [snap(0, ladder(100, -1), ladder(102, 1)),
                 snap(1000, ladder(100, -1), ladder(102, 1))]
        trades = [Trade(1000, 102.0, 1.0, buyer_is_maker=False)]
        views = fold_day(snaps, trades, 0, 2)
        # snapshot at 1000 applies first, then the trade eats into it
        _, sz = views[1].in_range(102.0, 103.0)
        assert sz[0] == 4.0

    def test_fold_day_replay_idempotent(self, day_streams):
        trades, snaps = day_streams
        a = fold_day(snaps, trades, 0, 60)
        b = fold_day(snaps, trades, 0, 60)
        for va, vb in zip(a, b):
            assert np.array_equal(va.prices, vb.prices)
            assert np.array_equal(va.sizes, vb.sizes)
            assert np.array_equal(va.sides, vb.sides)
            assert np.array_equal(va.persisted, vb.persisted)
