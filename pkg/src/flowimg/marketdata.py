"""Trade and depth stream parsing, serialization, and per-second alignment.

Input formats
-------------
Trades CSV:  header ``ts_ms,price,qty,is_buyer_maker``; one trade per row.
Trades NDJSON: one JSON object per line with the same keys.
Depth CSV:   header ``ts_ms,bid_px_1..20,bid_sz_1..20,ask_px_1..20,ask_sz_1..20``.
Depth NDJSON: ``{"ts_ms": ..., "bids": [[px, sz] * 20], "asks": [[px, sz] * 20]}``.

Gzip input is detected from the 0x1f8b magic, never from the file name.
`buyer_is_maker` follows the exchange convention: true means the buyer was
the resting order, i.e. the aggressor was a seller.
"""
from __future__ import annotations

import csv
import gzip
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Sequence, TextIO, Union

from .errors import (
    CrossedBook,
    MalformedRow,
    NonMonotoneTimestamp,
    NoSnapshotCoverage,
)

DEPTH_LEVELS = 20
TRADES_HEADER = ("ts_ms", "price", "qty", "is_buyer_maker")
DEPTH_HEADER = tuple(
    ["ts_ms"]
    + [f"bid_px_{i}" for i in range(1, DEPTH_LEVELS + 1)]
    + [f"bid_sz_{i}" for i in range(1, DEPTH_LEVELS + 1)]
    + [f"ask_px_{i}" for i in range(1, DEPTH_LEVELS + 1)]
    + [f"ask_sz_{i}" for i in range(1, DEPTH_LEVELS + 1)]
)

_TRUE_LITERALS = {"true", "1"}
_FALSE_LITERALS = {"false", "0"}

Source = Union[str, os.PathLike, bytes, BinaryIO]


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class Trade:
    ts_ms: int
    price: float
    size: float
    buyer_is_maker: bool


@dataclass(frozen=True)
class LobSnapshot:
    """Top-20 book levels; bids best-first (descending), asks best-first (ascending)."""

    ts_ms: int
    bids: tuple[tuple[float, float], ...]
    asks: tuple[tuple[float, float], ...]

    @property
    def best_bid(self) -> float:
        return self.bids[0][0]

    @property
    def best_ask(self) -> float:
        return self.asks[0][0]

    @property
    def mid(self) -> float:
        return 0.5 * (self.best_bid + self.best_ask)


@dataclass(frozen=True)
class SecondRecord:
    """One aligned second: attached snapshot plus trade aggregates."""

    ts_s: int
    snapshot: LobSnapshot
    vwap: float
    order_count: int
    total_size: float
    buy_size: float
    sell_size: float
    trades: tuple[Trade, ...]


@dataclass(frozen=True)
class OrderFlowWindow:
    """n*t_unit consecutive seconds plus the per-second book views."""

    start_s: int
    records: tuple[SecondRecord, ...]
    book_states: tuple  # of bookstate.BookView, aligned with records


@dataclass
class ParseStats:
    """Counters surfaced by the parsers; never affects parse results."""

    rows: int = 0
    resorted_sides: int = 0


# ---------------------------------------------------------------------------
# stream plumbing


def _open_binary(src: Source) -> BinaryIO:
    if isinstance(src, bytes):
        return io.BytesIO(src)
    if isinstance(src, (str, os.PathLike)):
        return open(src, "rb")
    return src


def _text_lines(src: Source) -> TextIO:
    raw = _open_binary(src)
    head = raw.read(2)
    rest = raw.read()
    buf = head + rest
    if head == b"\x1f\x8b":
        buf = gzip.decompress(buf)
    return io.StringIO(buf.decode("utf-8"))


def _parse_bool(token: str, line_no: int) -> bool:
    low = token.strip().lower()
    if low in _TRUE_LITERALS:
        return True
    if low in _FALSE_LITERALS:
        return False
    raise MalformedRow(line_no, f"bad boolean {token!r}")


def _parse_float(token: str, line_no: int, name: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MalformedRow(line_no, f"bad {name} {token!r}") from None
    if not math.isfinite(value):
        raise MalformedRow(line_no, f"non-finite {name} {token!r}")
    return value


def _parse_int(token: str, line_no: int, name: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise MalformedRow(line_no, f"bad {name} {token!r}") from None


# ---------------------------------------------------------------------------
# trades


def parse_trades(
    src: Source,
    fmt: str = "csv",
    *,
    tolerance_ms: int = 0,
    stats: ParseStats | None = None,
) -> list[Trade]:
    """Parse a trade stream in input order.

    Raises MalformedRow for structural damage (wrong column count, bad
    literal, non-positive price or size) and NonMonotoneTimestamp when a
    timestamp goes backwards by more than `tolerance_ms`.
    """
    if fmt not in ("csv", "ndjson"):
        raise ValueError(f"unknown format {fmt!r}")
    out: list[Trade] = []
    prev_ts: int | None = None
    text = _text_lines(src)
    if fmt == "csv":
        rows = csv.reader(text)
        first = True
        for line_no, row in enumerate(rows, start=1):
            if not row:
                continue
            if first:
                first = False
                if tuple(h.strip() for h in row) != TRADES_HEADER:
                    raise MalformedRow(
                        line_no, f"expected header {','.join(TRADES_HEADER)}"
                    )
                continue
            if len(row) != 4:
                raise MalformedRow(line_no, f"expected 4 fields, got {len(row)}")
            ts = _parse_int(row[0], line_no, "ts_ms")
            price = _parse_float(row[1], line_no, "price")
            size = _parse_float(row[2], line_no, "qty")
            maker = _parse_bool(row[3], line_no)
            prev_ts = _check_trade(out, line_no, ts, price, size, maker,
                                    prev_ts, tolerance_ms)
    else:
        for line_no, line in enumerate(text, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRow(line_no, f"bad json: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise MalformedRow(line_no, "expected a json object")
            missing = [k for k in TRADES_HEADER if k not in obj]
            if missing:
                raise MalformedRow(line_no, f"missing keys {missing}")
            ts = _parse_int(str(obj["ts_ms"]), line_no, "ts_ms")
            price = _parse_float(str(obj["price"]), line_no, "price")
            size = _parse_float(str(obj["qty"]), line_no, "qty")
            maker = obj["is_buyer_maker"]
            if not isinstance(maker, bool):
                maker = _parse_bool(str(maker), line_no)
            prev_ts = _check_trade(out, line_no, ts, price, size, maker,
                                    prev_ts, tolerance_ms)
    if stats is not None:
        stats.rows += len(out)
    return out


def _check_trade(
    out: list[Trade],
    line_no: int,
    ts: int,
    price: float,
    size: float,
    maker: bool,
    prev_ts: int | None,
    tolerance_ms: int,
) -> int:
    if price <= 0.0:
        raise MalformedRow(line_no, f"non-positive price {price!r}")
    if size <= 0.0:
        raise MalformedRow(line_no, f"non-positive qty {size!r}")
    if prev_ts is not None and ts < prev_ts - tolerance_ms:
        raise NonMonotoneTimestamp(line_no, ts, prev_ts)
    out.append(Trade(ts_ms=ts, price=price, size=size, buyer_is_maker=maker))
    return max(ts, prev_ts) if prev_ts is not None else ts


def _fmt_float(x: float) -> str:
    # repr round-trips exactly and is the shortest such form in py3
    return repr(float(x))


def serialize_trades(trades: Iterable[Trade], fmt: str = "csv") -> str:
    """Normalized text form; parse(serialize(parse(x))) == parse(x)."""
    if fmt == "csv":
        lines = [",".join(TRADES_HEADER)]
        for t in trades:
            lines.append(
                f"{t.ts_ms},{_fmt_float(t.price)},{_fmt_float(t.size)},"
                f"{'true' if t.buyer_is_maker else 'false'}"
            )
        return "\n".join(lines) + "\n"
    if fmt == "ndjson":
        lines = []
        for t in trades:
            lines.append(json.dumps(
                {
                    "ts_ms": t.ts_ms,
                    "price": t.price,
                    "qty": t.size,
                    "is_buyer_maker": t.buyer_is_maker,
                },
                separators=(",", ":"),
            ))
        return "\n".join(lines) + ("\n" if lines else "")
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# depth


def parse_depth(
    src: Source,
    fmt: str = "csv",
    *,
    stats: ParseStats | None = None,
) -> list[LobSnapshot]:
    """Parse depth snapshots; validates 20 strictly monotone levels per side.

    An unsorted side is re-sorted (counted in stats.resorted_sides); a
    crossed snapshot (best bid >= best ask) raises CrossedBook.
    """
    if fmt not in ("csv", "ndjson"):
        raise ValueError(f"unknown format {fmt!r}")
    out: list[LobSnapshot] = []
    text = _text_lines(src)
    if fmt == "csv":
        rows = csv.reader(text)
        first = True
        for line_no, row in enumerate(rows, start=1):
            if not row:
                continue
            if first:
                first = False
                if tuple(h.strip() for h in row) != DEPTH_HEADER:
                    raise MalformedRow(line_no, "bad depth header")
                continue
            if len(row) != 1 + 4 * DEPTH_LEVELS:
                raise MalformedRow(
                    line_no, f"expected {1 + 4 * DEPTH_LEVELS} fields, got {len(row)}"
                )
            ts = _parse_int(row[0], line_no, "ts_ms")
            vals = [_parse_float(tok, line_no, "level") for tok in row[1:]]
            bid_px = vals[0:DEPTH_LEVELS]
            bid_sz = vals[DEPTH_LEVELS : 2 * DEPTH_LEVELS]
            ask_px = vals[2 * DEPTH_LEVELS : 3 * DEPTH_LEVELS]
            ask_sz = vals[3 * DEPTH_LEVELS :]
            bids = list(zip(bid_px, bid_sz))
            asks = list(zip(ask_px, ask_sz))
            out.append(_check_snapshot(ts, bids, asks, line_no, stats))
    else:
        for line_no, line in enumerate(text, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRow(line_no, f"bad json: {exc.msg}") from None
            if not isinstance(obj, dict) or not {"ts_ms", "bids", "asks"} <= set(obj):
                raise MalformedRow(line_no, "expected keys ts_ms, bids, asks")
            ts = _parse_int(str(obj["ts_ms"]), line_no, "ts_ms")
            try:
                bids = [(float(p), float(s)) for p, s in obj["bids"]]
                asks = [(float(p), float(s)) for p, s in obj["asks"]]
            except (TypeError, ValueError):
                raise MalformedRow(line_no, "bad level pair") from None
            out.append(_check_snapshot(ts, bids, asks, line_no, stats))
    if stats is not None:
        stats.rows += len(out)
    return out


def _check_snapshot(
    ts: int,
    bids: list[tuple[float, float]],
    asks: list[tuple[float, float]],
    line_no: int,
    stats: ParseStats | None,
) -> LobSnapshot:
    if len(bids) != DEPTH_LEVELS or len(asks) != DEPTH_LEVELS:
        raise MalformedRow(line_no, "expected 20 levels per side")
    for px, sz in bids + asks:
        if px <= 0.0 or sz <= 0.0 or not (math.isfinite(px) and math.isfinite(sz)):
            raise MalformedRow(line_no, f"bad level ({px!r}, {sz!r})")
    sorted_bids = sorted(bids, key=lambda l: -l[0])
    sorted_asks = sorted(asks, key=lambda l: l[0])
    if sorted_bids != bids or sorted_asks != asks:
        if stats is not None:
            stats.resorted_sides += 1
    if len({p for p, _ in sorted_bids}) != DEPTH_LEVELS:
        raise MalformedRow(line_no, "duplicate bid price")
    if len({p for p, _ in sorted_asks}) != DEPTH_LEVELS:
        raise MalformedRow(line_no, "duplicate ask price")
    if sorted_bids[0][0] >= sorted_asks[0][0]:
        raise CrossedBook(ts, sorted_bids[0][0], sorted_asks[0][0])
    return LobSnapshot(ts_ms=ts, bids=tuple(sorted_bids), asks=tuple(sorted_asks))


def serialize_depth(snaps: Iterable[LobSnapshot], fmt: str = "csv") -> str:
    if fmt == "csv":
        lines = [",".join(DEPTH_HEADER)]
        for s in snaps:
            parts = [str(s.ts_ms)]
            parts += [_fmt_float(p) for p, _ in s.bids]
            parts += [_fmt_float(z) for _, z in s.bids]
            parts += [_fmt_float(p) for p, _ in s.asks]
            parts += [_fmt_float(z) for _, z in s.asks]
            lines.append(",".join(parts))
        return "\n".join(lines) + "\n"
    if fmt == "ndjson":
        lines = []
        for s in snaps:
            lines.append(json.dumps(
                {
                    "ts_ms": s.ts_ms,
                    "bids": [[p, z] for p, z in s.bids],
                    "asks": [[p, z] for p, z in s.asks],
                },
                separators=(",", ":"),
            ))
        return "\n".join(lines) + ("\n" if lines else "")
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# alignment


def align_seconds(
    trades: Sequence[Trade],
    snapshots: Sequence[LobSnapshot],
    t0_s: int,
    t1_s: int,
) -> list[SecondRecord]:
    """Aggregate trades into [t0_s, t1_s) seconds and attach depth snapshots.

    The attached snapshot is the latest with ts_ms <= (s+1)*1000 (at or
    before second end). Raises NoSnapshotCoverage unless some snapshot has
    ts_ms <= t0_s*1000. Seconds without trades inherit the previous vwap;
    a leading trade-less run is seeded with the attached snapshot's mid.
    """
    if t1_s <= t0_s:
        raise ValueError("empty second range")
    snaps = sorted(snapshots, key=lambda s: s.ts_ms)
    if not snaps or snaps[0].ts_ms > t0_s * 1000:
        raise NoSnapshotCoverage(
            f"no snapshot at or before t0_s={t0_s}"
        )

    by_second: dict[int, list[Trade]] = {}
    for t in trades:
        s = t.ts_ms // 1000
        if t0_s <= s < t1_s:
            by_second.setdefault(s, []).append(t)

    out: list[SecondRecord] = []
    si = 0
    prev_vwap: float | None = None
    for s in range(t0_s, t1_s):
        end_ms = (s + 1) * 1000
        while si + 1 < len(snaps) and snaps[si + 1].ts_ms <= end_ms:
            si += 1
        snap = snaps[si]
        secs = tuple(by_second.get(s, ()))
        if secs:
            total = sum(t.size for t in secs)
            buy = sum(t.size for t in secs if not t.buyer_is_maker)
            sell = sum(t.size for t in secs if t.buyer_is_maker)
            vwap = sum(t.price * t.size for t in secs) / total
        else:
            total = buy = sell = 0.0
            vwap = prev_vwap if prev_vwap is not None else snap.mid
        prev_vwap = vwap
        out.append(SecondRecord(
            ts_s=s,
            snapshot=snap,
            vwap=vwap,
            order_count=len(secs),
            total_size=total,
            buy_size=buy,
            sell_size=sell,
            trades=secs,
        ))
    return out
