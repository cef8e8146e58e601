"""Exception hierarchy.

DataError subclasses map to CLI exit code 3 (bad input data or lineage),
UsageError to 2, everything else unexpected to 4.
"""
from __future__ import annotations


class FlowimgError(Exception):
    """Base class for all library errors."""


class UsageError(FlowimgError):
    """Bad invocation: unknown option combination, missing required path."""


class DataError(FlowimgError):
    """Input data violates a documented contract."""


class MalformedRow(DataError):
    def __init__(self, line_no: int, reason: str) -> None:
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class NonMonotoneTimestamp(DataError):
    def __init__(self, line_no: int, ts_ms: int, prev_ts_ms: int) -> None:
        super().__init__(
            f"line {line_no}: timestamp {ts_ms} precedes {prev_ts_ms}"
        )
        self.line_no = line_no
        self.ts_ms = ts_ms
        self.prev_ts_ms = prev_ts_ms


class CrossedBook(DataError):
    def __init__(self, ts_ms: int, best_bid: float, best_ask: float) -> None:
        super().__init__(
            f"crossed book at ts {ts_ms}: best bid {best_bid} >= best ask {best_ask}"
        )
        self.ts_ms = ts_ms
        self.best_bid = best_bid
        self.best_ask = best_ask


class NoSnapshotCoverage(DataError):
    """No depth snapshot at or before the start of the requested range."""


class InvalidConfig(DataError):
    """Config value outside its documented domain."""


class StaleSnapshot(DataError):
    """Snapshot older than the last one already applied to the book."""


class WindowShapeMismatch(DataError):
    """Window record count does not match n * t_unit."""


class DayTooShort(DataError):
    """Day shorter than one window plus the label horizon."""


class NonFiniteFeature(DataError):
    def __init__(self, feature_id: str, value: float) -> None:
        super().__init__(f"feature {feature_id} is not finite: {value!r}")
        self.feature_id = feature_id


class NonPositivePrice(DataError):
    """Log-return input contains a price <= 0."""


class TooFewSamples(DataError):
    """Not enough samples to split 3:1:1."""


class DegenerateSeries(DataError):
    """Return series has zero variance; GARCH likelihood is undefined."""


class NonFiniteLoss(FlowimgError):
    """Training loss became NaN or infinite."""


class ShapeMismatch(DataError):
    """Array shapes incompatible with the model or container."""


class EmptyAfterExclusion(DataError):
    """All targets were zero; RMSPE is undefined."""


class LineageMismatch(DataError):
    """Model was trained on a different dataset or split than supplied."""


class BadMagic(DataError):
    """Container does not start with the expected magic bytes."""


class CrcMismatch(DataError):
    """Container payload does not match its CRC-32 trailer."""


class TruncatedFile(DataError):
    """Container shorter (or longer) than its header declares."""


class NonFiniteValue(DataError):
    """Tensor payload contains NaN or infinity."""


class IoError(FlowimgError):
    """Filesystem failure while reading or writing an artifact."""
