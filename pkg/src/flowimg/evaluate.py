"""RMSPE scoring and per-day evaluation reports.

RMSPE = sqrt(mean(((yhat - y) / y)^2)) over pairs with y != 0; excluded
zero-label pairs are counted, never silently dropped. Scores are computed
within each day, then aggregated mean +/- population std across days.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyAfterExclusion


def rmspe(predictions: np.ndarray, targets: np.ndarray) -> float:
    yhat = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if yhat.shape != y.shape:
        raise ValueError("predictions and targets differ in shape")
    mask = y != 0.0
    if not mask.any():
        raise EmptyAfterExclusion("all targets are zero")
    rel = (yhat[mask] - y[mask]) / y[mask]
    return float(math.sqrt(float(np.mean(rel * rel))))


@dataclass(frozen=True)
class SplitScore:
    rmspe_mean: float
    rmspe_std: float
    per_day: dict[str, float]
    excluded_zero_labels: int
    n_scored: int

    def as_dict(self) -> dict:
        return {
            "rmspe_mean": self.rmspe_mean,
            "rmspe_std": self.rmspe_std,
            "per_day": dict(sorted(self.per_day.items())),
            "excluded_zero_labels": self.excluded_zero_labels,
            "n_scored": self.n_scored,
        }


@dataclass(frozen=True)
class EvalReport:
    model_name: str
    scores: dict[str, SplitScore]          # split name -> score
    config_hash: str
    notes: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "model": self.model_name,
            "splits": {k: v.as_dict() for k, v in self.scores.items()},
            "config_hash": self.config_hash,
            "notes": list(self.notes),
        }


def score_split(
    predictions: np.ndarray,
    targets: np.ndarray,
    day_ids: np.ndarray,
) -> SplitScore:
    """Per-day RMSPE, aggregated across days; days left empty by the
    zero-label exclusion are skipped (still counted as exclusions)."""
    yhat = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    days = np.asarray(day_ids)
    excluded = int((y == 0.0).sum())
    per_day: dict[str, float] = {}
    scored = 0
    for day in sorted(set(days.tolist())):
        sel = days == day
        if not (y[sel] != 0.0).any():
            continue
        per_day[str(day)] = rmspe(yhat[sel], y[sel])
        scored += int((y[sel] != 0.0).sum())
    if not per_day:
        raise EmptyAfterExclusion("every day lost all labels to exclusion")
    vals = np.array(list(per_day.values()))
    return SplitScore(
        rmspe_mean=float(vals.mean()),
        rmspe_std=float(vals.std()),
        per_day=per_day,
        excluded_zero_labels=excluded,
        n_scored=scored,
    )


def render_table(reports: list[EvalReport], splits: tuple[str, ...] = ("val", "test")) -> str:
    """Aligned text table, one model per row, mean +/- std per split."""
    headers = ["model"] + list(splits)
    rows = []
    for rep in reports:
        row = [rep.model_name]
        for split in splits:
            score = rep.scores.get(split)
            if score is None:
                row.append("-")
            else:
                row.append(f"{score.rmspe_mean:.3f} +/- {score.rmspe_std:.3f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in [headers] + rows) for i in range(len(headers))]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"
