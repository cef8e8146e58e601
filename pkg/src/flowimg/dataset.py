"""Dataset materialization and loading.

A dataset directory binds, for one or more days:

    images.fimg       [N, 3, m, n] float32 tensor (post-clip, channel/max)
    features.csv      window_start_s, f_000..f_392 (raw, unstandardized)
    labels.csv        window_start_s, horizon_s, rv, naive_rv
    seconds.csv       day_id, ts_s, vwap (GARCH return history)
    splits.json       global 3:1:1 time-ordered sample indices
    standardization.json  train-split feature mean/std, applied at model load
    manifest.json     config hash, input hashes, window count note

Feature standardization parameters come from the train split only;
zero-variance features standardize with std 1.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .bookstate import BookView, fold_day
from .encoder import EncodingParams
from .errors import InvalidConfig
from .features import FeatureCatalog, default_catalog
from .labeler import DatasetSplit, Sample, build_day_samples, split_time_ordered
from .manifest import read_json, write_json
from .marketdata import SecondRecord, align_seconds, parse_depth, parse_trades
from .tensorio import read_tensor, write_tensor

WINDOW_COUNT_NOTE = (
    "daily window count follows floor((T - n*t_unit - horizon)/epsilon) + 1, "
    "which yields 8611 for a full 86400 s day at default parameters; the "
    "widely quoted figure of 8616 windows/day for the same parameters is not "
    "reproducible from this formula under any boundary convention and is "
    "documented here as a discrepancy rather than forced into agreement"
)


@dataclass(frozen=True)
class AlignedDay:
    day_id: str
    records: tuple[SecondRecord, ...]
    views: tuple[BookView, ...]


def load_day_dir(day_dir: str | os.PathLike, day_id: str | None = None) -> AlignedDay:
    """Parse and align one day directory holding trades.csv and depth.csv."""
    day_dir = Path(day_dir)
    trades_path = _existing(day_dir, "trades")
    depth_path = _existing(day_dir, "depth")
    trades = parse_trades(trades_path)
    snaps = parse_depth(depth_path)
    t0 = snaps[0].ts_ms // 1000
    ends = [snaps[-1].ts_ms // 1000 + 1]
    if trades:
        ends.append(trades[-1].ts_ms // 1000 + 1)
    t1 = max(ends)
    records = align_seconds(trades, snaps, t0, t1)
    views = fold_day(snaps, trades, t0, t1)
    return AlignedDay(
        day_id=day_id if day_id is not None else day_dir.name,
        records=tuple(records),
        views=tuple(views),
    )


def _existing(day_dir: Path, stem: str) -> Path:
    for suffix in (".csv", ".csv.gz", ".ndjson", ".ndjson.gz"):
        cand = day_dir / f"{stem}{suffix}"
        if cand.exists():
            return cand
    raise InvalidConfig(f"no {stem} file in {day_dir}")


def day_input_files(day_dir: str | os.PathLike) -> list[Path]:
    """The raw files a day directory contributes (for input hashing)."""
    day_dir = Path(day_dir)
    return [_existing(day_dir, "trades"), _existing(day_dir, "depth")]


def day_dirs_under(root: str | os.PathLike) -> list[Path]:
    root = Path(root)
    if (root / "trades.csv").exists() or (root / "trades.csv.gz").exists():
        return [root]
    if not root.is_dir():
        raise InvalidConfig(f"input directory {root} does not exist")
    days = sorted(
        child for child in root.iterdir()
        if child.is_dir() and any(
            (child / f"trades{sfx}").exists() for sfx in (".csv", ".csv.gz")
        )
    )
    if not days:
        raise InvalidConfig(f"no day directories under {root}")
    return days


# ---------------------------------------------------------------------------
# materialization


def build_samples(
    days: Sequence[AlignedDay],
    params: EncodingParams,
    catalog: FeatureCatalog,
    horizon_s: int,
) -> list[Sample]:
    samples: list[Sample] = []
    for day in days:
        samples.extend(build_day_samples(
            day.records, day.views, params, catalog, horizon_s, day.day_id
        ))
    versions = {s.features.catalog_version for s in samples}
    if len(versions) > 1:
        raise InvalidConfig(f"mixed catalog versions in one dataset: {versions}")
    return samples


def materialize_dataset(
    out_dir: str | os.PathLike,
    days: Sequence[AlignedDay],
    params: EncodingParams,
    catalog: FeatureCatalog,
    horizon_s: int,
) -> dict:
    """Write all dataset artifacts; returns summary fields for the manifest."""
    samples = build_samples(days, params, catalog, horizon_s)
    day_seconds = [
        (
            day.day_id,
            np.array([rec.ts_s for rec in day.records]),
            np.array([rec.vwap for rec in day.records]),
        )
        for day in days
    ]
    return write_dataset(out_dir, day_seconds, samples, params, catalog, horizon_s)


def write_dataset(
    out_dir: str | os.PathLike,
    day_seconds: Sequence[tuple[str, np.ndarray, np.ndarray]],
    samples: Sequence[Sample],
    params: EncodingParams,
    catalog: FeatureCatalog,
    horizon_s: int,
) -> dict:
    """Write dataset artifacts from prebuilt samples (see build_samples)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    versions = {s.features.catalog_version for s in samples}
    if len(versions) > 1:
        raise InvalidConfig(f"mixed catalog versions in one dataset: {versions}")
    split = split_time_ordered(len(samples))

    n = len(samples)
    shape = (n, 3, params.m, params.n)
    tensor = np.empty(shape, dtype=np.float32)
    for i, s in enumerate(samples):
        tensor[i] = s.image.unit_tensor()
    write_tensor(out / "images.fimg", tensor)

    feat_width = len(catalog.entries)
    lines = ["window_start_s," + ",".join(f"f_{i:03d}" for i in range(feat_width))]
    for s in samples:
        lines.append(
            str(s.label.window_start_s) + ","
            + ",".join(repr(float(v)) for v in s.features.values)
        )
    _write_text(out / "features.csv", "\n".join(lines) + "\n")

    lines = ["window_start_s,horizon_s,rv,naive_rv"]
    for s in samples:
        lb = s.label
        lines.append(
            f"{lb.window_start_s},{lb.horizon_s},{repr(lb.rv)},{repr(lb.naive_rv)}"
        )
    _write_text(out / "labels.csv", "\n".join(lines) + "\n")

    lines = ["day_id,ts_s,vwap"]
    for day_id, ts_arr, vwap_arr in day_seconds:
        for t, v in zip(ts_arr, vwap_arr):
            lines.append(f"{day_id},{int(t)},{repr(float(v))}")
    _write_text(out / "seconds.csv", "\n".join(lines) + "\n")

    write_json(out / "splits.json", split.as_dict())

    feats = np.stack([s.features.values for s in samples])
    train_idx = np.array(split.train)
    mean = feats[train_idx].mean(axis=0)
    std = feats[train_idx].std(axis=0)
    std = np.where(std > 0.0, std, 1.0)  # constant features pass through
    write_json(out / "standardization.json", {
        "mean": [float(v) for v in mean],
        "std": [float(v) for v in std],
        "source": "train split only",
    })

    write_json(out / "features_manifest.json", catalog.to_manifest())

    return {
        "count": n,
        "shape": list(shape),
        "params": _params_dict(params),
        "horizon_s": horizon_s,
        "days": [d[0] for d in day_seconds],
        "day_ids": [s.day_id for s in samples],
        "window_start_s": [s.label.window_start_s for s in samples],
        "v0": [s.image.v0 for s in samples],
        "catalog_version": catalog.version,
        "split_sizes": {
            "train": len(split.train), "val": len(split.val), "test": len(split.test),
        },
        "window_count_note": WINDOW_COUNT_NOTE,
    }


def _params_dict(params: EncodingParams) -> dict:
    return {
        "n": params.n,
        "m": params.m,
        "t_unit": params.t_unit,
        "v_unit": params.v_unit,
        "pad": params.pad,
        "clip_q": params.clip_q,
        "epsilon_s": params.epsilon_s,
    }


def params_from_dict(d: dict) -> EncodingParams:
    return EncodingParams(
        n=int(d["n"]), m=int(d["m"]), t_unit=int(d["t_unit"]),
        v_unit=float(d["v_unit"]), pad=int(d["pad"]),
        clip_q=float(d["clip_q"]), epsilon_s=int(d["epsilon_s"]),
    )


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())


# ---------------------------------------------------------------------------
# loading


@dataclass
class SampleStore:
    """Materialized dataset loaded back into memory."""

    images: np.ndarray          # (N, 3, m, n) float32
    features: np.ndarray        # (N, F) raw
    rv: np.ndarray              # (N,)
    naive_rv: np.ndarray        # (N,)
    window_start_s: np.ndarray  # (N,) int64
    horizon_s: int
    day_ids: np.ndarray         # (N,) str
    split: DatasetSplit
    feat_mean: np.ndarray
    feat_std: np.ndarray
    seconds: dict[str, tuple[np.ndarray, np.ndarray]]  # day -> (ts_s, vwap)
    manifest: dict
    params: EncodingParams

    @property
    def n_samples(self) -> int:
        return len(self.rv)

    def standardized(self, idx: np.ndarray | Sequence[int]) -> np.ndarray:
        return (self.features[np.asarray(idx)] - self.feat_mean) / self.feat_std

    def split_indices(self, name: str) -> np.ndarray:
        try:
            return np.asarray(getattr(self.split, name))
        except AttributeError:
            raise InvalidConfig(f"unknown split {name!r}") from None

    def train_split_hash(self) -> str:
        from .manifest import sha256_text
        return sha256_text(",".join(str(i) for i in self.split.train))


def load_dataset(ds_dir: str | os.PathLike) -> SampleStore:
    ds = Path(ds_dir)
    manifest = read_json(ds / "manifest.json")
    images = read_tensor(ds / "images.fimg")

    feats_rows = []
    starts = []
    with open(ds / "features.csv", "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        width = len(header) - 1
        for line in fh:
            parts = line.rstrip("\n").split(",")
            starts.append(int(parts[0]))
            feats_rows.append(np.array([float(x) for x in parts[1:]]))
    features = np.stack(feats_rows) if feats_rows else np.empty((0, width))

    rv, naive = [], []
    horizon = 60
    with open(ds / "labels.csv", "r", encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            parts = line.rstrip("\n").split(",")
            horizon = int(parts[1])
            rv.append(float(parts[2]))
            naive.append(float(parts[3]))

    split_d = read_json(ds / "splits.json")
    split = DatasetSplit(
        train=tuple(split_d["train"]),
        val=tuple(split_d["val"]),
        test=tuple(split_d["test"]),
    )
    std_d = read_json(ds / "standardization.json")

    seconds: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    day_ts: dict[str, list[int]] = {}
    day_vwap: dict[str, list[float]] = {}
    with open(ds / "seconds.csv", "r", encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            day, ts_s, vwap = line.rstrip("\n").split(",")
            day_ts.setdefault(day, []).append(int(ts_s))
            day_vwap.setdefault(day, []).append(float(vwap))
    for day in day_ts:
        seconds[day] = (np.array(day_ts[day]), np.array(day_vwap[day]))

    return SampleStore(
        images=images,
        features=features,
        rv=np.array(rv),
        naive_rv=np.array(naive),
        window_start_s=np.array(starts, dtype=np.int64),
        horizon_s=horizon,
        day_ids=np.array(manifest["day_ids"]),
        split=split,
        feat_mean=np.array(std_d["mean"]),
        feat_std=np.array(std_d["std"]),
        seconds=seconds,
        manifest=manifest,
        params=params_from_dict(manifest["params"]),
    )


def default_catalog_for(params: EncodingParams) -> FeatureCatalog:
    return default_catalog(params)
