"""Uniform predictor interface over a SampleStore, plus checkpoint glue.

Every predictor exposes `.name` and `.predict(store, idx) -> np.ndarray`.
Checkpoint metadata carries the architecture tag and lineage hashes
(dataset config hash, train split hash); `check_lineage` refuses to score
a model against a store it was not trained on.
"""
from __future__ import annotations

import numpy as np

from .dataset import SampleStore
from .errors import InvalidConfig, LineageMismatch, TooFewSamples
from .models import (
    CnnAggr,
    GarchParams,
    Mlp,
    NaiveCnn,
    garch_fit,
    load_checkpoint,
    save_checkpoint,
    variance_path,
    variances_from_first_step,
)

_PREDICT_BATCH = 64


class NaivePredictor:
    name = "naive"

    def predict(self, store: SampleStore, idx: np.ndarray) -> np.ndarray:
        return store.naive_rv[np.asarray(idx)].copy()


class GarchPredictor:
    """Per-second GARCH variance recursion, forecast over the label horizon.

    The variance path starts each day at the fitted unconditional variance
    (no in-day lookahead). The label's h sample points contain h-1 returns
    and exclude the first post-window return, so the forecast sums step
    variances 2..h.
    """

    name = "garch"

    def __init__(self, params: GarchParams) -> None:
        self.params = params
        self._day_cache: dict[str, tuple[np.ndarray, np.ndarray, int]] = {}

    def _day_paths(self, store: SampleStore, day: str):
        cached = self._day_cache.get(day)
        if cached is not None:
            return cached
        ts, vwap = store.seconds[day]
        rr = np.diff(np.log(vwap))
        sig2 = variance_path(
            self.params.omega, self.params.alpha, self.params.beta, rr,
            sigma2_0=self.params.unconditional_variance,
        )
        entry = (rr, sig2, int(ts[0]))
        self._day_cache[day] = entry
        return entry

    def predict(self, store: SampleStore, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx)
        out = np.empty(len(idx))
        w = store.params.window_s
        h = store.horizon_s
        for j, i in enumerate(idx):
            day = str(store.day_ids[i])
            rr, sig2, ts0 = self._day_paths(store, day)
            k_last = int(store.window_start_s[i]) + w - ts0 - 2
            if k_last < 0 or k_last >= len(rr):
                raise InvalidConfig(f"sample {i} window end outside day {day}")
            s1 = (
                self.params.omega
                + self.params.alpha * rr[k_last] ** 2
                + self.params.beta * sig2[k_last]
            )
            steps = variances_from_first_step(self.params, float(s1), h)
            out[j] = np.sqrt(steps[1:].sum())
        return out


class MlpPredictor:
    name = "mlp"

    def __init__(self, model: Mlp) -> None:
        self.model = model

    def predict(self, store: SampleStore, idx: np.ndarray) -> np.ndarray:
        return self.model.predict(store.standardized(idx))


class CnnPredictor:
    name = "naive-cnn"

    def __init__(self, model: NaiveCnn) -> None:
        self.model = model

    def predict(self, store: SampleStore, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx)
        parts = [
            self.model.predict(store.images[idx[lo : lo + _PREDICT_BATCH]])
            for lo in range(0, len(idx), _PREDICT_BATCH)
        ]
        return np.concatenate(parts) if parts else np.empty(0)


class CnnAggrPredictor:
    name = "cnn-aggr"

    def __init__(self, model: CnnAggr) -> None:
        self.model = model

    def predict(self, store: SampleStore, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx)
        parts = []
        for lo in range(0, len(idx), _PREDICT_BATCH):
            sel = idx[lo : lo + _PREDICT_BATCH]
            parts.append(self.model.predict(
                store.images[sel], store.standardized(sel)
            ))
        return np.concatenate(parts) if parts else np.empty(0)


MODEL_KINDS = ("naive", "garch", "mlp", "naive-cnn", "cnn-aggr")


def garch_train_returns(store: SampleStore) -> np.ndarray:
    """Pooled per-second vwap log returns from the train span only.

    Each day contributes returns strictly before the earliest prediction
    time of any non-train sample on that day (its window end), so the fit
    never sees data the validation or test forecasts could not.
    """
    n_train = len(store.split.train)
    if n_train == 0:
        raise TooFewSamples("empty train split")
    w = store.params.window_s
    cut: dict[str, int] = {}
    for i in range(n_train, store.n_samples):
        day = str(store.day_ids[i])
        end_s = int(store.window_start_s[i]) + w
        if day not in cut or end_s < cut[day]:
            cut[day] = end_s
    parts = []
    seen: set[str] = set()
    for i in range(n_train):
        day = str(store.day_ids[i])
        if day in seen:
            continue
        seen.add(day)
        ts, vwap = store.seconds[day]
        if day in cut:
            vwap = vwap[ts < cut[day]]
        if len(vwap) >= 2:
            parts.append(np.diff(np.log(vwap)))
    if not parts:
        raise TooFewSamples("train span has no return history")
    return np.concatenate(parts)


def train_garch_on_store(store: SampleStore) -> GarchParams:
    return garch_fit(garch_train_returns(store))


def lineage_of(store: SampleStore) -> dict:
    return {
        "dataset_config_hash": store.manifest.get("config_hash", ""),
        "train_split_hash": store.train_split_hash(),
    }


def check_lineage(meta: dict, store: SampleStore) -> None:
    expected = lineage_of(store)
    got = meta.get("lineage", {})
    if got != expected:
        raise LineageMismatch(
            f"checkpoint lineage {got} does not match dataset {expected}"
        )


def save_model_checkpoint(
    path,
    kind: str,
    arrays: dict[str, np.ndarray],
    store: SampleStore,
    train_config: dict,
    metrics: dict,
    extra_meta: dict | None = None,
) -> None:
    meta = {
        "kind": kind,
        "lineage": lineage_of(store),
        "train_config": train_config,
        "metrics": metrics,
        "catalog_version": store.manifest.get("catalog_version", ""),
    }
    if extra_meta:
        meta.update(extra_meta)
    save_checkpoint(path, arrays, meta)


def load_predictor(path, store: SampleStore):
    """Rebuild a predictor from a checkpoint, enforcing lineage."""
    arrays, meta = load_checkpoint(path)
    check_lineage(meta, store)
    kind = meta.get("kind")
    if kind == "naive":
        return NaivePredictor(), meta
    if kind == "garch":
        params = GarchParams(
            omega=float(arrays["omega"]),
            alpha=float(arrays["alpha"]),
            beta=float(arrays["beta"]),
        )
        return GarchPredictor(params), meta
    if kind == "mlp":
        model = Mlp(in_dim=int(meta["in_dim"]), seed=0)
        model.load_arrays(arrays)
        model.label_scale = float(meta["label_scale"])
        return MlpPredictor(model), meta
    if kind == "naive-cnn":
        model = NaiveCnn(seed=0)
        model.load_arrays(arrays)
        model.label_scale = float(meta["label_scale"])
        return CnnPredictor(model), meta
    if kind == "cnn-aggr":
        model = CnnAggr(n_features=int(meta["n_features"]), seed=0)
        model.load_arrays(arrays)
        model.label_scale = float(meta["label_scale"])
        return CnnAggrPredictor(model), meta
    raise InvalidConfig(f"unknown model kind {kind!r}")
