import numpy as np
import pytest

from flowimg import (
    AlignedDay,
    EncodingParams,
    GarchParams,
    GarchPredictor,
    MlpPredictor,
    NaivePredictor,
    TrainConfig,
    default_catalog,
    load_dataset,
    load_predictor,
    materialize_dataset,
    save_model_checkpoint,
    train_mlp,
    train_naive_cnn,
)
from flowimg.errors import InvalidConfig, LineageMismatch
from flowimg.manifest import write_json
from flowimg.models.garch import variance_path, variances_from_first_step
from flowimg.predictors import (
    MODEL_KINDS,
    CnnPredictor,
    garch_train_returns,
    lineage_of,
)

from conftest import align_day, make_day


@pytest.fixture(scope="module")
def store(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    days = []
    for i, seed in enumerate((11, 12)):
        trades, snaps = make_day(duration=400, seed=seed)
        records, views = align_day(trades, snaps)
        days.append(AlignedDay(day_id=f"d{i}", records=tuple(records),
                               views=tuple(views)))
    params = EncodingParams(n=40, m=40, epsilon_s=10)
    catalog = default_catalog(params)
    summary = materialize_dataset(out, days, params, catalog, 60)
    summary["config_hash"] = "deadbeef"
    write_json(out / "manifest.json", summary)
    return load_dataset(out)


@pytest.fixture(scope="module")
def garch_params():
    return GarchParams(omega=1e-8, alpha=0.05, beta=0.9)


class TestNaive:
    def test_returns_naive_rv(self, store):
        pred = NaivePredictor()
        idx = np.array([0, 5, 10])
        out = pred.predict(store, idx)
        assert np.array_equal(out, store.naive_rv[idx])

    def test_copy_not_view(self, store):
        out = NaivePredictor().predict(store, np.array([0]))
        out[0] = -1.0
        assert store.naive_rv[0] != -1.0


class TestGarch:
    def test_hand_recursion(self, store, garch_params):
        """predict() must equal the recursion written out by hand."""
        p = garch_params
        pred = GarchPredictor(p)
        i = 7
        got = pred.predict(store, np.array([i]))[0]

        day = str(store.day_ids[i])
        ts, vwap = store.seconds[day]
        rr = np.diff(np.log(vwap))
        sig2 = np.empty_like(rr)
        sig2[0] = p.unconditional_variance
        for k in range(1, len(rr)):
            sig2[k] = p.omega + p.alpha * rr[k - 1] ** 2 + p.beta * sig2[k - 1]
        end = int(store.window_start_s[i]) + store.params.window_s
        # last return fully inside the window: vwap[end-1]/vwap[end-2]
        k_last = end - int(ts[0]) - 2
        s = p.omega + p.alpha * rr[k_last] ** 2 + p.beta * sig2[k_last]
        total = 0.0
        # the label's h points span h-1 returns starting at the second
        # post-window step
        for _ in range(store.horizon_s - 1):
            s = p.omega + p.persistence * s
            total += s
        assert got == pytest.approx(np.sqrt(total), rel=1e-10)

    def test_step_indexing_against_module_helpers(self, store, garch_params):
        p = garch_params
        pred = GarchPredictor(p)
        i = 3
        day = str(store.day_ids[i])
        rr, sig2, ts0 = pred._day_paths(store, day)
        assert sig2[0] == p.unconditional_variance
        k_last = int(store.window_start_s[i]) + store.params.window_s - ts0 - 2
        s1 = p.omega + p.alpha * rr[k_last] ** 2 + p.beta * sig2[k_last]
        steps = variances_from_first_step(p, float(s1), store.horizon_s)
        expect = np.sqrt(steps[1:].sum())
        assert pred.predict(store, np.array([i]))[0] == pytest.approx(
            expect, rel=1e-12)

    def test_day_cache_reused(self, store, garch_params):
        pred = GarchPredictor(garch_params)
        pred.predict(store, np.array([0]))
        first = pred._day_cache[str(store.day_ids[0])]
        pred.predict(store, np.array([1]))
        assert pred._day_cache[str(store.day_ids[0])] is first

    def test_train_returns_cut_before_nontrain_windows(self, store):
        rr = garch_train_returns(store)
        # manual reconstruction
        n_train = len(store.split.train)
        w = store.params.window_s
        cut = {}
        for i in range(n_train, store.n_samples):
            d = str(store.day_ids[i])
            end = int(store.window_start_s[i]) + w
            cut[d] = min(cut.get(d, end), end)
        parts = []
        for d in ("d0", "d1"):
            ts, vwap = store.seconds[d]
            if d in cut:
                vwap = vwap[ts < cut[d]]
            if len(vwap) >= 2:
                parts.append(np.diff(np.log(vwap)))
        expect = np.concatenate(parts)
        assert np.array_equal(rr, expect)
        # both days have non-train samples here, so both are truncated
        full = sum(len(v) - 1 for _, v in store.seconds.values())
        assert len(rr) < full


class TestCheckpointRoundTrip:
    def test_mlp_bitwise_prediction(self, store, tmp_path):
        train = store.split_indices("train")
        val = store.split_indices("val")
        model, result = train_mlp(
            store.standardized(train), store.rv[train],
            store.standardized(val), store.rv[val],
            TrainConfig(seed=0, epochs=2, batch_size=16),
        )
        path = tmp_path / "mlp.ckpt"
        save_model_checkpoint(
            path, "mlp", model.arrays(), store,
            train_config={"seed": 0}, metrics=result.as_dict(),
            extra_meta={"in_dim": model.in_dim,
                        "label_scale": model.label_scale},
        )
        pred, meta = load_predictor(path, store)
        assert isinstance(pred, MlpPredictor)
        direct = model.predict(store.standardized(val))
        loaded = pred.predict(store, val)
        assert np.array_equal(direct, loaded)
        assert meta["metrics"]["label_scale"] == model.label_scale

    def test_cnn_bitwise_prediction(self, store, tmp_path):
        train = store.split_indices("train")[:16]
        val = store.split_indices("val")[:8]
        model, _ = train_naive_cnn(
            store.images[train], store.rv[train],
            store.images[val], store.rv[val],
            TrainConfig(seed=0, epochs=1, batch_size=8),
        )
        path = tmp_path / "cnn.ckpt"
        save_model_checkpoint(
            path, "naive-cnn", model.arrays(), store,
            train_config={"seed": 0}, metrics={},
            extra_meta={"label_scale": model.label_scale},
        )
        pred, _ = load_predictor(path, store)
        assert isinstance(pred, CnnPredictor)
        assert np.array_equal(model.predict(store.images[val]),
                              pred.predict(store, val))

    def test_garch_roundtrip(self, store, tmp_path, garch_params):
        p = garch_params
        path = tmp_path / "garch.ckpt"
        save_model_checkpoint(
            path, "garch",
            {"omega": np.array(p.omega), "alpha": np.array(p.alpha),
             "beta": np.array(p.beta)},
            store, train_config={}, metrics={},
        )
        pred, _ = load_predictor(path, store)
        idx = store.split_indices("test")[:5]
        assert np.allclose(pred.predict(store, idx),
                           GarchPredictor(p).predict(store, idx), rtol=1e-15)

    def test_naive_roundtrip(self, store, tmp_path):
        path = tmp_path / "naive.ckpt"
        save_model_checkpoint(path, "naive", {}, store,
                              train_config={}, metrics={})
        pred, meta = load_predictor(path, store)
        assert isinstance(pred, NaivePredictor)
        assert meta["catalog_version"] == "default-1"

    def test_unknown_kind(self, store, tmp_path):
        path = tmp_path / "bad.ckpt"
        save_model_checkpoint(path, "transformer", {}, store,
                              train_config={}, metrics={})
        with pytest.raises(InvalidConfig):
            load_predictor(path, store)


class TestLineage:
    def test_kinds_frozen(self):
        assert MODEL_KINDS == ("naive", "garch", "mlp", "naive-cnn",
                               "cnn-aggr")

    def test_lineage_fields(self, store):
        lin = lineage_of(store)
        assert lin["dataset_config_hash"] == "deadbeef"
        assert lin["train_split_hash"] == store.train_split_hash()

    def test_mismatch_rejected(self, store, tmp_path):
        import copy

        path = tmp_path / "naive.ckpt"
        save_model_checkpoint(path, "naive", {}, store,
                              train_config={}, metrics={})
        # tamper with the store's identity instead of building a second one
        tampered = copy.copy(store)
        tampered.manifest = dict(store.manifest, config_hash="0000")
        with pytest.raises(LineageMismatch):
            load_predictor(path, tampered)
