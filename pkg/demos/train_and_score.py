"""Train the image models on a few synthetic days and score them.

Tiny corpus, tiny nets, a couple of epochs: the point is the moving
parts, not the scores. Labels are standardized only through the models'
internal label scale; features are z-scored on train statistics.
"""
import numpy as np

from flowimg import (
    EncodingParams, TrainConfig, align_seconds, build_day_samples, fold_day,
    gen_synthetic_flow, regime_switching_config, rmspe, score_split,
    split_time_ordered, train_cnn_aggr, train_naive_cnn,
)
from flowimg.features import default_catalog

params = EncodingParams(n=40, m=40, epsilon_s=10)
catalog = default_catalog(params)

samples = []
for d in range(6):
    cfg = regime_switching_config(n_segments=3, segment_s=250, seed=40 + d)
    trades, snapshots = gen_synthetic_flow(cfg, seed=80 + d)
    records = align_seconds(trades, snapshots, 0, cfg.duration_s)
    views = fold_day(snapshots, trades, 0, cfg.duration_s)
    samples += build_day_samples(records, views, params, catalog,
                                 horizon_s=60, day_id=f"day{d}")
print(f"{len(samples)} samples across 6 regime-switching days")

images = np.stack([s.image.unit_tensor() for s in samples])
feats = np.stack([s.features.values for s in samples])
y = np.array([s.label.rv for s in samples])
naive = np.array([s.label.naive_rv for s in samples])
days = np.array([s.day_id for s in samples])

split = split_time_ordered(len(samples))
tr, va, te = map(np.array, (split.train, split.val, split.test))

# z-score features on the train split only
mu, sd = feats[tr].mean(axis=0), feats[tr].std(axis=0)
sd[sd == 0] = 1.0
feats = (feats - mu) / sd

cfg = TrainConfig(seed=0, epochs=5, batch_size=32, lr=1e-3, patience=3)
cnn, res_cnn = train_naive_cnn(images[tr], y[tr], images[va], y[va], cfg)
print(f"image-only net: {res_cnn.epochs_run} epochs, "
      f"best val rmspe {res_cnn.best_val_rmspe:.3f}")
aggr, res_aggr = train_cnn_aggr(images[tr], feats[tr], y[tr],
                                images[va], feats[va], y[va], cfg)
print(f"image+feature net: {res_aggr.epochs_run} epochs, "
      f"best val rmspe {res_aggr.best_val_rmspe:.3f}")

# held-out test scores, aggregated per day
scores = {
    "trailing rv baseline": naive[te],
    "image-only net": cnn.predict(images[te]),
    "image+feature net": aggr.predict(images[te], feats[te]),
}
for name, yhat in scores.items():
    sc = score_split(yhat, y[te], days[te])
    print(f"{name:22s} test rmspe {sc.rmspe_mean:.3f} "
          f"(+/- {sc.rmspe_std:.3f} across {len(sc.per_day)} days)")
print("(six days and five epochs rarely beat the trailing baseline; the "
      "nets overtake it with more days, see tests/test_acceptance.py)")

# rmspe is scale-free: rescaling labels and predictions changes nothing
yhat = scores["image-only net"]
assert abs(rmspe(yhat, y[te]) - rmspe(yhat * 1e6, y[te] * 1e6)) < 1e-12
print("rmspe invariant under relabeling to another unit")
