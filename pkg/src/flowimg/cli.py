"""Command-line pipeline orchestration.

Subcommands: synth, ingest, encode, featurize, dataset, train, predict,
eval, inspect. Exit codes: 0 success, 2 usage error, 3 data error,
4 internal invariant violation. Every failure prints one line to stderr:
"<ErrorClass>: <message>".

Each output directory receives a manifest.json (config hash + input
hashes) and an effective_config.json (defaults, config-file values, and
flags merged, flags winning). A command whose output directory already
holds a manifest for the same config and inputs exits 0 without
rebuilding; --force rebuilds. Relative input paths that do not start
with "." resolve under $FLOWIMG_DATA_DIR when it is set.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .dataset import (
    day_dirs_under,
    day_input_files,
    load_day_dir,
    load_dataset,
    write_dataset,
)
from .encoder import EncodingParams, build_window, walk_forward_images, window_starts
from .errors import DataError, FlowimgError, UsageError
from .evaluate import EvalReport, render_table, rmspe, score_split
from .features import catalog_from_manifest, compute_features, default_catalog
from .labeler import build_day_samples
from .manifest import config_hash, read_json, sha256_file, write_json, write_manifest
from .marketdata import parse_depth, parse_trades, serialize_depth, serialize_trades
from .models import TrainConfig, train_cnn_aggr, train_mlp, train_naive_cnn
from .pngio import write_rgb_png
from .predictors import (
    CnnAggrPredictor,
    CnnPredictor,
    GarchPredictor,
    MODEL_KINDS,
    MlpPredictor,
    NaivePredictor,
    load_predictor,
    save_model_checkpoint,
    train_garch_on_store,
)
from .synth import RegimeSpec, SynthConfig, gen_synthetic_flow, regime_switching_config
from .tensorio import write_tensor

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

PARAM_FIELDS = ("n", "m", "t_unit", "v_unit", "pad", "clip_q", "epsilon_s")


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so main() owns exit codes."""

    def error(self, message: str):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# shared plumbing


def _resolve(path_str: str) -> Path:
    path = Path(path_str).expanduser()
    if path.is_absolute() or path_str.startswith("."):
        return path
    root = os.environ.get("FLOWIMG_DATA_DIR")
    if root:
        return Path(root) / path
    return path


def _merge_config(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags. Flags parse with None
    defaults so an untouched flag is distinguishable from an explicit one."""
    merged = dict(defaults)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        try:
            file_cfg = read_json(_resolve(cfg_path))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {cfg_path}: {exc}") from exc
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        merged.update(file_cfg)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _params_from_config(cfg: dict) -> EncodingParams:
    return EncodingParams(
        n=int(cfg["n"]), m=int(cfg["m"]), t_unit=int(cfg["t_unit"]),
        v_unit=float(cfg["v_unit"]), pad=int(cfg["pad"]),
        clip_q=float(cfg["clip_q"]), epsilon_s=int(cfg["epsilon_s"]),
    )


def _add_param_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--n", type=int, help="image columns (seconds axis)")
    sub.add_argument("--m", type=int, help="image rows (price axis)")
    sub.add_argument("--t-unit", dest="t_unit", type=int, help="seconds per column")
    sub.add_argument("--v-unit", dest="v_unit", type=float, help="price per row")
    sub.add_argument("--pad", type=int, help="half-width of the trade square")
    sub.add_argument("--clip-q", dest="clip_q", type=float,
                     help="trade-channel clip quantile in (0,1]")
    sub.add_argument("--epsilon-s", dest="epsilon_s", type=int,
                     help="stride between window starts, seconds")
    sub.add_argument("--horizon-s", dest="horizon_s", type=int,
                     help="label horizon, seconds")


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--force", action="store_true",
                     help="rebuild even if the output is up to date")
    sub.add_argument("--jobs", type=int, default=None,
                     help="worker processes for per-day stages "
                          "(default: logical processors)")


ENCODING_DEFAULTS = {
    "n": 240, "m": 240, "t_unit": 1, "v_unit": 1.0,
    "pad": 1, "clip_q": 0.99, "epsilon_s": 10, "horizon_s": 60,
}

TRAIN_DEFAULTS = {
    "seed": 0, "epochs": 30, "batch_size": 32, "lr": 1e-3,
    "momentum": 0.9, "patience": 5,
}


def _jobs(args: argparse.Namespace) -> int:
    jobs = getattr(args, "jobs", None)
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs < 1:
        raise UsageError(f"--jobs must be >= 1, got {jobs}")
    return jobs


def _pmap(fn, tasks: list, jobs: int) -> list:
    """Ordered map, optionally across processes; order fixes determinism."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def _hash_inputs(paths: dict[str, Path]) -> dict[str, str]:
    return {name: sha256_file(p) for name, p in sorted(paths.items())}


def _day_inputs(day_dirs: Sequence[Path]) -> dict[str, Path]:
    out: dict[str, Path] = {}
    for d in day_dirs:
        for f in day_input_files(d):
            out[f"{d.name}/{f.name}"] = f
    return out


def _up_to_date(out_dir: Path, command: str, config: dict,
                input_hashes: dict[str, str]) -> bool:
    path = out_dir / "manifest.json"
    if not path.exists():
        return False
    try:
        existing = read_json(path)
    except (OSError, json.JSONDecodeError):
        return False
    return (
        existing.get("command") == command
        and existing.get("config_hash") == config_hash(config)
        and existing.get("input_hashes") == input_hashes
    )


def _finish(out_dir: Path, command: str, config: dict,
            input_hashes: dict[str, str], extra: dict | None = None) -> None:
    write_json(out_dir / "effective_config.json", config)
    write_manifest(out_dir, command, config, input_hashes, extra)


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())


# ---------------------------------------------------------------------------
# per-day workers (module level so they pickle under a process pool)


def _catalog_for(params: EncodingParams, catalog_manifest: dict | None):
    if catalog_manifest is None:
        return default_catalog(params)
    return catalog_from_manifest(catalog_manifest, params)


def _samples_task(task):
    day_dir, day_id, params_d, horizon, catalog_manifest = task
    params = _params_from_config(params_d)
    catalog = _catalog_for(params, catalog_manifest)
    day = load_day_dir(day_dir, day_id)
    samples = build_day_samples(
        day.records, day.views, params, catalog, horizon, day_id
    )
    ts = np.array([r.ts_s for r in day.records])
    vwap = np.array([r.vwap for r in day.records])
    return day_id, samples, ts, vwap


def _images_task(task):
    day_dir, day_id, params_d, horizon = task
    params = _params_from_config(params_d)
    day = load_day_dir(day_dir, day_id)
    return day_id, walk_forward_images(day.records, day.views, params, horizon)


def _features_task(task):
    day_dir, day_id, params_d, horizon, catalog_manifest = task
    params = _params_from_config(params_d)
    catalog = _catalog_for(params, catalog_manifest)
    day = load_day_dir(day_dir, day_id)
    day0 = day.records[0].ts_s
    starts = window_starts(day0, len(day.records), params, horizon)
    rows = []
    for start in starts:
        window = build_window(day.records, day.views, start, params)
        rows.append(compute_features(window, catalog).values)
    return day_id, list(starts), rows


def _load_catalog_manifest(args: argparse.Namespace) -> dict | None:
    path = getattr(args, "catalog", None)
    if not path:
        return None
    return read_json(_resolve(path))


# ---------------------------------------------------------------------------
# synth


def _synth_config(cfg: dict) -> SynthConfig:
    profile = cfg["profile"]
    if profile == "flat":
        regimes = (RegimeSpec(
            duration_s=int(cfg["duration"]), sigma=float(cfg["sigma"]),
            trades_per_s=float(cfg["intensity"]),
            mean_trade_size=float(cfg["trade_size"]),
        ),)
        return SynthConfig(regimes=regimes,
                           deterministic=bool(cfg["deterministic"]))
    if profile == "two-regime":
        half = int(cfg["duration"]) // 2
        regimes = (
            RegimeSpec(duration_s=half, sigma=float(cfg["sigma"]) / 4,
                       trades_per_s=float(cfg["intensity"])),
            RegimeSpec(duration_s=int(cfg["duration"]) - half,
                       sigma=float(cfg["sigma"]),
                       trades_per_s=float(cfg["intensity"])),
        )
        return SynthConfig(regimes=regimes,
                           deterministic=bool(cfg["deterministic"]))
    if profile == "switching":
        segment = int(cfg["segment_s"])
        n_segments = max(1, int(cfg["duration"]) // segment)
        base = regime_switching_config(
            n_segments=n_segments, segment_s=segment, seed=int(cfg["seed"]),
        )
        if bool(cfg["deterministic"]):
            raise UsageError("switching profile is stochastic by construction")
        return base
    raise UsageError(f"unknown profile {profile!r}")


SYNTH_DEFAULTS = {
    "seed": 0, "duration": 86400, "profile": "flat", "sigma": 5e-4,
    "intensity": 4.0, "trade_size": 1.0, "segment_s": 600,
    "deterministic": False,
}


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _merge_config(args, SYNTH_DEFAULTS)
    out = _resolve(args.out)
    if not args.force and _up_to_date(out, "synth", cfg, {}):
        print(f"synth: {out} is up to date")
        return EXIT_OK
    trades, snaps = gen_synthetic_flow(_synth_config(cfg), int(cfg["seed"]))
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "trades.csv", serialize_trades(trades))
    _write_text(out / "depth.csv", serialize_depth(snaps))
    _finish(out, "synth", cfg, {}, {
        "n_trades": len(trades), "n_snapshots": len(snaps),
    })
    print(f"synth: wrote {len(trades)} trades, {len(snaps)} snapshots to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# ingest


def cmd_ingest(args: argparse.Namespace) -> int:
    src = _resolve(args.in_path)
    out = _resolve(args.out)
    day_dirs = day_dirs_under(src)
    inputs = _hash_inputs(_day_inputs(day_dirs))
    cfg = {"in": str(args.in_path)}
    if not args.force and _up_to_date(out, "ingest", cfg, inputs):
        print(f"ingest: {out} is up to date")
        return EXIT_OK
    out.mkdir(parents=True, exist_ok=True)
    stats = {}
    for d in day_dirs:
        day_id = d.name
        trades = parse_trades(day_input_files(d)[0])
        snaps = parse_depth(day_input_files(d)[1])
        day_out = out / day_id if len(day_dirs) > 1 else out
        day_out.mkdir(parents=True, exist_ok=True)
        _write_text(day_out / "trades.csv", serialize_trades(trades))
        _write_text(day_out / "depth.csv", serialize_depth(snaps))
        stats[day_id] = {"n_trades": len(trades), "n_snapshots": len(snaps)}
    _finish(out, "ingest", cfg, inputs, {"days": stats})
    print(f"ingest: normalized {len(day_dirs)} day(s) into {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# encode / featurize / dataset


def cmd_encode(args: argparse.Namespace) -> int:
    cfg = _merge_config(args, ENCODING_DEFAULTS)
    cfg["in"] = str(args.in_path)
    src = _resolve(args.in_path)
    out = _resolve(args.out)
    day_dirs = day_dirs_under(src)
    inputs = _hash_inputs(_day_inputs(day_dirs))
    if not args.force and _up_to_date(out, "encode", cfg, inputs):
        print(f"encode: {out} is up to date")
        return EXIT_OK
    params_d = {k: cfg[k] for k in PARAM_FIELDS}
    params = _params_from_config(params_d)
    tasks = [(str(d), d.name, params_d, int(cfg["horizon_s"])) for d in day_dirs]
    results = _pmap(_images_task, tasks, _jobs(args))

    images = [img for _, imgs in results for img in imgs]
    day_ids = [day_id for day_id, imgs in results for _ in imgs]
    tensor = np.empty((len(images), 3, params.m, params.n), dtype=np.float32)
    for i, img in enumerate(images):
        tensor[i] = img.unit_tensor()
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(out / "images.fimg", tensor)

    if args.png_dir:
        png_dir = _resolve(args.png_dir)
        png_dir.mkdir(parents=True, exist_ok=True)
        for day_id, img in zip(day_ids, images):
            name = f"{day_id}_{img.window_start_s:08d}.png"
            write_rgb_png(png_dir / name, img.rgb_bytes())

    _finish(out, "encode", cfg, inputs, {
        "count": len(images),
        "shape": [len(images), 3, params.m, params.n],
        "params": params_d,
        "days": [d.name for d in day_dirs],
        "day_ids": day_ids,
        "v0": [img.v0 for img in images],
        "window_start_s": [img.window_start_s for img in images],
    })
    print(f"encode: wrote {len(images)} images to {out}")
    return EXIT_OK


def cmd_featurize(args: argparse.Namespace) -> int:
    cfg = _merge_config(args, ENCODING_DEFAULTS)
    cfg["in"] = str(args.in_path)
    src = _resolve(args.in_path)
    out = _resolve(args.out)
    day_dirs = day_dirs_under(src)
    inputs = _hash_inputs(_day_inputs(day_dirs))
    catalog_manifest = _load_catalog_manifest(args)
    if catalog_manifest is not None:
        cfg["catalog"] = str(args.catalog)
    if not args.force and _up_to_date(out, "featurize", cfg, inputs):
        print(f"featurize: {out} is up to date")
        return EXIT_OK
    params_d = {k: cfg[k] for k in PARAM_FIELDS}
    params = _params_from_config(params_d)
    catalog = _catalog_for(params, catalog_manifest)
    tasks = [
        (str(d), d.name, params_d, int(cfg["horizon_s"]), catalog_manifest)
        for d in day_dirs
    ]
    results = _pmap(_features_task, tasks, _jobs(args))

    out.mkdir(parents=True, exist_ok=True)
    width = len(catalog.entries)
    lines = ["day_id,window_start_s,"
             + ",".join(f"f_{i:03d}" for i in range(width))]
    total = 0
    for day_id, starts, rows in results:
        for start, vec in zip(starts, rows):
            lines.append(f"{day_id},{start},"
                         + ",".join(repr(float(v)) for v in vec))
            total += 1
    _write_text(out / "features.csv", "\n".join(lines) + "\n")
    write_json(out / "features_manifest.json", catalog.to_manifest())
    _finish(out, "featurize", cfg, inputs, {
        "count": total, "width": width, "catalog_version": catalog.version,
    })
    print(f"featurize: wrote {total} rows x {width} features to {out}")
    return EXIT_OK


def cmd_dataset(args: argparse.Namespace) -> int:
    cfg = _merge_config(args, ENCODING_DEFAULTS)
    cfg["in"] = str(args.in_path)
    src = _resolve(args.in_path)
    out = _resolve(args.out)
    day_dirs = day_dirs_under(src)
    inputs = _hash_inputs(_day_inputs(day_dirs))
    catalog_manifest = _load_catalog_manifest(args)
    if catalog_manifest is not None:
        cfg["catalog"] = str(args.catalog)
    if not args.force and _up_to_date(out, "dataset", cfg, inputs):
        print(f"dataset: {out} is up to date")
        return EXIT_OK
    params_d = {k: cfg[k] for k in PARAM_FIELDS}
    params = _params_from_config(params_d)
    catalog = _catalog_for(params, catalog_manifest)
    horizon = int(cfg["horizon_s"])
    tasks = [
        (str(d), d.name, params_d, horizon, catalog_manifest) for d in day_dirs
    ]
    results = _pmap(_samples_task, tasks, _jobs(args))

    samples = [s for _, day_samples, _, _ in results for s in day_samples]
    day_seconds = [(day_id, ts, vwap) for day_id, _, ts, vwap in results]
    extra = write_dataset(out, day_seconds, samples, params, catalog, horizon)
    _finish(out, "dataset", cfg, inputs, extra)
    print(f"dataset: {extra['count']} samples "
          f"({extra['split_sizes']['train']}/{extra['split_sizes']['val']}"
          f"/{extra['split_sizes']['test']} train/val/test) in {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train / predict / eval


def _train_model(kind: str, store, cfg: TrainConfig):
    """Returns (arrays, extra_meta, metrics, predictor)."""
    train_idx = store.split_indices("train")
    val_idx = store.split_indices("val")
    y_train = store.rv[train_idx]
    y_val = store.rv[val_idx]

    if kind == "naive":
        return {}, {}, {}, NaivePredictor()
    if kind == "garch":
        params = train_garch_on_store(store)
        arrays = {
            "omega": np.float64(params.omega),
            "alpha": np.float64(params.alpha),
            "beta": np.float64(params.beta),
        }
        meta = {"converged": bool(params.converged),
                "loglik": float(params.loglik)}
        return arrays, meta, {}, GarchPredictor(params)
    if kind == "mlp":
        x_train = store.standardized(train_idx)
        x_val = store.standardized(val_idx)
        model, result = train_mlp(x_train, y_train, x_val, y_val, cfg)
        meta = {"in_dim": x_train.shape[1], "label_scale": model.label_scale}
        return model.arrays(), meta, result.as_dict(), MlpPredictor(model)
    if kind == "naive-cnn":
        model, result = train_naive_cnn(
            store.images[train_idx], y_train, store.images[val_idx], y_val, cfg
        )
        meta = {"label_scale": model.label_scale}
        return model.arrays(), meta, result.as_dict(), CnnPredictor(model)
    if kind == "cnn-aggr":
        x_train = store.standardized(train_idx)
        x_val = store.standardized(val_idx)
        model, result = train_cnn_aggr(
            store.images[train_idx], x_train, y_train,
            store.images[val_idx], x_val, y_val, cfg,
        )
        meta = {"n_features": x_train.shape[1],
                "label_scale": model.label_scale}
        return model.arrays(), meta, result.as_dict(), CnnAggrPredictor(model)
    raise UsageError(f"unknown model {kind!r}")


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _merge_config(args, TRAIN_DEFAULTS)
    cfg["model"] = args.model
    cfg["dataset"] = str(args.dataset)
    ds_dir = _resolve(args.dataset)
    out = _resolve(args.out)
    inputs = _hash_inputs({"dataset/manifest.json": ds_dir / "manifest.json"})
    if not args.force and _up_to_date(out, "train", cfg, inputs):
        print(f"train: {out} is up to date")
        return EXIT_OK
    store = load_dataset(ds_dir)
    train_cfg = TrainConfig(
        seed=int(cfg["seed"]), epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch_size"]), lr=float(cfg["lr"]),
        momentum=float(cfg["momentum"]), patience=int(cfg["patience"]),
    )
    arrays, extra_meta, train_metrics, predictor = _train_model(
        args.model, store, train_cfg
    )

    val_idx = store.split_indices("val")
    metrics = dict(train_metrics)
    metrics["val_rmspe_pooled"] = rmspe(
        predictor.predict(store, val_idx), store.rv[val_idx]
    )

    out.mkdir(parents=True, exist_ok=True)
    save_model_checkpoint(
        out / "model.ckpt", args.model, arrays, store,
        train_config=train_cfg.as_dict(), metrics=metrics,
        extra_meta=extra_meta,
    )
    write_json(out / "train_report.json", {
        "model": args.model, "metrics": metrics, **extra_meta,
    })
    _finish(out, "train", cfg, inputs, {"metrics": metrics})
    print(f"train: {args.model} checkpoint in {out} "
          f"(val RMSPE {metrics['val_rmspe_pooled']:.4f})")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    ds_dir = _resolve(args.dataset)
    ckpt = _resolve(args.model_ckpt)
    out = _resolve(args.out)
    cfg = {"model_ckpt": str(args.model_ckpt), "dataset": str(args.dataset),
           "split": args.split}
    inputs = _hash_inputs({
        "model.ckpt": ckpt,
        "dataset/manifest.json": ds_dir / "manifest.json",
    })
    if not args.force and _up_to_date(out, "predict", cfg, inputs):
        print(f"predict: {out} is up to date")
        return EXIT_OK
    store = load_dataset(ds_dir)
    predictor, meta = load_predictor(ckpt, store)
    idx = store.split_indices(args.split)
    preds = predictor.predict(store, idx)

    out.mkdir(parents=True, exist_ok=True)
    lines = ["index,day_id,window_start_s,rv,prediction"]
    for i, p in zip(idx, preds):
        lines.append(
            f"{int(i)},{store.day_ids[i]},{int(store.window_start_s[i])},"
            f"{repr(float(store.rv[i]))},{repr(float(p))}"
        )
    _write_text(out / "predictions.csv", "\n".join(lines) + "\n")
    _finish(out, "predict", cfg, inputs, {
        "model": meta.get("kind"), "split": args.split, "count": len(idx),
    })
    print(f"predict: {len(idx)} predictions ({args.split}) in {out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    ds_dir = _resolve(args.dataset)
    ckpts = [_resolve(c) for c in args.model_ckpt]
    out = _resolve(args.out)
    splits = tuple(s.strip() for s in args.splits.split(",") if s.strip())
    if not splits:
        raise UsageError("--splits must name at least one split")
    cfg = {"model_ckpt": list(args.model_ckpt), "dataset": str(args.dataset),
           "splits": list(splits)}
    input_paths = {"dataset/manifest.json": ds_dir / "manifest.json"}
    for i, c in enumerate(ckpts):
        input_paths[f"model{i}.ckpt"] = c
    inputs = _hash_inputs(input_paths)
    if not args.force and _up_to_date(out, "eval", cfg, inputs):
        print(f"eval: {out} is up to date")
        return EXIT_OK
    store = load_dataset(ds_dir)

    notes = []
    note = store.manifest.get("window_count_note")
    if note:
        notes.append(note)
    reports = []
    for ckpt in ckpts:
        predictor, meta = load_predictor(ckpt, store)
        scores = {}
        for split in splits:
            idx = store.split_indices(split)
            preds = predictor.predict(store, idx)
            scores[split] = score_split(preds, store.rv[idx],
                                        store.day_ids[idx])
        reports.append(EvalReport(
            model_name=str(meta.get("kind")),
            scores=scores,
            config_hash=store.manifest.get("config_hash", ""),
            notes=tuple(notes),
        ))

    table = render_table(reports, splits)
    body = table + "\n"
    for note in notes:
        body += f"\nnote: {note}\n"
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", {
        "reports": [r.as_dict() for r in reports],
        "splits": list(splits),
        "notes": notes,
    })
    _write_text(out / "report.txt", body)
    _finish(out, "eval", cfg, inputs, {
        "models": [r.model_name for r in reports],
    })
    print(body.rstrip())
    return EXIT_OK


# ---------------------------------------------------------------------------
# inspect


def cmd_inspect(args: argparse.Namespace) -> int:
    if args.target != "book":
        raise UsageError(f"unknown inspect target {args.target!r}")
    src = _resolve(args.in_path)
    day = load_day_dir(src)
    lines = []
    for view in day.views:
        ts_s = view.ts_ms // 1000
        if args.at_second is not None and ts_s != args.at_second:
            continue
        for k in range(len(view.prices)):
            row = {
                "ts": int(ts_s),
                "side": "bid" if int(view.sides[k]) < 0 else "ask",
                "price": float(view.prices[k]),
                "size": float(view.sizes[k]),
                "persisted": bool(view.persisted[k]),
            }
            lines.append(json.dumps(row))
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        _write_text(_resolve(args.out), text)
        print(f"inspect: {len(lines)} rows written to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="flowimg",
        description="Order-flow imaging and realized-volatility pipeline.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="subcommand", metavar="subcommand",
                                parser_class=_Parser)

    sp = subs.add_parser("synth",
                         help="generate a synthetic day of trades and depth")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--duration", type=int, help="seconds")
    sp.add_argument("--profile", choices=("flat", "two-regime", "switching"))
    sp.add_argument("--sigma", type=float, help="per-second log-return std")
    sp.add_argument("--intensity", type=float, help="trades per second")
    sp.add_argument("--trade-size", dest="trade_size", type=float)
    sp.add_argument("--segment-s", dest="segment_s", type=int,
                    help="switching profile segment length")
    sp.add_argument("--deterministic", action="store_true", default=None,
                    help="alternating-sign returns, fixed trade grid")
    sp.add_argument("--out", required=True)
    _add_common_flags(sp)
    sp.set_defaults(func=cmd_synth)

    sp = subs.add_parser("ingest",
                         help="parse, validate, and re-serialize raw days")
    sp.add_argument("--in", dest="in_path", required=True)
    sp.add_argument("--out", required=True)
    _add_common_flags(sp)
    sp.set_defaults(func=cmd_ingest)

    sp = subs.add_parser("encode",
                         help="walk-forward order-flow images for each day")
    sp.add_argument("--in", dest="in_path", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--png-dir", dest="png_dir",
                    help="also dump one PNG per window")
    _add_param_flags(sp)
    _add_common_flags(sp)
    sp.set_defaults(func=cmd_encode)

    sp = subs.add_parser("featurize",
                         help="aggregated per-window feature vectors")
    sp.add_argument("--in", dest="in_path", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--catalog", help="feature catalog manifest JSON")
    _add_param_flags(sp)
    _add_common_flags(sp)
    sp.set_defaults(func=cmd_featurize)

    sp = subs.add_parser("dataset",
                         help="materialize images, features, labels, splits")
    sp.add_argument("--in", dest="in_path", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--catalog", help="feature catalog manifest JSON")
    _add_param_flags(sp)
    _add_common_flags(sp)
    sp.set_defaults(func=cmd_dataset)

    sp = subs.add_parser("train",
                         help="fit a predictor on the train split")
    sp.add_argument("--model", required=True, choices=MODEL_KINDS)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", dest="batch_size", type=int)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--momentum", type=float)
    sp.add_argument("--patience", type=int)
    _add_common_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = subs.add_parser("predict",
                         help="write predictions for one split")
    sp.add_argument("--model-ckpt", dest="model_ckpt", required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--split", default="test",
                    choices=("train", "val", "test"))
    sp.add_argument("--out", required=True)
    _add_common_flags(sp)
    sp.set_defaults(func=cmd_predict)

    sp = subs.add_parser("eval",
                         help="per-day RMSPE report over splits")
    sp.add_argument("--model-ckpt", dest="model_ckpt", action="append",
                    required=True, help="repeatable")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--splits", default="val,test")
    sp.add_argument("--out", required=True)
    _add_common_flags(sp)
    sp.set_defaults(func=cmd_eval)

    sp = subs.add_parser("inspect",
                         help="debug dumps (inspect book)")
    sp.add_argument("target", choices=("book",))
    sp.add_argument("--in", dest="in_path", required=True)
    sp.add_argument("--at-second", dest="at_second", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_inspect)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            print("UsageError: a subcommand is required", file=sys.stderr)
            return EXIT_USAGE
        return int(args.func(args) or EXIT_OK)
    except UsageError as exc:
        print(f"UsageError: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FlowimgError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # internal invariant violation
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
