"""Order-flow imaging and short-horizon realized-volatility prediction.

The pipeline turns tick-level trades and 20-level depth snapshots into
3-channel order-flow images plus aggregated per-window feature vectors,
labels each window with the realized volatility of the following minute,
and trains/evaluates a small predictor family (last-minute carry-forward,
GARCH(1,1), MLP, a compact CNN, and the CNN with features concatenated
into its head) under a leakage-safe walk-forward protocol.
"""
from .bookstate import BookState, BookView, fold_day
from .dataset import (
    AlignedDay,
    SampleStore,
    build_samples,
    day_dirs_under,
    load_day_dir,
    load_dataset,
    materialize_dataset,
    write_dataset,
)
from .encoder import (
    EncodingParams,
    FlowImage,
    build_window,
    clip_percentile,
    encode_window,
    price_to_row,
    walk_forward_images,
    window_anchor,
    window_count,
    window_starts,
)
from .errors import DataError, FlowimgError, UsageError
from .evaluate import EvalReport, SplitScore, render_table, rmspe, score_split
from .features import (
    CatalogEntry,
    FeatureCatalog,
    FeatureVector,
    N_FEATURES,
    catalog_from_manifest,
    compute_features,
    default_catalog,
)
from .labeler import (
    DatasetSplit,
    RVLabel,
    Sample,
    build_day_samples,
    label_for_window,
    log_returns,
    realized_volatility,
    split_time_ordered,
)
from .marketdata import (
    LobSnapshot,
    OrderFlowWindow,
    SecondRecord,
    Trade,
    align_seconds,
    parse_depth,
    parse_trades,
    serialize_depth,
    serialize_trades,
)
from .models import (
    CnnAggr,
    GarchParams,
    Mlp,
    NaiveCnn,
    TrainConfig,
    garch_fit,
    garch_forecast,
    load_checkpoint,
    save_checkpoint,
    simulate_garch11,
    train_cnn_aggr,
    train_mlp,
    train_naive_cnn,
)
from .pngio import rgb_png_bytes, write_rgb_png
from .predictors import (
    CnnAggrPredictor,
    CnnPredictor,
    GarchPredictor,
    MlpPredictor,
    NaivePredictor,
    load_predictor,
    save_model_checkpoint,
    train_garch_on_store,
)
from .synth import (
    RegimeSpec,
    SynthConfig,
    gen_synthetic_flow,
    regime_switching_config,
    two_regime_config,
)
from .tensorio import read_tensor, tensor_from_bytes, write_tensor

__version__ = "0.1.0"

__all__ = [
    "AlignedDay", "BookState", "BookView", "CatalogEntry", "CnnAggr",
    "CnnAggrPredictor", "CnnPredictor", "DataError", "DatasetSplit",
    "EncodingParams", "EvalReport", "FeatureCatalog", "FeatureVector",
    "FlowImage", "FlowimgError", "GarchParams", "GarchPredictor",
    "LobSnapshot", "Mlp", "MlpPredictor", "N_FEATURES", "NaiveCnn",
    "NaivePredictor", "OrderFlowWindow", "RVLabel", "RegimeSpec", "Sample",
    "SampleStore", "SecondRecord", "SplitScore", "SynthConfig", "Trade",
    "TrainConfig", "UsageError", "align_seconds", "build_day_samples",
    "build_samples", "build_window", "catalog_from_manifest",
    "clip_percentile", "compute_features", "day_dirs_under",
    "default_catalog", "encode_window", "fold_day", "garch_fit",
    "garch_forecast", "gen_synthetic_flow", "label_for_window",
    "load_checkpoint", "load_dataset", "load_day_dir", "load_predictor",
    "log_returns", "materialize_dataset", "parse_depth", "parse_trades",
    "price_to_row", "read_tensor", "realized_volatility",
    "regime_switching_config", "render_table", "rgb_png_bytes", "rmspe",
    "save_checkpoint", "save_model_checkpoint", "score_split",
    "serialize_depth", "serialize_trades", "simulate_garch11",
    "split_time_ordered", "tensor_from_bytes", "train_cnn_aggr",
    "train_garch_on_store", "train_mlp", "train_naive_cnn",
    "two_regime_config", "walk_forward_images", "window_anchor",
    "window_count", "window_starts", "write_dataset", "write_rgb_png",
    "write_tensor",
]
