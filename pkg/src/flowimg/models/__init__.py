from .checkpoint import load_checkpoint, save_checkpoint
from .garch import (
    GarchParams,
    garch_fit,
    garch_forecast,
    forecast_variances,
    simulate_garch11,
    variance_path,
    variances_from_first_step,
)
from .nets import CnnAggr, CnnTrunk, Mlp, NaiveCnn, naive_predict
from .training import (
    TrainConfig,
    TrainResult,
    mspe_loss,
    softplus_inverse,
    train_cnn_aggr,
    train_mlp,
    train_naive_cnn,
)

__all__ = [
    "CnnAggr", "CnnTrunk", "GarchParams", "Mlp", "NaiveCnn", "TrainConfig",
    "TrainResult", "forecast_variances", "garch_fit", "garch_forecast",
    "load_checkpoint", "mspe_loss", "naive_predict", "save_checkpoint",
    "simulate_garch11", "softplus_inverse", "train_cnn_aggr", "train_mlp",
    "train_naive_cnn", "variance_path", "variances_from_first_step",
]
