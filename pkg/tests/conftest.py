import numpy as np
import pytest

from flowimg import (
    EncodingParams,
    RegimeSpec,
    SynthConfig,
    align_seconds,
    fold_day,
    gen_synthetic_flow,
)


def make_day(duration=400, sigma=5e-4, intensity=4.0, seed=11,
             deterministic=False, **cfg_kwargs):
    cfg = SynthConfig(
        regimes=(RegimeSpec(duration_s=duration, sigma=sigma,
                            trades_per_s=intensity),),
        deterministic=deterministic,
        **cfg_kwargs,
    )
    return gen_synthetic_flow(cfg, seed)


def align_day(trades, snaps):
    t0 = snaps[0].ts_ms // 1000
    ends = [snaps[-1].ts_ms // 1000 + 1]
    if trades:
        ends.append(trades[-1].ts_ms // 1000 + 1)
    t1 = max(ends)
    records = align_seconds(trades, snaps, t0, t1)
    views = fold_day(snaps, trades, t0, t1)
    return records, views


@pytest.fixture(scope="session")
def day_streams():
    return make_day()


@pytest.fixture(scope="session")
def aligned_day(day_streams):
    trades, snaps = day_streams
    return align_day(trades, snaps)


@pytest.fixture(scope="session")
def small_params():
    return EncodingParams(n=40, m=40, t_unit=1, v_unit=1.0, pad=1,
                          clip_q=0.99, epsilon_s=10)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240301)
