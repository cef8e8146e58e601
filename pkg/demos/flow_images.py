"""Encode order-flow windows into three-channel images.

Each window covers n*t_unit seconds by m*v_unit price units, anchored so
the mid at the window start sits mid-image. Red holds sell volume, green
buy volume (stamped as padded squares), blue the resting book depth.
"""
import tempfile
from pathlib import Path

from flowimg import (
    EncodingParams, RegimeSpec, SynthConfig, align_seconds, build_window,
    encode_window, fold_day, gen_synthetic_flow, walk_forward_images,
    window_anchor, window_starts, write_rgb_png,
)
from flowimg.tensorio import read_tensor, write_tensor

trades, snapshots = gen_synthetic_flow(SynthConfig(regimes=(
    RegimeSpec(duration_s=900, sigma=6e-4, trades_per_s=6.0),
)), seed=5)
records = align_seconds(trades, snapshots, 0, 900)
views = fold_day(snapshots, trades, 0, 900)

params = EncodingParams(n=120, m=120, t_unit=1, v_unit=1.0,
                        pad=1, clip_q=0.99, epsilon_s=10)
starts = window_starts(0, 900, params, horizon_s=60)
print(f"{len(starts)} window starts, stride {params.epsilon_s}s, "
      f"each {params.window_s}s x {params.price_span:.0f} price units")

window = build_window(records, views, starts[30], params)
img = encode_window(window, params)
v0 = window_anchor(window, params)
print(f"window at {window.start_s}s anchored at price {v0:.1f}")

# with point stamps and no clipping, channel sums equal the traded
# volume that falls inside the image's price range
exact = EncodingParams(n=120, m=120, pad=0, clip_q=1.0, epsilon_s=10)
pt = encode_window(window, exact)


def in_range_volume(maker: bool) -> float:
    return sum(t.size for r in window.records for t in r.trades
               if t.buyer_is_maker == maker
               and v0 <= t.price < v0 + exact.price_span)


print(f"pad=0, clip_q=1: green sum {pt.green.sum():.3f} == in-range buy "
      f"volume {in_range_volume(False):.3f}; red sum {pt.red.sum():.3f} "
      f"== in-range sell volume {in_range_volume(True):.3f}")
print(f"blue keeps in-range depth: {pt.blue.sum():.1f}")
# the visual defaults smear each trade over a 3x3 square and clip the
# top percentile so single prints do not wash out the channel
print(f"pad=1, clip_q=0.99: green sum {img.green.sum():.3f}")

# two byte formats: a PNG per image, and one packed float tensor
out = Path(tempfile.mkdtemp())
write_rgb_png(out / "window.png", img.rgb_bytes())
write_tensor(out / "window.fimg", img.unit_tensor())
back = read_tensor(out / "window.fimg")
print(f"png {(out / 'window.png').stat().st_size} bytes; "
      f"tensor round-trips {back.shape} {back.dtype}")

# or encode the whole day in one call
images = walk_forward_images(records, views, params, horizon_s=60)
nonzero = sum(1 for im in images if im.norm_green.any() or im.norm_red.any())
print(f"walk-forward: {len(images)} images, {nonzero} with visible trades")
