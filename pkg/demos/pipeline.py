"""Drive the whole pipeline through the command-line interface.

Every subcommand is a plain function of flags to files: synthesize raw
days, bundle them into a dataset, train two predictors, score them, and
read the reports back. Outputs are content-addressed by config, so
rerunning a step with the same inputs is a no-op.
"""
import json
import os
import tempfile
from pathlib import Path

from flowimg.cli import EXIT_OK, main

root = Path(tempfile.mkdtemp())
os.environ["FLOWIMG_DATA_DIR"] = str(root)


def run(*argv: object) -> None:
    cmd = [str(a) for a in argv]
    print(f"$ flowimg {' '.join(cmd)}")
    assert main(cmd) == EXIT_OK


for day, seed in (("d1", 3), ("d2", 4)):
    run("synth", "--out", f"raw/{day}", "--seed", seed, "--duration", 500,
        "--profile", "switching", "--segment-s", 125)
run("dataset", "--in", "raw", "--out", "ds", "--n", 40, "--m", 40)
run("train", "--model", "naive", "--dataset", "ds", "--out", "m_naive")
run("train", "--model", "garch", "--dataset", "ds", "--out", "m_garch")
run("eval", "--model-ckpt", "m_naive", "--model-ckpt", "m_garch",
    "--dataset", "ds", "--splits", "val,test", "--out", "ev")
run("predict", "--model-ckpt", "m_garch", "--dataset", "ds",
    "--split", "test", "--out", "pred")

manifest = json.loads((root / "ds" / "manifest.json").read_text())
print(f"\ndataset: {manifest['n_samples']} samples, "
      f"config {manifest['config_hash'][:12]}")
report = json.loads((root / "ev" / "report.json").read_text())
for r in report["reports"]:
    test = r["splits"]["test"]
    print(f"{r['model']:6s} test rmspe {test['rmspe_mean']:.3f} "
          f"on {test['n_scored']} samples")
head = (root / "pred" / "predictions.csv").read_text().splitlines()
print("predictions.csv:", *head[:3], sep="\n  ")

# a second identical invocation is detected and skipped
run("dataset", "--in", "raw", "--out", "ds", "--n", 40, "--m", 40)
