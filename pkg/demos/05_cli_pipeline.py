"""Drive the whole pipeline through the CLI: generate data, train, run the
guidance-mode x fusion-strategy evaluation grid, and dump visualizations."""

from pathlib import Path

from camloc.cli import main

out = Path("demo_out/pipeline")
config = Path("demo_out/pipeline.cfg")
config.parent.mkdir(parents=True, exist_ok=True)
config.write_text(
    """
[dataset]
train_samples = 200
test_samples = 50
seed = 7

[train]
epochs = 3
batch_size = 4
learning_rate = 0.03
"""
)

print("== gen-data ==")
assert main(["gen-data", "--config", str(config), "--out", str(out)]) == 0

print("\n== train ==")
assert main(["train", "--config", str(config), "--out", str(out)]) == 0

print("\n== eval grid (guidance mode x fusion strategy) ==")
for mode in ("ccam", "threshold"):
    for strategy in ("max", "addition", "l1norm"):
        print(f"\n-- {mode} / {strategy}")
        code = main(
            ["eval", "--config", str(config), "--out", str(out),
             "--cam-mode", mode, "--strategy", strategy]
        )
        assert code == 0

print("\n== visualize sample 0 ==")
assert main(["visualize", "--config", str(config), "--out", str(out), "--sample", "0"]) == 0
print(f"\nheatmaps and the box overlay are in {out}/ (PGM/PPM files)")
