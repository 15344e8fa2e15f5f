"""Generate the two-part synthetic objects and write a few to disk: each image
is a class-independent body ellipse plus a class-colored head square, with the
exact union bounding box as ground truth."""

from pathlib import Path

import numpy as np

from camloc import DatasetConfig, generate_dataset, write_annotations, write_ppm

out = Path("demo_out/dataset")
out.mkdir(parents=True, exist_ok=True)

config = DatasetConfig(num_classes=4, train_samples=8, test_samples=4, seed=7)
train_split, test_split = generate_dataset(config)

rows = []
for i, sample in enumerate(train_split):
    name = f"sample_{i:02d}.ppm"
    write_ppm(sample.image, out / name)
    rows.append((name, sample.label, sample.gt_box))
    box = sample.gt_box
    print(
        f"{name}: class {sample.label}, box x[{box.x_min},{box.x_max}) y[{box.y_min},{box.y_max}),"
        f" object fills {100 * box.area / (64 * 64):.0f}% of the frame"
    )

write_annotations(rows, out / "annotations.csv")
print(f"\nwrote {len(rows)} images + annotations.csv to {out}/")

labels = [s.label for s in train_split]
print(f"labels are assigned round-robin: {labels}")
print(f"pixel range: [{train_split[0].image.min():.3f}, {train_split[0].image.max():.3f}]")
print(f"noise ceiling {config.noise_amplitude}: object pixels stand clear of it by design")
