"""Scratch calibration run: training dynamics + localization trend. Not part of the package."""
import sys
import time

import numpy as np

from camloc import (
    DatasetConfig, FusionConfig, ModelConfig, TrainConfig,
    evaluate, generate_dataset, init_model, train,
)

n_train = int(sys.argv[1]) if len(sys.argv) > 1 else 600
n_test = int(sys.argv[2]) if len(sys.argv) > 2 else 150
epochs = int(sys.argv[3]) if len(sys.argv) > 3 else 6
lr = float(sys.argv[4]) if len(sys.argv) > 4 else 0.1

print(f"=== calibrate: {n_train}/{n_test}, epochs={epochs}, lr={lr} ===", flush=True)
cfg = DatasetConfig(train_samples=n_train, test_samples=n_test, seed=7)
tr, te = generate_dataset(cfg)
params = init_model(ModelConfig(num_classes=4, seed=7))
tc = TrainConfig(epochs=epochs, batch_size=int(sys.argv[5]) if len(sys.argv) > 5 else 16, learning_rate=lr, seed=7)

t0 = time.time()
rep = train(params, tr, tc, progress=lambda e, l, a, b: print(f"  epoch {e}: loss={l:.4f} accA={a:.3f} accB={b:.3f}", flush=True))
print(f"train time: {time.time()-t0:.1f}s", flush=True)

for label, kwargs in [
    ("single ", dict(single_branch=True)),
    ("max     ", dict(fusion_config=FusionConfig("max"))),
    ("addition", dict(fusion_config=FusionConfig("addition"))),
    ("l1norm  ", dict(fusion_config=FusionConfig("l1norm"))),
]:
    t0 = time.time()
    r, _ = evaluate(params, te, **kwargs)
    print(f"{label} cls_acc={100-r.top1_cls_err:.1f} gt_known={r.gt_known_loc_acc:.1f} "
          f"top1_loc_err={r.top1_loc_err:.1f} ({time.time()-t0:.0f}s)", flush=True)

r, _ = evaluate(params, te, cam_mode="threshold")
print(f"thr-add  cls_acc={100-r.top1_cls_err:.1f} gt_known={r.gt_known_loc_acc:.1f}", flush=True)
