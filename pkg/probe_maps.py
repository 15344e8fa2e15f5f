"""Scratch: inspect CAMs/fused maps and box geometry of a trained model."""
import numpy as np

from camloc import (
    DatasetConfig, FusionConfig, ModelConfig, TrainConfig,
    forward, generate_dataset, init_model, train, iou,
)
from camloc.cam import class_map, normalize_minmax
from camloc.fusion import localization_map
from camloc.metrics import extract_bbox
from camloc.tensor import Tensor, bilinear_upsample, no_grad

np.set_printoptions(precision=2, suppress=True, linewidth=160)

cfg = DatasetConfig(train_samples=2000, test_samples=500, seed=7)
tr, te = generate_dataset(cfg)
params = init_model(ModelConfig(num_classes=4, seed=7))
train(params, tr, TrainConfig(epochs=10, batch_size=4, learning_rate=0.02, seed=7),
      progress=lambda e, l, a, b: print(f"epoch {e}: loss={l:.4f} accA={a:.3f} accB={b:.3f}", flush=True))

import pickle
with open("/tmp/trained_params.pkl", "wb") as fh:
    pickle.dump({k: v.data for k, v in params.tensors.items()}, fh)

with no_grad():
    for i in (0, 1, 2):
        s = te[i]
        art = forward(params, s.image, guide_class=None)
        sa, sb = art.score_maps_a.data, art.score_maps_b.data
        cam_a = normalize_minmax(class_map(sa, s.label)).values
        cam_b = normalize_minmax(class_map(sb, s.label)).values
        print(f"\n=== sample {i} label={s.label} guide={art.guide_class} gt={s.gt_box}")
        print("raw A stats: min %.2f max %.2f | raw B stats: min %.2f max %.2f" % (sa[s.label].min(), sa[s.label].max(), sb[s.label].min(), sb[s.label].max()))
        print("cam A (normalized):"); print(cam_a)
        print("cam B (normalized):"); print(cam_b)
        for strat in ("addition", "l1norm"):
            fused = localization_map(sa, sb, s.label, FusionConfig(strat))
            full = bilinear_upsample(Tensor(fused), 64, 64).data
            norm = normalize_minmax(full).values
            box = extract_bbox(norm, 0.2)
            print(f"{strat}: fused min {fused.min():.2f} max {fused.max():.2f} box={box} iou={iou(box, s.gt_box):.3f}")
        single = localization_map(sa, sb, s.label, FusionConfig("addition"), single_branch=True)
        full = bilinear_upsample(Tensor(single), 64, 64).data
        box = extract_bbox(normalize_minmax(full).values, 0.2)
        print(f"single: box={box} iou={iou(box, s.gt_box):.3f}")
