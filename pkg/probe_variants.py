"""Scratch probe: why is branch A slow? Isolate guidance-leak vs depth effects."""
import sys
import time

import numpy as np

from camloc import (
    DatasetConfig, ModelConfig, TrainConfig, Tensor,
    backward, dual_branch_loss, forward, generate_dataset, init_model, sgd_step,
    softmax_cross_entropy,
)

variant = sys.argv[1]          # ccam | ones | aonly
lr = float(sys.argv[2])
batch = int(sys.argv[3])
epochs = int(sys.argv[4]) if len(sys.argv) > 4 else 6

cfg = DatasetConfig(train_samples=600, test_samples=100, seed=7)
tr, te = generate_dataset(cfg)
params = init_model(ModelConfig(num_classes=4, seed=7))
trainable = params.trainable()
rng = np.random.default_rng(7)
ones = np.ones((8, 8), dtype=np.float32)

print(f"=== variant={variant} lr={lr} batch={batch} epochs={epochs}", flush=True)
for epoch in range(epochs):
    order = rng.permutation(len(tr))
    hits_a = hits_b = 0
    loss_sum = 0.0
    for start in range(0, len(order), batch):
        chunk = order[start : start + batch]
        for idx in chunk:
            s = tr[idx]
            if variant == "ones":
                art = forward(params, s.image, guide_class=s.label, guidance_override=ones)
            else:
                art = forward(params, s.image, guide_class=s.label)
            if variant == "aonly":
                loss = softmax_cross_entropy(art.logits_a, s.label)
            else:
                loss = dual_branch_loss(art.logits_a, art.logits_b, s.label)
            loss_sum += float(loss.data)
            hits_a += int(np.argmax(art.logits_a.data)) == s.label
            hits_b += int(np.argmax(art.logits_b.data)) == s.label
            backward(loss)
        scale = np.float32(1.0 / len(chunk))
        touched = [p for p in trainable if p.grad is not None]
        for p in touched:
            p.grad *= scale
        sgd_step(touched, lr)
    print(f"  epoch {epoch}: loss={loss_sum/len(tr):.4f} accA={hits_a/len(tr):.3f} accB={hits_b/len(tr):.3f}", flush=True)

# quick test-set check of branch A alone
hits = 0
from camloc.tensor import no_grad
with no_grad():
    for s in te:
        art = forward(params, s.image, guide_class=None)
        hits += int(np.argmax(art.logits_a.data)) == s.label
print(f"  test accA: {hits/len(te):.3f}", flush=True)
