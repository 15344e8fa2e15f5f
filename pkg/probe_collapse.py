"""Scratch diagnostic: watch branch A die during training."""
import numpy as np

from camloc import (
    DatasetConfig, ModelConfig, TrainConfig, Tensor,
    backward, dual_branch_loss, forward, generate_dataset, init_model, sgd_step,
)
from camloc.model import backbone_forward, head_forward
from camloc.tensor import no_grad, relu, conv2d

cfg = DatasetConfig(train_samples=600, test_samples=100, seed=7)
tr, te = generate_dataset(cfg)
params = init_model(ModelConfig(num_classes=4, seed=7))
trainable = params.trainable()
rng = np.random.default_rng(7)
probe = tr[:64]

def diagnose(tag):
    with no_grad():
        logits_a, logits_b, h1_alive, feat_std, guide_means = [], [], [], [], []
        for s in probe:
            art = forward(params, s.image, guide_class=s.label)
            logits_a.append(art.logits_a.data)
            logits_b.append(art.logits_b.data)
            feats = art.features.data
            feat_std.append(feats.std())
            h1 = relu(conv2d(art.features, params["branch_a.conv1.weight"], params["branch_a.conv1.bias"], pad=1))
            h1_alive.append((h1.data > 0).mean())
            guide_means.append(art.guidance.values.mean())
        la = np.array(logits_a); lb = np.array(logits_b)
        # how much do A's logits vary across samples (dead head -> ~0)
        print(f"{tag}: A_logit_spread={la.std(axis=0).mean():.4f} B_logit_spread={lb.std(axis=0).mean():.4f} "
              f"A_head_alive={np.mean(h1_alive):.3f} feat_std={np.mean(feat_std):.4f} guide_mean={np.mean(guide_means):.3f}",
              flush=True)

diagnose("init")
for epoch in range(8):
    order = rng.permutation(len(tr))
    hits_a = hits_b = 0
    loss_sum = 0.0
    for start in range(0, len(order), 4):
        chunk = order[start : start + 4]
        for idx in chunk:
            s = tr[idx]
            art = forward(params, s.image, guide_class=s.label)
            loss = dual_branch_loss(art.logits_a, art.logits_b, s.label)
            loss_sum += float(loss.data)
            hits_a += int(np.argmax(art.logits_a.data)) == s.label
            hits_b += int(np.argmax(art.logits_b.data)) == s.label
            backward(loss)
        for p in trainable:
            p.grad *= np.float32(1 / len(chunk))
        sgd_step(trainable, 0.05)
    print(f"epoch {epoch}: loss={loss_sum/len(tr):.4f} accA={hits_a/len(tr):.3f} accB={hits_b/len(tr):.3f}", flush=True)
    diagnose(f"  after {epoch}")
