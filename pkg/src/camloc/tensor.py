"""Minimal dense-tensor core with reverse-mode automatic differentiation.

Float32 throughout, numpy-backed, covering exactly the operators the
two-branch localization model needs. Ops allocate fresh outputs and never
write to their inputs; gradients accumulate into ``.grad`` across backward
calls until an optimizer step clears them.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_grad_state = threading.local()


def grad_tracking_enabled() -> bool:
    return getattr(_grad_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording, e.g. for evaluation forward passes."""
    previous = grad_tracking_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


class Tensor:
    """Dense float32 array with optional gradient tracking.

    ``grad`` appears after :func:`backward` and keeps accumulating across
    calls (supporting per-sample batch accumulation) until cleared by
    :func:`sgd_step`.
    """

    __slots__ = ("data", "grad", "grad_enabled", "_parents", "_backward_fn")

    def __init__(self, data, grad_enabled: bool = False):
        arr = np.asarray(data, dtype=np.float32)
        if arr.ndim > 0 and not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)  # keep 0-d scalars 0-d
        self.data = arr
        self.grad: np.ndarray | None = None
        self.grad_enabled = bool(grad_enabled)
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __repr__(self) -> str:
        flag = ", grad" if self.grad_enabled else ""
        return f"Tensor(shape={list(self.shape)}{flag})"


class ComputationRecord:
    """Operations reachable from a root tensor, in topological order.

    Every node appears after the producers of its inputs, so replaying the
    list in reverse applies the chain rule.
    """

    def __init__(self, root: Tensor):
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.grad_enabled:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        self.steps = order


def _record(out: Tensor, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    if grad_tracking_enabled() and any(p.grad_enabled for p in parents):
        out.grad_enabled = True
        out._parents = parents
        out._backward_fn = backward_fn
    return out


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every grad-enabled ancestor of a scalar loss."""
    if loss.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {list(loss.shape)}")
    if not loss.grad_enabled:
        return
    record = ComputationRecord(loss)
    _accumulate(loss, np.ones_like(loss.data))
    for node in reversed(record.steps):
        if node._backward_fn is None or node.grad is None:
            continue
        grads = node._backward_fn(node.grad)
        for parent, grad in zip(node._parents, grads):
            if parent.grad_enabled and grad is not None:
                _accumulate(parent, grad)


def sgd_step(params, lr: float) -> None:
    """Vanilla gradient step ``p <- p - lr * grad``; clears grads after."""
    if lr < 0:
        raise ValueError(f"learning rate must be non-negative, got {lr}")
    params = list(params)
    for p in params:
        if p.grad is None:
            raise ValueError(f"parameter {p!r} has no gradient; run backward first")
    for p in params:
        p.data = (p.data - np.float32(lr) * p.grad).astype(np.float32, copy=False)
        p.grad = None


# ---------------------------------------------------------------------------
# operators


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"add shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data + b.data)
    return _record(out, (a, b), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"mul shape mismatch: {a.shape} vs {b.shape}")
    out = Tensor(a.data * b.data)

    def bwd(g):
        return (g * b.data, g * a.data)

    return _record(out, (a, b), bwd)


def tensor_sum(x: Tensor) -> Tensor:
    """Sum of all elements, accumulated in float64, returned as a scalar."""
    out = Tensor(np.float32(x.data.sum(dtype=np.float64)))

    def bwd(g):
        return (np.full(x.shape, np.float32(g), dtype=np.float32),)

    return _record(out, (x,), bwd)


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x); the subgradient at 0 is taken as 0."""
    out = Tensor(np.maximum(x.data, 0.0))
    mask = x.data > 0

    def bwd(g):
        return (g * mask,)

    return _record(out, (x,), bwd)


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor, stride: int = 1, pad: int = 0) -> Tensor:
    """2-d cross-correlation of a (Cin,H,W) input with a (Cout,Cin,kh,kw) kernel.

    Zero padding; output spatial size (H + 2*pad - kh)//stride + 1.
    """
    if x.ndim != 3 or kernel.ndim != 4 or bias.ndim != 1:
        raise ValueError(
            f"conv2d expects input (Cin,H,W), kernel (Cout,Cin,kh,kw), bias (Cout); "
            f"got {x.shape}, {kernel.shape}, {bias.shape}"
        )
    cin, h, w = x.shape
    cout, kcin, kh, kw = kernel.shape
    if kcin != cin:
        raise ValueError(
            f"channel mismatch: input has {cin} channels (shape {x.shape}) but "
            f"kernel expects {kcin} (shape {kernel.shape})"
        )
    if bias.shape != (cout,):
        raise ValueError(f"bias shape {bias.shape} does not match {cout} output channels")
    if stride < 1 or pad < 0:
        raise ValueError(f"invalid stride/pad: {stride}, {pad}")
    if kh > h + 2 * pad or kw > w + 2 * pad:
        raise ValueError(f"kernel {kh}x{kw} larger than padded input {h + 2 * pad}x{w + 2 * pad}")

    out_h = (h + 2 * pad - kh) // stride + 1
    out_w = (w + 2 * pad - kw) // stride + 1
    xp = np.pad(x.data, ((0, 0), (pad, pad), (pad, pad))) if pad else x.data
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    cols = windows.transpose(0, 3, 4, 1, 2).reshape(cin * kh * kw, out_h * out_w)
    kmat = kernel.data.reshape(cout, cin * kh * kw)
    out_data = (kmat @ cols).reshape(cout, out_h, out_w) + bias.data[:, None, None]
    out = Tensor(out_data)

    def bwd(g):
        gmat = g.reshape(cout, out_h * out_w)
        g_kernel = (gmat @ cols.T).reshape(kernel.shape)
        g_bias = g.sum(axis=(1, 2))
        g_cols = (kmat.T @ gmat).reshape(cin, kh, kw, out_h, out_w)
        g_xp = np.zeros((cin, h + 2 * pad, w + 2 * pad), dtype=np.float32)
        for i in range(kh):
            for j in range(kw):
                g_xp[:, i : i + stride * out_h : stride, j : j + stride * out_w : stride] += g_cols[:, i, j]
        g_x = g_xp[:, pad : pad + h, pad : pad + w] if pad else g_xp
        return (g_x, g_kernel, g_bias)

    return _record(out, (x, kernel, bias), bwd)


def maxpool2d(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; gradient routes to the first max in
    row-major window order on ties."""
    if x.ndim != 3:
        raise ValueError(f"maxpool2d expects (C,H,W), got {x.shape}")
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ValueError(f"maxpool2d requires even spatial dims, got {h}x{w}")
    oh, ow = h // 2, w // 2
    windows = x.data.reshape(c, oh, 2, ow, 2).transpose(0, 1, 3, 2, 4).reshape(c, oh, ow, 4)
    idx = windows.argmax(axis=-1)
    out = Tensor(np.take_along_axis(windows, idx[..., None], axis=-1)[..., 0])

    def bwd(g):
        g_windows = np.zeros_like(windows)
        np.put_along_axis(g_windows, idx[..., None], g[..., None], axis=-1)
        g_x = g_windows.reshape(c, oh, ow, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h, w)
        return (g_x,)

    return _record(out, (x,), bwd)


def global_avg_pool(x: Tensor) -> Tensor:
    """Per-channel spatial mean: (C,H,W) -> (C,)."""
    if x.ndim != 3:
        raise ValueError(f"global_avg_pool expects (C,H,W), got {x.shape}")
    c, h, w = x.shape
    out = Tensor(x.data.mean(axis=(1, 2)))

    def bwd(g):
        scale = np.float32(1.0 / (h * w))
        return (np.broadcast_to((g * scale)[:, None, None], (c, h, w)).copy(),)

    return _record(out, (x,), bwd)


def broadcast_mul_channels(features: Tensor, mask: Tensor) -> Tensor:
    """Scale every channel of (K,H,W) features by a (H,W) map.

    The map is treated as a constant during backprop: complement and
    threshold guidance masks are not differentiated through.
    """
    if features.ndim != 3 or mask.ndim != 2:
        raise ValueError(f"expected (K,H,W) features and (H,W) map, got {features.shape}, {mask.shape}")
    if features.shape[1:] != mask.shape:
        raise ValueError(f"spatial shape mismatch: features {features.shape} vs map {mask.shape}")
    mask_data = mask.data
    out = Tensor(features.data * mask_data[None])

    def bwd(g):
        return (g * mask_data[None],)

    return _record(out, (features,), bwd)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax of a 1-d array (max subtraction)."""
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_cross_entropy(logits: Tensor, label: int) -> Tensor:
    """Negative log-likelihood of ``label`` under softmax(logits); scalar."""
    if logits.ndim != 1:
        raise ValueError(f"softmax_cross_entropy expects 1-d logits, got {logits.shape}")
    n = logits.shape[0]
    if not 0 <= label < n:
        raise IndexError(f"label {label} out of range for {n} classes")
    z = logits.data - logits.data.max()
    e = np.exp(z)
    total = e.sum()
    out = Tensor(np.float32(np.log(total) - z[label]))
    probs = e / total

    def bwd(g):
        grad = probs.copy()
        grad[label] -= 1.0
        return (grad * np.float32(g),)

    return _record(out, (logits,), bwd)


def bilinear_upsample(m: Tensor, out_h: int, out_w: int) -> Tensor:
    """Align-corners bilinear interpolation of a (h,w) map to (out_h,out_w).

    Upsampling only: out_h >= h and out_w >= w. Outputs are convex
    combinations of inputs, so values stay within [min(m), max(m)].
    """
    if m.ndim != 2:
        raise ValueError(f"bilinear_upsample expects a 2-d map, got {m.shape}")
    h, w = m.shape
    if out_h < h or out_w < w:
        raise ValueError(f"cannot shrink {h}x{w} to {out_h}x{out_w}")

    def axis_coords(n_in: int, n_out: int):
        if n_in == 1 or n_out == 1:
            return np.zeros(n_out, dtype=np.intp), np.zeros(n_out, dtype=np.float32)
        src = np.arange(n_out, dtype=np.float64) * (n_in - 1) / (n_out - 1)
        i0 = np.minimum(np.floor(src).astype(np.intp), n_in - 2)
        return i0, (src - i0).astype(np.float32)

    y0, fy = axis_coords(h, out_h)
    x0, fx = axis_coords(w, out_w)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = fy[:, None]
    wx = fx[None, :]
    d = m.data
    out_data = (
        d[np.ix_(y0, x0)] * (1 - wy) * (1 - wx)
        + d[np.ix_(y0, x1)] * (1 - wy) * wx
        + d[np.ix_(y1, x0)] * wy * (1 - wx)
        + d[np.ix_(y1, x1)] * wy * wx
    )
    out = Tensor(out_data)

    def bwd(g):
        g_m = np.zeros((h, w), dtype=np.float32)
        np.add.at(g_m, (y0[:, None], x0[None, :]), g * (1 - wy) * (1 - wx))
        np.add.at(g_m, (y0[:, None], x1[None, :]), g * (1 - wy) * wx)
        np.add.at(g_m, (y1[:, None], x0[None, :]), g * wy * (1 - wx))
        np.add.at(g_m, (y1[:, None], x1[None, :]), g * wy * wx)
        return (g_m,)

    return _record(out, (m,), bwd)
