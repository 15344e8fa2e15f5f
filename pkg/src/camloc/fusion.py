"""Fusion strategies combining the two branches' maps into one localization map.

Three strategies: pointwise max (erasing-baseline behaviour), pointwise
addition, and activity-weighted blending where each branch's weight at a
pixel is its share of the block-averaged channel-wise l1 activity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cam import CamMap, class_map, normalize_minmax

STRATEGIES = ("max", "addition", "l1norm")


@dataclass
class FusionConfig:
    strategy: str = "addition"
    block_radius: int = 1

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown fusion strategy '{self.strategy}'; valid strategies: {', '.join(STRATEGIES)}"
            )
        if self.block_radius < 0:
            raise ValueError(f"block radius must be >= 0, got {self.block_radius}")


def fuse_max(a: CamMap, b: CamMap) -> np.ndarray:
    """Pointwise maximum of two maps."""
    if a.values.shape != b.values.shape:
        raise ValueError(f"shape mismatch: {a.values.shape} vs {b.values.shape}")
    return np.maximum(a.values, b.values)


def fuse_addition(a: CamMap, b: CamMap) -> np.ndarray:
    """Pointwise sum of two maps."""
    if a.values.shape != b.values.shape:
        raise ValueError(f"shape mismatch: {a.values.shape} vs {b.values.shape}")
    return a.values + b.values


def activity_map(score_maps: np.ndarray) -> np.ndarray:
    """Channel-wise l1 norm of (C,h,w) score maps: sum of |f_c| over classes."""
    arr = np.asarray(score_maps, dtype=np.float32)
    if arr.ndim != 3:
        raise ValueError(f"score maps must be (C,h,w), got shape {arr.shape}")
    return np.abs(arr).sum(axis=0, dtype=np.float64).astype(np.float32)


def block_average(values: np.ndarray, radius: int) -> np.ndarray:
    """Mean over a (2r+1)x(2r+1) window centered at each pixel.

    Out-of-bounds terms contribute zero and the divisor stays (2r+1)^2
    even at the borders.
    """
    if radius < 0:
        raise ValueError(f"block radius must be >= 0, got {radius}")
    arr = np.asarray(values, dtype=np.float32)
    if radius == 0:
        return arr.copy()
    h, w = arr.shape
    padded = np.pad(arr.astype(np.float64), radius)
    acc = np.zeros((h, w), dtype=np.float64)
    side = 2 * radius + 1
    for dy in range(side):
        for dx in range(side):
            acc += padded[dy : dy + h, dx : dx + w]
    return (acc / side**2).astype(np.float32)


def fusion_weights(a_activity: np.ndarray, b_activity: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel weight of each branch: its share of the total activity.

    Where the total activity is zero the weights default to (0.5, 0.5).
    """
    ma = np.asarray(a_activity, dtype=np.float32)
    mb = np.asarray(b_activity, dtype=np.float32)
    if ma.shape != mb.shape:
        raise ValueError(f"shape mismatch: {ma.shape} vs {mb.shape}")
    if (ma < 0).any() or (mb < 0).any():
        raise ValueError("activity maps must be non-negative")
    denom = ma + mb
    safe = np.where(denom > 0, denom, np.float32(1.0))
    wa = np.where(denom > 0, ma / safe, np.float32(0.5)).astype(np.float32)
    wb = np.where(denom > 0, mb / safe, np.float32(0.5)).astype(np.float32)
    return wa, wb


def fuse_l1norm(
    score_maps_a: np.ndarray,
    score_maps_b: np.ndarray,
    class_index: int,
    config: FusionConfig | None = None,
) -> np.ndarray:
    """Activity-weighted blend of the two branches' class channels.

    Pipeline: channel-wise l1 activity -> block average -> weight ratio ->
    weighted sum of the raw class channels. The result is pointwise a convex
    combination of the two inputs.
    """
    config = config or FusionConfig(strategy="l1norm")
    sa = np.asarray(score_maps_a, dtype=np.float32)
    sb = np.asarray(score_maps_b, dtype=np.float32)
    if sa.shape != sb.shape:
        raise ValueError(f"shape mismatch: {sa.shape} vs {sb.shape}")
    if not 0 <= class_index < sa.shape[0]:
        raise IndexError(f"class {class_index} out of range for {sa.shape[0]} channels")
    wa, wb = fusion_weights(
        block_average(activity_map(sa), config.block_radius),
        block_average(activity_map(sb), config.block_radius),
    )
    return wa * sa[class_index] + wb * sb[class_index]


def localization_map(
    score_maps_a: np.ndarray,
    score_maps_b: np.ndarray,
    class_index: int,
    config: FusionConfig,
    single_branch: bool = False,
) -> np.ndarray:
    """Final per-class map for box extraction.

    Max and addition operate on min-max normalized per-class maps (raw
    scale must not let one branch dominate); l1norm weighting consumes the
    raw score maps. ``single_branch`` returns branch A's normalized map
    alone, the no-fusion baseline.
    """
    if single_branch:
        return normalize_minmax(class_map(score_maps_a, class_index)).values
    if config.strategy == "l1norm":
        return fuse_l1norm(score_maps_a, score_maps_b, class_index, config)
    a = normalize_minmax(class_map(score_maps_a, class_index))
    b = normalize_minmax(class_map(score_maps_b, class_index))
    if config.strategy == "max":
        return fuse_max(a, b)
    return fuse_addition(a, b)
