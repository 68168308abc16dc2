import logging
from typing import Union

import numpy as np

from panopyr.losses import OFFSET_LOSSES, CompoundLoss, LossConfig, LossValue
from panopyr.targetgen import IGNORE_LABEL


LOGGER = logging.getLogger(__name__)


def _float64(tensor, name: str, channels: int = None) -> np.ndarray:
    array = np.asarray(tensor, dtype=np.float64)
    if array.ndim != 3:
        raise ValueError(f"{name} must have shape (C, H, W), got {array.shape}")
    if channels is not None and array.shape[0] != channels:
        raise ValueError(f"{name} must have {channels} channel(s), got {array.shape[0]}")
    return array


def _check_same_shape(**arrays):
    shapes = {name: a.shape for name, a in arrays.items()}
    if len(set(shapes.values())) > 1:
        raise ValueError(f"Shape mismatch: {shapes}")


def semantic_loss(logits, labels, hard_pixel_fraction: float = 1.0) -> LossValue:
    """Softmax cross-entropy with optional hard-pixel mining.

    Ignored pixels (label 255) are dropped first; of the remaining `N` pixels the
    `ceil(fraction * N)` with the largest loss are averaged. Ties at the cutoff keep the
    earlier pixel in row-major order.

    Args:
        logits: `(C, H, W)` class scores, `C >= 2`.
        labels: `(H, W)` class ids, 255 where ignored.
        hard_pixel_fraction (optional): Fraction of valid pixels kept, in (0, 1].

    Returns:
        LossValue: Mean selected cross-entropy and its gradient w.r.t. `logits`.

    Raises:
        ValueError: On a label `>= C` other than 255, no valid pixels or a bad fraction.
    """
    x = _float64(logits, "logits")
    num_classes = x.shape[0]
    if num_classes < 2:
        raise ValueError(f"Semantic loss needs at least 2 classes, got {num_classes}")
    y = np.asarray(labels).astype(np.int64)
    if y.shape != x.shape[1:]:
        raise ValueError(f"Labels of shape {y.shape} do not match logits {x.shape}")
    if not 0.0 < hard_pixel_fraction <= 1.0:
        raise ValueError(f"hard_pixel_fraction must lie in (0, 1], got {hard_pixel_fraction}")

    valid = y != IGNORE_LABEL
    bad = np.unique(y[valid & ((y >= num_classes) | (y < 0))])
    if len(bad):
        raise ValueError(f"Labels {bad.tolist()} out of range for {num_classes} classes")
    rows, cols = np.nonzero(valid)
    if len(rows) == 0:
        raise ValueError("Semantic loss needs at least one non-ignored pixel")

    scores = x[:, rows, cols]
    shifted = scores - scores.max(axis=0)
    log_norm = np.log(np.exp(shifted).sum(axis=0))
    target = y[rows, cols]
    pixel_loss = log_norm - shifted[target, np.arange(len(target))]

    k = int(np.ceil(hard_pixel_fraction * len(pixel_loss)))
    selected = np.sort(np.argsort(-pixel_loss, kind="stable")[:k])
    scalar = float(pixel_loss[selected].sum() / k)

    probs = np.exp(shifted[:, selected] - log_norm[selected])
    probs[target[selected], np.arange(k)] -= 1.0
    gradient = np.zeros_like(x)
    gradient[:, rows[selected], cols[selected]] = probs / k
    return LossValue(scalar, gradient)


def center_loss(pred, gt) -> LossValue:
    """Mean squared error between predicted and ground-truth center heatmaps."""
    p, g = _float64(pred, "pred"), _float64(gt, "gt")
    _check_same_shape(pred=p, gt=g)
    diff = p - g
    return LossValue(float(np.mean(diff ** 2)), 2.0 * diff / diff.size)


def offset_loss_bal(pred, gt_offsets, weights) -> LossValue:
    """Boundary-aware L1 offset loss.

    `(1 / (H * W)) * sum(w * (|dr| + |dc|))` where `(dr, dc)` is the difference of the
    two offset components. The gradient is `w * sign(pred - gt) / (H * W)` with
    `sign(0) = 0`.

    Args:
        pred: `(2, H, W)` predicted offsets.
        gt_offsets: `(2, H, W)` target offsets.
        weights: `(1, H, W)` non-negative per-pixel weights.

    Returns:
        LossValue: Scalar and gradient w.r.t. `pred`.

    Raises:
        ValueError: On a shape mismatch or negative weights.

    Example:
        >>> offset_loss_bal([[[3.0]], [[4.0]]], [[[0.0]], [[0.0]]], [[[8.0]]]).scalar
        56.0
    """
    p = _float64(pred, "pred", channels=2)
    g = _float64(gt_offsets, "gt_offsets", channels=2)
    w = _float64(weights, "weights", channels=1)
    _check_same_shape(pred=p, gt_offsets=g)
    if w.shape[1:] != p.shape[1:]:
        raise ValueError(f"Weights of shape {w.shape} do not match offsets {p.shape}")
    if (w < 0).any():
        raise ValueError(f"Offset weights must be non-negative, got minimum {w.min()}")
    diff = p - g
    n = p.shape[1] * p.shape[2]
    scalar = float(np.sum(w * np.abs(diff)) / n)
    return LossValue(scalar, w * np.sign(diff) / n)


def offset_loss_l1(pred, gt_offsets, mask=None) -> LossValue:
    """Plain L1 offset loss over the masked pixels, normalized by `H * W`.

    Args:
        pred: `(2, H, W)` predicted offsets.
        gt_offsets: `(2, H, W)` target offsets.
        mask (optional): `(H, W)` pixels that count; all pixels when omitted.

    Returns:
        LossValue: Scalar and gradient w.r.t. `pred`.
    """
    p = _float64(pred, "pred", channels=2)
    if mask is None:
        weights = np.ones((1,) + p.shape[1:])
    else:
        weights = np.asarray(mask, dtype=np.float64)[None]
    return offset_loss_bal(p, gt_offsets, weights)


def compound_loss(
    preds,
    targets,
    cfg: Union[LossConfig, dict, None] = None,
    offset_loss: str = "bal",
) -> CompoundLoss:
    """Weighted sum of the semantic, center and offset losses.

    Args:
        preds: `PredictionSet` of the network.
        targets: `TargetSet` crafted from the ground truth.
        cfg (optional): `LossConfig` or config dict; defaults λ = (1, 200, 0.0025).
        offset_loss (optional): `"bal"` for the boundary-aware loss or `"l1"` for
            plain L1 over thing pixels weighted by `plain_l1_lambda`.

    Returns:
        CompoundLoss: Total, unweighted components and total-loss gradients.
    """
    if not isinstance(cfg, LossConfig):
        cfg = LossConfig.from_dict(cfg)
    if offset_loss not in OFFSET_LOSSES:
        raise ValueError(f"offset_loss must be one of {OFFSET_LOSSES}, got {offset_loss!r}")

    sem = semantic_loss(preds.sem_logits, targets.semantic, cfg.hard_pixel_fraction)
    cen = center_loss(preds.center_heatmap, targets.center_heatmap)
    if offset_loss == "bal":
        off = offset_loss_bal(preds.offsets, targets.offsets, targets.offset_weights)
        lambda_off = cfg.lambda_baol
    else:
        thing = np.asarray(targets.offset_weights)[0] > 0
        off = offset_loss_l1(preds.offsets, targets.offsets, thing)
        lambda_off = cfg.plain_l1_lambda

    components = {"semantic": sem.scalar, "center": cen.scalar, "offset": off.scalar}
    lambdas = {"semantic": cfg.lambda_sem, "center": cfg.lambda_cen, "offset": lambda_off}
    total = sum(lambdas[k] * components[k] for k in components)
    LOGGER.debug(f"Loss components {components} with weights {lambdas}")
    return CompoundLoss(
        total=float(total),
        components=components,
        lambdas=lambdas,
        gradients={
            "sem_logits": cfg.lambda_sem * sem.gradient,
            "center_heatmap": cfg.lambda_cen * cen.gradient,
            "offsets": lambda_off * off.gradient,
        },
        offset_loss=offset_loss,
    )
