import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from panopyr.panometrics import AP_THRESHOLDS, RECALL_POINTS, ApReport
from panopyr.targetgen import LABEL_DIVISOR, PanopticMap
from panopyr.typing import ImageDetections, ImageGroundTruth


LOGGER = logging.getLogger(__name__)


def instances_from_panoptic(pan: PanopticMap, centers: Optional[Sequence] = None) -> ImageDetections:
    """Detections `(mask, class, score, peak)` for every thing instance of a fused map.

    Args:
        pan: Fused panoptic map.
        centers (optional): Centers returned by `fuse_panoptic`; their score and position
            are attached to the instance of the same rank. Without centers every instance
            scores 1.0 and its peak is its first pixel in row-major order.

    Returns:
        list: One detection per instance, in ascending encoded id order.
    """
    by_rank = {c.index: c for c in centers or []}
    labels = pan.labels.data
    detections = []
    for instance_id in pan.instance_ids():
        mask = labels == instance_id
        center = by_rank.get(int(instance_id % LABEL_DIVISOR))
        if center is not None:
            score, peak = center.score, (center.row, center.col)
        else:
            flat = int(np.argmax(mask.ravel()))
            score, peak = 1.0, divmod(flat, mask.shape[1])
        detections.append((mask, int(instance_id // LABEL_DIVISOR), float(score), peak))
    return detections


def ground_truth_from_panoptic(pan: PanopticMap) -> ImageGroundTruth:
    """Ground-truth instances `(mask, class)` of a panoptic map."""
    labels = pan.labels.data
    return [
        (labels == instance_id, int(instance_id // LABEL_DIVISOR))
        for instance_id in pan.instance_ids()
    ]


def _mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.count_nonzero(a | b)
    return np.count_nonzero(a & b) / union if union else 0.0


def _peak_index(mask: np.ndarray, peak=None) -> int:
    if peak is not None:
        row, col = peak
        return int(row) * mask.shape[1] + int(col)
    return int(np.argmax(mask.ravel()))


def _interpolated_ap(hits: np.ndarray, gt_count: int) -> float:
    """Area under the precision envelope sampled at 101 recall points."""
    if len(hits) == 0:
        return 0.0
    tp = np.cumsum(hits)
    fp = np.cumsum(~hits)
    recall = tp / gt_count
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    index = np.searchsorted(recall, RECALL_POINTS, side="left")
    sampled = np.where(index < len(envelope), envelope[np.minimum(index, len(envelope) - 1)], 0.0)
    return float(sampled.mean())


def _class_ap(detections: List[tuple], gt_masks: List[List[np.ndarray]]) -> np.ndarray:
    """AP of one class at every IoU threshold.

    Args:
        detections: `(score, image, peak, mask)` tuples of the class.
        gt_masks: Ground-truth masks of the class per image.
    """
    gt_count = sum(len(m) for m in gt_masks)
    ordered = sorted(detections, key=lambda d: (-d[0], d[1], d[2]))
    ious = [np.array([_mask_iou(d[3], g) for g in gt_masks[d[1]]]) for d in ordered]

    ap = np.zeros(len(AP_THRESHOLDS))
    for t, threshold in enumerate(AP_THRESHOLDS):
        taken = [np.zeros(len(m), dtype=bool) for m in gt_masks]
        hits = np.zeros(len(ordered), dtype=bool)
        for k, (detection, overlap) in enumerate(zip(ordered, ious)):
            if len(overlap) == 0:
                continue
            free = np.where(taken[detection[1]], -1.0, overlap)
            best = int(np.argmax(free))
            if free[best] >= threshold:
                taken[detection[1]][best] = True
                hits[k] = True
        ap[t] = _interpolated_ap(hits, gt_count)
    return ap


def average_precision(
    detections: Sequence[ImageDetections], gts: Sequence[ImageGroundTruth]
) -> ApReport:
    """Mask average precision over IoU thresholds 0.50, 0.55, ..., 0.95.

    Detections of a class are ranked by descending score, then image, then peak position
    in row-major order. Each takes the unmatched ground truth of highest IoU if that IoU
    reaches the threshold. Classes without ground truth are left out.

    Args:
        detections: Per image, `(mask, class, score[, (row, col) peak])` tuples.
        gts: Per image, `(mask, class)` tuples.

    Returns:
        ApReport: Per-class AP at every threshold plus AP, AP50 and AP75.

    Raises:
        ValueError: If the image counts differ, a score is not finite or mask shapes
            disagree within an image.
    """
    if len(detections) != len(gts):
        raise ValueError(f"Got detections for {len(detections)} images and GT for {len(gts)}")

    classes = sorted({int(c) for image in gts for _, c in image})
    per_class_dets: Dict[int, List[tuple]] = {c: [] for c in classes}
    per_class_gts: Dict[int, List[List[np.ndarray]]] = {
        c: [[] for _ in gts] for c in classes
    }
    for image, (image_dets, image_gts) in enumerate(zip(detections, gts)):
        shapes = {np.shape(d[0]) for d in image_dets} | {np.shape(g[0]) for g in image_gts}
        if len(shapes) > 1:
            raise ValueError(f"Masks of image {image} have different shapes: {sorted(shapes)}")
        for mask, class_id in image_gts:
            per_class_gts[int(class_id)][image].append(np.asarray(mask, dtype=bool))
        for detection in image_dets:
            mask, class_id, score = detection[0], int(detection[1]), float(detection[2])
            if not np.isfinite(score):
                raise ValueError(f"Detection score must be finite, got {score}")
            if class_id in per_class_dets:
                mask = np.asarray(mask, dtype=bool)
                peak = detection[3] if len(detection) > 3 else None
                per_class_dets[class_id].append((score, image, _peak_index(mask, peak), mask))

    per_class = {c: _class_ap(per_class_dets[c], per_class_gts[c]) for c in classes}
    if not per_class:
        LOGGER.warning("No ground-truth instances; AP reported as 0")
        return ApReport(per_class={}, ap=0.0, ap50=0.0, ap75=0.0)

    table = np.stack([per_class[c] for c in classes])
    column = {round(float(t), 2): i for i, t in enumerate(AP_THRESHOLDS)}
    return ApReport(
        per_class=per_class,
        ap=float(table.mean()),
        ap50=float(table[:, column[0.5]].mean()),
        ap75=float(table[:, column[0.75]].mean()),
    )
