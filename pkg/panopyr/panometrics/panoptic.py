import logging
from typing import Dict, Optional

import numpy as np

from panopyr.panometrics import MATCH_IOU, VOID_OVERLAP, MatchResult, PqReport
from panopyr.targetgen import LABEL_DIVISOR, VOID_LABEL, PanopticMap


LOGGER = logging.getLogger(__name__)


def _check_pair(pred: PanopticMap, gt: PanopticMap):
    if pred.shape != gt.shape:
        raise ValueError(f"Prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    if pred.class_table != gt.class_table:
        raise ValueError(
            f"Class tables differ: {pred.class_table} vs {gt.class_table}"
        )


def match_segments(pred: PanopticMap, gt: PanopticMap) -> Dict[int, MatchResult]:
    """Match predicted and ground-truth segments of the same class with IoU above 0.5.

    Void pixels are left out of every IoU denominator. Unmatched predicted segments
    more than half covered by ground-truth void are discarded instead of counting as
    false positives.

    Args:
        pred: Predicted panoptic map.
        gt: Ground-truth panoptic map with the same shape and class table.

    Returns:
        dict: `{class_id: MatchResult}` for every class present in either map.

    Raises:
        ValueError: On a shape or class-table mismatch.
    """
    _check_pair(pred, gt)
    p = pred.labels.data.astype(np.int64).ravel()
    g = gt.labels.data.astype(np.int64).ravel()

    pred_ids, pred_areas = np.unique(p, return_counts=True)
    gt_ids, gt_areas = np.unique(g, return_counts=True)
    pred_area = dict(zip(pred_ids.tolist(), pred_areas.tolist()))
    gt_area = dict(zip(gt_ids.tolist(), gt_areas.tolist()))

    base = VOID_LABEL + 1
    pairs, counts = np.unique(p * base + g, return_counts=True)
    overlap = {(int(k // base), int(k % base)): int(n) for k, n in zip(pairs, counts)}
    void_overlap = {pid: n for (pid, gid), n in overlap.items() if gid == VOID_LABEL}

    results: Dict[int, MatchResult] = {}
    for segment in sorted(set(pred_area) | set(gt_area)):
        if segment != VOID_LABEL:
            class_id = segment // LABEL_DIVISOR
            results.setdefault(class_id, MatchResult(class_id))

    matched_pred, matched_gt = set(), set()
    for (pid, gid), inter in sorted(overlap.items()):
        if pid == VOID_LABEL or gid == VOID_LABEL:
            continue
        if pid // LABEL_DIVISOR != gid // LABEL_DIVISOR:
            continue
        union = pred_area[pid] - void_overlap.get(pid, 0) + gt_area[gid] - inter
        iou = inter / union
        if iou > MATCH_IOU:
            results[gid // LABEL_DIVISOR].pairs.append((pid, gid, float(iou)))
            matched_pred.add(pid)
            matched_gt.add(gid)

    fn: Dict[int, int] = {}
    for gid in gt_area:
        if gid != VOID_LABEL and gid not in matched_gt:
            fn[gid // LABEL_DIVISOR] = fn.get(gid // LABEL_DIVISOR, 0) + 1
    fp: Dict[int, int] = {}
    for pid, area in pred_area.items():
        if pid == VOID_LABEL or pid in matched_pred:
            continue
        if void_overlap.get(pid, 0) / area > VOID_OVERLAP:
            continue
        fp[pid // LABEL_DIVISOR] = fp.get(pid // LABEL_DIVISOR, 0) + 1

    return {
        c: MatchResult(c, r.pairs, fp.get(c, 0), fn.get(c, 0)) for c, r in results.items()
    }


class PanopticEvaluator:
    """Accumulates panoptic matching statistics over many images.

    Per-class sums are reduced in image order, so results do not depend on how the
    per-image matching was scheduled.

    Args:
        class_table (optional): Expected class table; taken from the first image if omitted.
    """

    def __init__(self, class_table: Optional[dict] = None):
        self.class_table = dict(class_table) if class_table is not None else None
        self.stats: Dict[int, Dict[str, float]] = {}
        self.images = 0

    def update(self, pred: PanopticMap, gt: PanopticMap) -> "PanopticEvaluator":
        if self.class_table is None:
            self.class_table = dict(gt.class_table)
        elif gt.class_table != self.class_table:
            raise ValueError(f"Class table {gt.class_table} differs from {self.class_table}")
        for class_id, match in sorted(match_segments(pred, gt).items()):
            stats = self.stats.setdefault(class_id, {"iou_sum": 0.0, "tp": 0, "fp": 0, "fn": 0})
            stats["iou_sum"] += match.iou_sum
            stats["tp"] += match.tp
            stats["fp"] += match.fp
            stats["fn"] += match.fn
        self.images += 1
        return self

    def result(self) -> PqReport:
        per_class = {}
        for class_id, s in sorted(self.stats.items()):
            tp, fp, fn = s["tp"], s["fp"], s["fn"]
            if tp + fp + fn == 0:
                continue
            sq = s["iou_sum"] / tp if tp else 0.0
            rq = tp / (tp + 0.5 * fp + 0.5 * fn)
            per_class[class_id] = {"pq": sq * rq, "sq": sq, "rq": rq, "tp": tp, "fp": fp, "fn": fn}

        def mean(metric, classes):
            values = [per_class[c][metric] for c in classes]
            return float(np.mean(values)) if values else 0.0

        table = self.class_table or {}
        counted = list(per_class)
        return PqReport(
            per_class=per_class,
            pq=mean("pq", counted),
            sq=mean("sq", counted),
            rq=mean("rq", counted),
            pq_things=mean("pq", [c for c in counted if table.get(c)]),
            pq_stuff=mean("pq", [c for c in counted if not table.get(c)]),
            class_count=len(counted),
        )


def panoptic_quality(pred: PanopticMap, gt: PanopticMap) -> PqReport:
    """Panoptic, segmentation and recognition quality of one prediction.

    Args:
        pred: Predicted panoptic map.
        gt: Ground-truth panoptic map.

    Returns:
        PqReport: Per-class and averaged PQ/SQ/RQ.

    Example:
        >>> panoptic_quality(gt, gt).pq
        1.0
    """
    report = PanopticEvaluator(gt.class_table).update(pred, gt).result()
    LOGGER.info(f"PQ {report.pq:.4f} over {report.class_count} classes")
    return report
