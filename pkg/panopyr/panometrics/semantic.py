import logging

import numpy as np

from panopyr.panometrics import SemanticReport
from panopyr.targetgen import IGNORE_LABEL


LOGGER = logging.getLogger(__name__)


def confusion_matrix(pred, gt, num_classes: int, ignore_label: int = IGNORE_LABEL) -> np.ndarray:
    """Pixel confusion matrix, rows ground truth and columns prediction.

    Args:
        pred: `(H, W)` predicted class ids.
        gt: `(H, W)` ground-truth class ids.
        num_classes: Number of classes `C`.
        ignore_label (optional): Label skipped in either map.

    Returns:
        numpy.ndarray: `(C, C)` int64 counts.

    Raises:
        ValueError: On a shape mismatch or a label that is neither `< C` nor ignored.
    """
    p = np.asarray(pred).astype(np.int64)
    g = np.asarray(gt).astype(np.int64)
    if p.shape != g.shape:
        raise ValueError(f"Prediction {p.shape} and ground truth {g.shape} differ in shape")
    for name, labels in (("prediction", p), ("ground truth", g)):
        bad = np.unique(labels[(labels != ignore_label) & ((labels < 0) | (labels >= num_classes))])
        if len(bad):
            raise ValueError(f"Invalid {name} labels {bad.tolist()} for {num_classes} classes")
    valid = (p != ignore_label) & (g != ignore_label)
    counts = np.bincount(g[valid] * num_classes + p[valid], minlength=num_classes ** 2)
    return counts.reshape(num_classes, num_classes)


class SemanticEvaluator:
    """Accumulates a confusion matrix over many images.

    Args:
        num_classes: Number of classes.
        ignore_label (optional): Label skipped in either map.

    Example:
        >>> evaluator = SemanticEvaluator(num_classes=19)
        >>> for pred, gt in pairs:
        ...     evaluator.update(pred, gt)
        >>> evaluator.result().miou
    """

    def __init__(self, num_classes: int, ignore_label: int = IGNORE_LABEL):
        if num_classes < 1:
            raise ValueError(f"num_classes must be positive, got {num_classes}")
        self.num_classes = num_classes
        self.ignore_label = ignore_label
        self.confusion = np.zeros((num_classes, num_classes), dtype=np.int64)

    def update(self, pred, gt) -> "SemanticEvaluator":
        self.confusion += confusion_matrix(pred, gt, self.num_classes, self.ignore_label)
        return self

    def result(self) -> SemanticReport:
        conf = self.confusion
        intersection = np.diag(conf)
        union = conf.sum(axis=0) + conf.sum(axis=1) - intersection
        present = np.nonzero(union > 0)[0]
        iou = {int(c): float(intersection[c] / union[c]) for c in present}
        total = conf.sum()
        if not iou:
            LOGGER.warning("No labelled pixels to evaluate; mIoU reported as 0")
        return SemanticReport(
            iou=iou,
            miou=float(np.mean(list(iou.values()))) if iou else 0.0,
            pixel_accuracy=float(intersection.sum() / total) if total else 0.0,
            confusion=conf.copy(),
        )


def miou(pred, gt, num_classes: int, ignore_label: int = IGNORE_LABEL) -> SemanticReport:
    """Per-class IoU (Jaccard index) and their mean over classes with a non-empty union."""
    return SemanticEvaluator(num_classes, ignore_label).update(pred, gt).result()
