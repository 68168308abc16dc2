"""Evaluation: mIoU, panoptic quality (PQ = SQ x RQ) and mask average precision."""
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

from panopyr.pandas.utils import frame_to_triples


MATCH_IOU = 0.5
VOID_OVERLAP = 0.5
AP_THRESHOLDS = np.round(np.linspace(0.5, 0.95, 10), 2)
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
PQ_METRICS = ["pq", "sq", "rq", "tp", "fp", "fn"]


@dataclass(frozen=True)
class MatchResult:
    """Segment matching of one class.

    Attributes:
        class_id: Class id.
        pairs: Matched `(pred_id, gt_id, iou)` triples, every iou above 0.5.
        fp: Unmatched predicted segments counted as false positives.
        fn: Unmatched ground-truth segments.
    """

    class_id: int
    pairs: List[Tuple[int, int, float]] = field(default_factory=list)
    fp: int = 0
    fn: int = 0

    @property
    def tp(self) -> int:
        return len(self.pairs)

    @property
    def iou_sum(self) -> float:
        return float(sum(iou for _, _, iou in self.pairs))


@dataclass(frozen=True)
class SemanticReport:
    """Per-class IoU, their mean and pixel accuracy.

    Attributes:
        iou: `{class_id: IoU}` for classes with a non-empty union.
        miou: Mean of `iou`.
        pixel_accuracy: Correct non-ignored pixels over non-ignored pixels.
        confusion: `(C, C)` confusion matrix, rows ground truth, columns prediction.
    """

    iou: Dict[int, float]
    miou: float
    pixel_accuracy: float
    confusion: np.ndarray = field(repr=False)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"iou": pd.Series(self.iou, dtype=float)})
        aggregate = pd.DataFrame(
            {"miou": [self.miou], "pixel_accuracy": [self.pixel_accuracy]}, index=["all"]
        )
        return pd.concat([frame.astype(object), aggregate.astype(object)])

    def to_text(self) -> str:
        return frame_to_triples(self.to_frame())


@dataclass(frozen=True)
class PqReport:
    """Panoptic quality per class and averaged.

    Averages run over classes with at least one TP, FP or FN; `class_count` says how many.

    Attributes:
        per_class: `{class_id: {"pq", "sq", "rq", "tp", "fp", "fn"}}`.
        pq, sq, rq: Averages over all counted classes.
        pq_things, pq_stuff: PQ averaged over counted thing / stuff classes (0 if none).
        class_count: Number of averaged classes.
    """

    per_class: Dict[int, Dict[str, float]]
    pq: float
    sq: float
    rq: float
    pq_things: float
    pq_stuff: float
    class_count: int

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame.from_dict(self.per_class, orient="index", columns=PQ_METRICS)
        aggregate = pd.DataFrame(
            {
                "pq": [self.pq],
                "sq": [self.sq],
                "rq": [self.rq],
                "pq_things": [self.pq_things],
                "pq_stuff": [self.pq_stuff],
                "classes": [self.class_count],
            },
            index=["all"],
        )
        return pd.concat([frame.astype(object), aggregate.astype(object)])

    def to_text(self) -> str:
        return frame_to_triples(self.to_frame())


@dataclass(frozen=True)
class ApReport:
    """Mask average precision per class and IoU threshold.

    Attributes:
        per_class: `{class_id: array of AP at each threshold in AP_THRESHOLDS}` for classes
            with ground truth.
        ap: Mean over classes and thresholds.
        ap50, ap75: Mean over classes at IoU 0.50 and 0.75.
    """

    per_class: Dict[int, np.ndarray]
    ap: float
    ap50: float
    ap75: float

    def to_frame(self) -> pd.DataFrame:
        columns = [f"ap{int(round(t * 100))}" for t in AP_THRESHOLDS]
        frame = pd.DataFrame.from_dict(
            {c: list(v) for c, v in self.per_class.items()}, orient="index", columns=columns
        )
        frame["ap"] = frame[columns].mean(axis=1)
        aggregate = pd.DataFrame(
            {"ap": [self.ap], "ap50": [self.ap50], "ap75": [self.ap75]}, index=["all"]
        )
        return pd.concat([frame[["ap"]].astype(object), aggregate.astype(object)])

    def to_text(self) -> str:
        return frame_to_triples(self.to_frame())


from panopyr.panometrics.semantic import SemanticEvaluator, confusion_matrix, miou
from panopyr.panometrics.panoptic import PanopticEvaluator, match_segments, panoptic_quality
from panopyr.panometrics.detection import (
    average_precision,
    ground_truth_from_panoptic,
    instances_from_panoptic,
)
