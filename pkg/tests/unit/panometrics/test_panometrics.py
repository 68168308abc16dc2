import pytest
import logging

import numpy as np

from panopyr.panometrics import (
    PanopticEvaluator,
    SemanticEvaluator,
    average_precision,
    confusion_matrix,
    ground_truth_from_panoptic,
    instances_from_panoptic,
    match_segments,
    miou,
    panoptic_quality,
)
from panopyr.pandas.utils import triples_to_frame
from panopyr.panofuse import DetectedCenter
from panopyr.targetgen import VOID_LABEL, PanopticMap

LOGGER = logging.getLogger(__name__)

CLASS_TABLE = {0: False, 1: False, 11: True, 12: True}
SEGMENT_IDS = np.array([0, 1000, 11001, 11002, 12001, 12002, VOID_LABEL])


def _map(labels):
    return PanopticMap(np.array(labels, dtype=np.int64), CLASS_TABLE)


def _random_map(rng, height=12, width=12):
    # blocky maps so segments overlap substantially
    coarse = rng.choice(SEGMENT_IDS, size=(-(-height // 3), -(-width // 3)))
    labels = np.kron(coarse, np.ones((3, 3), dtype=np.int64))[:height, :width]
    flips = rng.random((height, width)) < 0.1
    labels[flips] = rng.choice(SEGMENT_IDS, size=int(flips.sum()))
    return _map(labels)


def test_miou_identical():
    gt = np.array([[0, 1], [2, 255]])
    assert miou(gt, gt, 3).miou == 1.0


def test_miou_disjoint():
    report = miou(np.zeros((2, 2)), np.ones((2, 2)), 2)
    assert report.iou == {0: 0.0, 1: 0.0}
    assert report.miou == 0.0


def test_miou_hand_example():
    report = miou(np.array([[0, 1], [1, 1]]), np.array([[0, 0], [1, 1]]), 2)
    assert report.iou[0] == pytest.approx(1 / 2)
    assert report.iou[1] == pytest.approx(2 / 3)
    assert report.miou == pytest.approx(7 / 12)
    assert report.pixel_accuracy == pytest.approx(3 / 4)


@pytest.mark.parametrize("seed", range(100))
def test_miou_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    h, w = (int(v) for v in rng.integers(1, 17, size=2))
    num_classes = int(rng.integers(1, 7))
    labels = list(range(num_classes)) + [255]
    pred = rng.choice(labels, size=(h, w))
    gt = rng.choice(labels, size=(h, w))
    expected = np.zeros((num_classes, num_classes), dtype=np.int64)
    for p, g in zip(pred.ravel(), gt.ravel()):
        if p != 255 and g != 255:
            expected[g, p] += 1
    assert np.array_equal(confusion_matrix(pred, gt, num_classes), expected)

    ious = {}
    for c in range(num_classes):
        inter = union = 0
        for p, g in zip(pred.ravel(), gt.ravel()):
            if p == 255 or g == 255:
                continue
            inter += p == c and g == c
            union += p == c or g == c
        if union:
            ious[c] = inter / union
    report = miou(pred, gt, num_classes)
    assert report.iou == pytest.approx(ious)
    assert report.miou == pytest.approx(np.mean(list(ious.values())) if ious else 0.0)


def test_confusion_matrix_raises_with_out_of_range_label():
    with pytest.raises(ValueError):
        confusion_matrix(np.array([[4]]), np.array([[0]]), 4)


def test_semantic_evaluator_accumulates():
    evaluator = SemanticEvaluator(2)
    evaluator.update(np.array([[0]]), np.array([[0]]))
    evaluator.update(np.array([[1]]), np.array([[0]]))
    assert evaluator.result().iou == {0: 0.5, 1: 0.0}


def test_panoptic_quality_identical():
    gt = _map([[0, 11001, 11002], [1000, 12001, VOID_LABEL]])
    report = panoptic_quality(gt, gt)
    assert report.pq == report.sq == report.rq == 1.0
    assert set(report.per_class) == {0, 1, 11, 12}
    assert report.class_count == 4


def test_panoptic_quality_hand_example():
    gt = _map([[11001] * 5 + [0] * 5])
    pred = _map([[11001] * 3 + [0] * 7])
    report = panoptic_quality(pred, gt)
    car = report.per_class[11]
    assert car["pq"] == pytest.approx(0.6)
    assert car["sq"] == pytest.approx(0.6)
    assert car["rq"] == 1.0


def test_panoptic_quality_false_positive():
    gt = _map(np.zeros((4, 4)))
    labels = np.zeros((4, 4), dtype=np.int64)
    labels[:2, :2] = 11001
    report = panoptic_quality(_map(labels), gt)
    car = report.per_class[11]
    assert (car["tp"], car["fp"], car["fn"]) == (0, 1, 0)
    assert car["pq"] == 0.0


def test_match_segments_excludes_void():
    gt = _map([[11001] * 4 + [VOID_LABEL] * 2 + [0] * 4])
    pred = _map([[11001] * 6 + [0] * 2 + [11002] * 2])
    matches = match_segments(pred, gt)
    assert matches[11].pairs == [(11001, 11001, 1.0)]
    assert matches[11].fp == 1


def test_match_segments_discards_mostly_void_prediction():
    gt = _map([[0] * 4 + [VOID_LABEL] * 4])
    pred = _map([[0] * 4 + [0] + [12001] * 3])
    assert match_segments(pred, gt)[12].fp == 0


def test_match_segments_raises_with_mismatched_maps():
    with pytest.raises(ValueError):
        match_segments(_map(np.zeros((2, 2))), _map(np.zeros((2, 3))))
    with pytest.raises(ValueError):
        match_segments(_map(np.zeros((2, 2))), PanopticMap(np.zeros((2, 2)), {0: False}))


def _exhaustive_matches(pred, gt):
    """Every same-class pair with IoU above 0.5, void left out of unions."""
    p, g = pred.labels.data, gt.labels.data
    void = g == VOID_LABEL
    pairs = {}
    for pid in np.unique(p).tolist():
        for gid in np.unique(g).tolist():
            if VOID_LABEL in (pid, gid) or pid // 1000 != gid // 1000:
                continue
            inter = np.sum((p == pid) & (g == gid))
            union = np.sum(((p == pid) & ~void) | (g == gid))
            if inter / union > 0.5:
                pairs[(pid, gid)] = inter / union
    return pairs


@pytest.mark.parametrize("seed", range(100))
def test_match_segments_equals_exhaustive_enumeration(seed):
    rng = np.random.default_rng(seed)
    h, w = (int(v) for v in rng.integers(1, 13, size=2))
    pred, gt = _random_map(rng, h, w), _random_map(rng, h, w)
    expected = _exhaustive_matches(pred, gt)
    matches = match_segments(pred, gt)
    found = {(pid, gid): iou for m in matches.values() for pid, gid, iou in m.pairs}
    assert found == pytest.approx(expected)
    assert len({pid for pid, _ in found}) == len(found)
    assert len({gid for _, gid in found}) == len(found)

    p, g = pred.labels.data, gt.labels.data
    for class_id, result in matches.items():
        gt_ids = [s for s in np.unique(g).tolist() if s != VOID_LABEL and s // 1000 == class_id]
        assert result.fn == sum(s not in {gid for _, gid in found} for s in gt_ids)
        fp = 0
        for s in np.unique(p).tolist():
            if s == VOID_LABEL or s // 1000 != class_id or s in {pid for pid, _ in found}:
                continue
            if np.sum((p == s) & (g == VOID_LABEL)) / np.sum(p == s) <= 0.5:
                fp += 1
        assert result.fp == fp


@pytest.mark.parametrize("seed", range(20))
def test_panoptic_quality_properties_on_random_maps(seed):
    rng = np.random.default_rng(seed)
    pred, gt = _random_map(rng), _random_map(rng)
    report = panoptic_quality(pred, gt)
    for stats in report.per_class.values():
        assert stats["pq"] == pytest.approx(stats["sq"] * stats["rq"], abs=1e-12)
        assert 0.0 <= stats["pq"] <= 1.0
    assert 0.0 <= report.pq <= 1.0

    swap = {11001: 11002, 11002: 11001}
    permuted = np.vectorize(lambda v: swap.get(int(v), int(v)))(pred.labels.data)
    permuted_report = panoptic_quality(_map(permuted), gt)
    for class_id, stats in report.per_class.items():
        assert permuted_report.per_class[class_id] == pytest.approx(stats)


@pytest.mark.parametrize("seed", range(100))
def test_panoptic_quality_never_rises_when_a_match_is_removed(seed):
    rng = np.random.default_rng(seed)
    gt = _random_map(rng)
    labels = gt.labels.data.astype(np.int64).copy()
    flips = rng.random(labels.shape) < 0.15
    labels[flips] = rng.choice(SEGMENT_IDS, size=int(flips.sum()))
    pred = _map(labels)
    pairs = [pair for m in match_segments(pred, gt).values() for pair in m.pairs]
    if not pairs:
        pytest.skip("no matched segment to remove")
    pid, _, _ = pairs[int(rng.integers(len(pairs)))]

    before = panoptic_quality(pred, gt)
    labels[labels == pid] = VOID_LABEL
    after = panoptic_quality(_map(labels), gt)
    assert after.pq <= before.pq + 1e-12
    class_id = pid // 1000
    assert after.per_class[class_id]["pq"] <= before.per_class[class_id]["pq"] + 1e-12
    assert after.per_class[class_id]["tp"] == before.per_class[class_id]["tp"] - 1
    assert after.per_class[class_id]["fn"] == before.per_class[class_id]["fn"] + 1


def test_panoptic_quality_drops_with_spurious_segment():
    gt = _map([[0] * 6 + [11001] * 4])
    spurious = _map([[0, 0, 12001, 0, 0, 0] + [11001] * 4])
    assert panoptic_quality(spurious, gt).pq < panoptic_quality(gt, gt).pq


def test_panoptic_evaluator_accumulates_over_images():
    gt = _map([[11001] * 5 + [0] * 5])
    pred = _map([[11001] * 3 + [0] * 7])
    report = PanopticEvaluator().update(pred, gt).update(gt, gt).result()
    car = report.per_class[11]
    assert car["tp"] == 2
    assert car["sq"] == pytest.approx(0.8)


def test_pq_report_to_text():
    gt = _map([[0, 11001]])
    frame = triples_to_frame(panoptic_quality(gt, gt).to_text())
    assert frame.loc["all", "pq"] == 1.0
    assert frame.loc["11", "tp"] == 1.0


def _mask(cols, width=10):
    mask = np.zeros((1, width), dtype=bool)
    mask[0, cols] = True
    return mask


def test_average_precision_exact_match():
    report = average_precision([[(_mask(range(4)), 11, 0.3)]], [[(_mask(range(4)), 11)]])
    assert np.all(report.per_class[11] == 1.0)
    assert report.ap == 1.0


def test_average_precision_partial_overlap():
    report = average_precision([[(_mask(range(7)), 11, 0.9)]], [[(_mask(range(10)), 11)]])
    assert report.per_class[11].tolist() == [1.0] * 5 + [0.0] * 5
    assert report.ap == pytest.approx(0.5)
    assert report.ap50 == 1.0
    assert report.ap75 == 0.0


def test_average_precision_without_detections():
    assert average_precision([[]], [[(_mask(range(3)), 12)]]).ap == 0.0


def test_average_precision_ranks_by_score():
    gts = [[(_mask(range(5)), 11)]]
    good_first = [[(_mask(range(5)), 11, 0.9), (_mask(range(5, 10)), 11, 0.1)]]
    bad_first = [[(_mask(range(5)), 11, 0.1), (_mask(range(5, 10)), 11, 0.9)]]
    assert average_precision(good_first, gts).ap == 1.0
    assert average_precision(bad_first, gts).ap == pytest.approx(0.5)


def test_average_precision_raises_with_bad_input():
    with pytest.raises(ValueError):
        average_precision([[]], [])
    with pytest.raises(ValueError):
        average_precision([[(_mask([0]), 11, float("nan"))]], [[(_mask([0]), 11)]])


def test_instances_from_panoptic_uses_center_scores():
    pan = _map([[11001, 11001, 0, 12002]])
    centers = [DetectedCenter(0, 3, 0.4, 2), DetectedCenter(0, 0, 0.8, 1)]
    detections = instances_from_panoptic(pan, centers)
    assert [(d[1], d[2], d[3]) for d in detections] == [(11, 0.8, (0, 0)), (12, 0.4, (0, 3))]
    assert [g[1] for g in ground_truth_from_panoptic(pan)] == [11, 12]
    assert average_precision([detections], [ground_truth_from_panoptic(pan)]).ap == 1.0
