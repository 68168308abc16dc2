import pytest
import logging

import numpy as np

from panopyr.losses import (
    LAMBDA_BAOL,
    LAMBDA_CEN,
    LAMBDA_SEM,
    LossConfig,
    center_loss,
    compound_loss,
    offset_loss_bal,
    offset_loss_l1,
    semantic_loss,
)
from panopyr.pixelgrid import LabelGrid, Tensor3
from panopyr.pyramidnet import PredictionSet
from panopyr.targetgen import TargetSet

LOGGER = logging.getLogger(__name__)

STEP = 1e-4
SAMPLED_ENTRIES = 100


def _check_gradient(loss_fn, x, analytic, seed=0):
    """Compare an analytic gradient with central differences at random entries."""
    rng = np.random.default_rng(seed)
    flat = rng.integers(x.size, size=SAMPLED_ENTRIES)
    for index in flat:
        index = np.unravel_index(index, x.shape)
        up, down = x.copy(), x.copy()
        up[index] += STEP
        down[index] -= STEP
        numeric = (loss_fn(up) - loss_fn(down)) / (2 * STEP)
        assert numeric == pytest.approx(analytic[index], rel=1e-4, abs=1e-8)


def _margin_logits(labels, num_classes, margin):
    logits = np.zeros((num_classes,) + labels.shape)
    rows, cols = np.indices(labels.shape)
    logits[labels, rows, cols] = margin
    return logits


def test_semantic_loss_saturated_margin():
    labels = np.array([[0, 1], [2, 1]])
    loss = semantic_loss(_margin_logits(labels, 3, 50.0), labels)
    assert loss.scalar < 1e-9


def test_semantic_loss_uniform_logits():
    labels = np.array([[0, 1, 2, 3]])
    loss = semantic_loss(np.zeros((4, 1, 4)), labels)
    assert loss.scalar == pytest.approx(np.log(4), rel=1e-12)


def test_semantic_loss_mining_keeps_hardest_pixel():
    labels = np.zeros((1, 5), dtype=np.int64)
    logits = np.zeros((2, 1, 5))
    logits[1, 0] = [0.5, 3.0, 1.0, -1.0, 2.0]
    per_pixel = np.log1p(np.exp(logits[1, 0]))
    loss = semantic_loss(logits, labels, hard_pixel_fraction=0.2)
    assert loss.scalar == pytest.approx(per_pixel.max(), rel=1e-12)


def test_semantic_loss_full_fraction_is_plain_mean():
    rng = np.random.default_rng(4)
    logits = rng.standard_normal((3, 4, 5))
    labels = rng.integers(3, size=(4, 5))
    shifted = logits - logits.max(axis=0)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=0))
    rows, cols = np.indices(labels.shape)
    expected = -log_probs[labels, rows, cols].mean()
    assert semantic_loss(logits, labels).scalar == pytest.approx(expected, rel=1e-12)


def test_semantic_loss_drops_ignored_pixels():
    labels = np.array([[0, 255]])
    logits = np.zeros((2, 1, 2))
    logits[1, 0, 1] = 100.0
    loss = semantic_loss(logits, labels)
    assert loss.scalar == pytest.approx(np.log(2))
    assert np.all(loss.gradient[:, 0, 1] == 0.0)


def test_semantic_loss_decreases_with_margin():
    labels = np.array([[1, 0, 2]])
    scalars = [semantic_loss(_margin_logits(labels, 3, m), labels).scalar for m in (0, 1, 2, 4, 8)]
    assert all(a > b for a, b in zip(scalars, scalars[1:]))


@pytest.mark.parametrize(
    "labels",
    [np.array([[0, 3]]), np.full((1, 2), 255)],
)
def test_semantic_loss_raises_with_invalid_labels(labels):
    with pytest.raises(ValueError):
        semantic_loss(np.zeros((3, 1, 2)), labels)


@pytest.mark.parametrize("fraction", [1.0, 0.3])
def test_semantic_loss_gradient(fraction):
    rng = np.random.default_rng(5)
    logits = rng.standard_normal((4, 6, 7))
    labels = rng.integers(4, size=(6, 7))
    labels[0, :3] = 255
    loss = semantic_loss(logits, labels, fraction)
    _check_gradient(lambda x: semantic_loss(x, labels, fraction).scalar, logits, loss.gradient)


def test_center_loss():
    gt = np.zeros((1, 4, 5))
    assert center_loss(gt, gt).scalar == 0.0
    pred = gt.copy()
    pred[0, 2, 3] = 1.0
    assert center_loss(pred, gt).scalar == pytest.approx(1 / 20)


def test_center_loss_gradient():
    rng = np.random.default_rng(6)
    pred, gt = rng.random((1, 6, 6)), rng.random((1, 6, 6))
    loss = center_loss(pred, gt)
    _check_gradient(lambda x: center_loss(x, gt).scalar, pred, loss.gradient)


def test_offset_loss_bal_hand_value():
    loss = offset_loss_bal([[[3.0]], [[4.0]]], [[[0.0]], [[0.0]]], [[[8.0]]])
    assert loss.scalar == 56.0


def test_offset_loss_bal_zero_weights():
    rng = np.random.default_rng(7)
    pred = rng.standard_normal((2, 5, 5))
    assert offset_loss_bal(pred, np.zeros_like(pred), np.zeros((1, 5, 5))).scalar == 0.0


@pytest.mark.parametrize("seed", range(100))
def test_offset_loss_bal_unit_weights_is_plain_l1(seed):
    rng = np.random.default_rng(seed)
    h, w = (int(v) for v in rng.integers(1, 17, size=2))
    pred = rng.normal(0, 5, size=(2, h, w))
    gt = rng.normal(0, 5, size=(2, h, w))
    bal = offset_loss_bal(pred, gt, np.ones((1, h, w)))
    l1 = offset_loss_l1(pred, gt)
    assert bal.scalar == l1.scalar
    assert np.array_equal(bal.gradient, l1.gradient)
    assert bal.scalar == pytest.approx(np.abs(pred - gt).sum() / (h * w))


def test_offset_loss_bal_raises_with_negative_weights():
    with pytest.raises(ValueError):
        offset_loss_bal(np.zeros((2, 2, 2)), np.zeros((2, 2, 2)), -np.ones((1, 2, 2)))


def test_offset_loss_bal_gradient():
    rng = np.random.default_rng(9)
    pred, gt = rng.standard_normal((2, 6, 6)), rng.standard_normal((2, 6, 6))
    weights = rng.choice([0.0, 1.0, 2.0, 4.0, 8.0], size=(1, 6, 6))
    loss = offset_loss_bal(pred, gt, weights)
    _check_gradient(lambda x: offset_loss_bal(x, gt, weights).scalar, pred, loss.gradient)


def test_loss_config_defaults():
    cfg = LossConfig()
    assert (cfg.lambda_sem, cfg.lambda_cen, cfg.lambda_baol) == (LAMBDA_SEM, LAMBDA_CEN, LAMBDA_BAOL)
    assert (cfg.lambda_sem, cfg.lambda_cen, cfg.lambda_baol) == (1.0, 200.0, 0.0025)
    assert cfg.hard_pixel_fraction == 0.2
    assert LossConfig(hard_pixel_mining=False).hard_pixel_fraction == 1.0


@pytest.mark.parametrize("config", [{"lambda_cen": -1}, {"hard_pixel_fraction": 0.0}])
def test_loss_config_raises_with_invalid_values(config):
    with pytest.raises(ValueError):
        LossConfig.from_dict(config)


def _fixture(margin=50.0, seed=10):
    rng = np.random.default_rng(seed)
    labels = rng.integers(3, size=(4, 4))
    heat = rng.random((1, 4, 4))
    offsets = rng.standard_normal((2, 4, 4))
    weights = rng.choice([0.0, 1.0, 8.0], size=(1, 4, 4))
    targets = TargetSet(
        semantic=LabelGrid(labels),
        offsets=Tensor3(offsets),
        center_heatmap=Tensor3(heat),
        offset_weights=Tensor3(weights),
    )
    preds = PredictionSet(
        sem_logits=Tensor3(_margin_logits(labels, 3, margin)),
        center_heatmap=targets.center_heatmap,
        offsets=targets.offsets,
    )
    return preds, targets


def test_compound_loss_zero_components():
    preds, targets = _fixture()
    loss = compound_loss(preds, targets)
    assert loss.total == pytest.approx(0.0, abs=1e-9)
    assert loss.components["center"] == 0.0
    assert loss.components["offset"] == 0.0


def test_compound_loss_breakdown_reports_default_lambdas():
    preds, targets = _fixture(margin=0.0)
    breakdown = compound_loss(preds, targets).breakdown()
    assert breakdown["lambda_semantic"] == 1.0
    assert breakdown["lambda_center"] == 200.0
    assert breakdown["lambda_offset"] == 0.0025
    assert breakdown["semantic"] == pytest.approx(np.log(3))


def test_compound_loss_is_linear_in_lambda_cen():
    preds, targets = _fixture(margin=1.0)
    preds = preds.replace(center_heatmap=Tensor3(np.ones((1, 4, 4))))
    single = compound_loss(preds, targets, {"lambda_cen": 100.0})
    double = compound_loss(preds, targets, {"lambda_cen": 200.0})
    center = single.components["center"]
    assert double.total - single.total == pytest.approx(100.0 * center)
    assert np.allclose(double.gradients["center_heatmap"], 2.0 * single.gradients["center_heatmap"])


def test_compound_loss_plain_l1_mode():
    preds, targets = _fixture(margin=1.0)
    preds = preds.replace(offsets=Tensor3(np.zeros((2, 4, 4))))
    loss = compound_loss(preds, targets, offset_loss="l1")
    thing = targets.offset_weights.data[0] > 0
    expected = np.abs(targets.offsets.data.astype(np.float64))[:, thing].sum() / 16
    assert loss.components["offset"] == pytest.approx(expected)
    assert loss.lambdas["offset"] == 0.01


def test_compound_loss_raises_with_unknown_offset_loss():
    preds, targets = _fixture()
    with pytest.raises(ValueError):
        compound_loss(preds, targets, offset_loss="huber")
