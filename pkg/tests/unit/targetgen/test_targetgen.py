import pytest
import logging

import numpy as np

from panopyr.targetgen import (
    VOID_LABEL,
    PanopticMap,
    TargetConfig,
    WeightLadder,
    decode,
    encode,
    instance_centroids,
    make_boundary_weights,
    make_center_heatmap,
    make_offsets,
    make_semantic,
    make_targets,
)

LOGGER = logging.getLogger(__name__)

CLASS_TABLE = {0: False, 1: False, 11: True, 12: True}


def _map(labels):
    return PanopticMap(np.array(labels, dtype=np.int64), CLASS_TABLE)


def test_encode_decode():
    assert encode(11, 3) == 11003
    assert encode(np.array([0, 12]), np.array([0, 7])).tolist() == [0, 12007]
    classes, instances = decode(np.array([11003, 255000]))
    assert classes.tolist() == [11, 255]
    assert instances.tolist() == [3, 0]


@pytest.mark.parametrize(
    "labels",
    [
        [[11000]],  # thing without instance
        [[1002]],  # stuff with instance
        [[255001]],  # void with instance
        [[5000]],  # class missing from the table
    ],
)
def test_panoptic_map_raises_with_invalid_labels(labels):
    with pytest.raises(ValueError):
        _map(labels)


def test_panoptic_map_views():
    pan = _map([[0, 11001, 11001], [1000, 12001, VOID_LABEL]])
    assert pan.shape == (2, 3)
    assert pan.thing_classes == (11, 12)
    assert pan.stuff_classes == (0, 1)
    assert pan.semantic().tolist() == [[0, 11, 11], [1, 12, 255]]
    assert pan.thing_mask().data.tolist() == [[False, True, True], [False, True, False]]
    assert pan.void_mask().data.sum() == 1
    assert pan.instance_ids().tolist() == [11001, 12001]
    assert pan == _map([[0, 11001, 11001], [1000, 12001, VOID_LABEL]])


def test_instance_centroids_pair():
    pan = _map([[11001, 11001], [0, 0]])
    assert instance_centroids(pan) == [(11001, 0.0, 0.5)]


def test_instance_centroids_single_pixel():
    labels = np.zeros((5, 9), dtype=np.int64)
    labels[3, 7] = 12004
    assert instance_centroids(_map(labels)) == [(12004, 3.0, 7.0)]


def test_instance_centroids_lshape():
    pan = _map([[11001, 0], [11001, 11001]])
    (_, row, col), = instance_centroids(pan)
    assert row == pytest.approx(2 / 3)
    assert col == pytest.approx(1 / 3)


def test_make_center_heatmap_empty():
    assert np.all(make_center_heatmap([], 8, 8).data == 0.0)


def test_make_center_heatmap_midpoint():
    heat = make_center_heatmap([(11001, 10.0, 5.0), (11002, 10.0, 15.0)], 21, 21, sigma=5.0)
    assert heat.data[0, 10, 5] == 1.0
    assert heat.data[0, 10, 10] == pytest.approx(np.exp(-0.5), rel=1e-6)


def test_make_offsets_points_at_centroid():
    pan = _map([[11001, 11001, 11001], [0, 0, 0]])
    offsets = make_offsets(pan, instance_centroids(pan)).data
    assert offsets[:, 0, 1].tolist() == [0.0, 0.0]
    assert offsets[:, 0, 0].tolist() == [0.0, 1.0]
    assert offsets[:, 0, 2].tolist() == [0.0, -1.0]
    assert np.all(offsets[:, 1, :] == 0.0)


def test_make_offsets_raises_with_missing_centroid():
    pan = _map([[11001, 12001]])
    with pytest.raises(ValueError):
        make_offsets(pan, [(11001, 0.0, 0.0)])


def test_make_boundary_weights_default_ladder():
    labels = np.zeros((48, 48), dtype=np.int64)
    labels[2:46, 2:46] = 11001
    weights = make_boundary_weights(_map(labels)).data[0]
    assert weights[0, 0] == 0.0
    assert weights[2, 10] == 8.0
    assert weights[24, 24] == 1.0


def test_make_boundary_weights_follows_distance_law():
    labels = np.zeros((20, 20), dtype=np.int64)
    labels[1:19, 1:19] = 11001
    weights = make_boundary_weights(_map(labels)).data[0]
    # row 1 + k sits at distance k + 1 from the instance boundary
    assert [weights[1 + k, 9] for k in range(6)] == [8.0, 8.0, 4.0, 4.0, 2.0, 2.0]
    assert weights[9, 9] == 1.0


def test_make_boundary_weights_uses_own_instance_boundary():
    labels = np.zeros((12, 12), dtype=np.int64)
    labels[:, :6] = 11001
    labels[:, 6:] = 11002
    weights = make_boundary_weights(_map(labels)).data[0]
    assert weights[6, 5] == 8.0
    assert weights[6, 6] == 8.0


def test_weight_ladder_raises_with_bad_shape():
    with pytest.raises(ValueError):
        WeightLadder(region_count=3)
    with pytest.raises(ValueError):
        WeightLadder(weights=(1.0, 2.0, 4.0, 8.0))


def test_weight_ladder_interpolated_matches_default():
    ladder = WeightLadder.interpolated(4)
    assert ladder.distance_thresholds == WeightLadder().distance_thresholds
    assert ladder.weights == pytest.approx(WeightLadder().weights)


def test_target_config_from_dict():
    config = TargetConfig.from_dict({"sigma": 3, "region_count": 3, "bucket": "ignored"})
    assert config.sigma == 3.0
    assert config.ladder.region_count == 3
    assert config.ladder.weights[0] == 8.0


def test_make_semantic_marks_void_ignored():
    pan = _map([[VOID_LABEL, 1000]])
    assert make_semantic(pan).data.tolist() == [[255, 1]]


def test_make_targets_all_void():
    pan = _map(np.full((6, 7), VOID_LABEL))
    targets = make_targets(pan)
    assert np.all(targets.semantic.data == 255)
    for tensor in (targets.offsets, targets.center_heatmap, targets.offset_weights):
        assert np.all(tensor.data == 0.0)


def test_make_targets_one_instance():
    labels = np.zeros((16, 16), dtype=np.int64)
    labels[4:9, 6:11] = 12001
    pan = _map(labels)
    targets = make_targets(pan, {"sigma": 2.0})
    centroids = instance_centroids(pan)
    assert centroids == [(12001, 6.0, 8.0)]
    assert targets.center_heatmap.data[0, 6, 8] == 1.0
    assert np.array_equal(targets.offsets.data, make_offsets(pan, centroids).data)
    assert np.array_equal(targets.offset_weights.data, make_boundary_weights(pan).data)
    assert np.array_equal(targets.semantic.data, pan.semantic())
