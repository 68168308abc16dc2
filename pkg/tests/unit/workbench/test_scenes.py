import pytest
import logging

import numpy as np
from scipy import ndimage

from panopyr.panofuse import fuse_panoptic, oracle_substitute
from panopyr.pyramidnet import PredictionSet
from panopyr.pixelgrid import Tensor3
from panopyr.targetgen import instance_centroids, make_targets
from panopyr.workbench import DEFAULT_CLASS_TABLE, SceneSpec
from panopyr.workbench import scenes
from panopyr.workbench.scenes import make_rng, shape_mask, synth_scene

LOGGER = logging.getLogger(__name__)


@pytest.mark.parametrize("kind", ["rectangle", "ellipse", "lshape"])
@pytest.mark.parametrize("size", [(3, 3), (5, 9), (16, 7)])
def test_shape_mask_fills_its_box(kind, size):
    mask = shape_mask(kind, *size)
    assert mask.shape == size
    assert mask[0].any() and mask[-1].any() and mask[:, 0].any() and mask[:, -1].any()
    _, parts = ndimage.label(mask)
    assert parts == 1


def test_shape_mask_raises_with_unknown_shape():
    with pytest.raises(ValueError):
        shape_mask("triangle", 4, 4)


def test_make_rng_is_pcg64():
    assert isinstance(make_rng(1).bit_generator, np.random.PCG64)


@pytest.mark.parametrize(
    "config",
    [
        {"instance_range": (5, 2)},
        {"extent_range": (2, 8)},
        {"extent_range": (3, 200)},
        {"shapes": ("triangle",)},
        {"class_table": {11: True}},
        {"seed": -1},
    ],
)
def test_scene_spec_raises_with_invalid_values(config):
    with pytest.raises(ValueError):
        SceneSpec.from_dict(config)


def test_synth_scene_is_deterministic():
    spec = SceneSpec(seed=7, height=64, width=96)
    image_a, pan_a = synth_scene(spec)
    image_b, pan_b = synth_scene(spec)
    assert np.array_equal(image_a.data, image_b.data)
    assert pan_a == pan_b
    _, pan_c = synth_scene(SceneSpec(seed=8, height=64, width=96))
    assert pan_c != pan_a


@pytest.mark.parametrize("seed", range(6))
def test_synth_scene_respects_spec(seed):
    spec = SceneSpec(seed=seed, height=64, width=64, instance_range=(2, 5))
    image, pan = synth_scene(spec)
    assert image.shape == (3, 64, 64)
    assert image.data.min() >= 0.0 and image.data.max() <= 1.0
    assert pan.class_table == DEFAULT_CLASS_TABLE
    centroids = instance_centroids(pan)
    assert 2 <= len(centroids) <= 5
    points = np.array([(r, c) for _, r, c in centroids])
    gaps = np.hypot(*(points[:, None, :] - points[None, :, :]).transpose(2, 0, 1))
    assert gaps[np.triu_indices(len(points), 1)].min() >= spec.min_separation - 1e-9
    for instance_id in pan.instance_ids():
        _, parts = ndimage.label(pan.labels.data == instance_id)
        assert parts == 1


def test_synth_scene_ranks_ids_through_encode(mocker):
    spy = mocker.spy(scenes, "encode")
    _, pan = synth_scene(SceneSpec(seed=4, height=64, width=64, instance_range=(3, 3)))
    assert spy.call_count >= 1 + 2 * 3
    ranks = sorted(int(i) % 1000 for i in pan.instance_ids())
    assert ranks == [1, 2, 3]


def test_synth_scene_without_instances():
    _, pan = synth_scene(SceneSpec(seed=2, height=32, width=32, instance_range=(0, 0)))
    assert len(pan.instance_ids()) == 0
    assert not pan.void_mask().data.any()


def test_synth_scene_raises_when_instances_do_not_fit():
    spec = SceneSpec(seed=0, height=16, width=16, instance_range=(20, 20), extent_range=(8, 12), max_retries=5)
    with pytest.raises(ValueError):
        synth_scene(spec)


@pytest.mark.parametrize("seed", range(3))
def test_synth_scene_survives_target_round_trip(seed):
    spec = SceneSpec(seed=seed, height=64, width=64)
    _, pan = synth_scene(spec)
    targets = make_targets(pan)
    empty = PredictionSet(
        sem_logits=Tensor3(np.zeros((14, 64, 64))),
        center_heatmap=Tensor3(np.zeros((1, 64, 64))),
        offsets=Tensor3(np.zeros((2, 64, 64))),
    )
    fused, _ = fuse_panoptic(oracle_substitute(empty, targets, "sem,cen,off"), pan.class_table)
    assert fused == pan
