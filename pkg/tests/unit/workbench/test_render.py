import pytest
import logging
import colorsys

import numpy as np

from panopyr.targetgen import VOID_LABEL, PanopticMap
from panopyr.workbench.render import (
    color_wheel,
    decode_ppm,
    encode_ppm,
    offsets_rgb,
    panoptic_rgb,
    read_ppm,
    render_offsets,
    render_panoptic,
    segment_color,
    write_ppm,
)
from panopyr.workbench.tensorfile import ImageFormatError

LOGGER = logging.getLogger(__name__)

CLASS_TABLE = {0: False, 11: True, 12: True}


def test_segment_color_shares_hue_within_class():
    first, second = segment_color(11001), segment_color(11002)
    assert first != second
    assert colorsys.rgb_to_hsv(*first)[0] == pytest.approx(colorsys.rgb_to_hsv(*second)[0])
    assert colorsys.rgb_to_hsv(*segment_color(12001))[0] != pytest.approx(colorsys.rgb_to_hsv(*first)[0])


@pytest.mark.parametrize("class_id", [11, 12])
def test_panoptic_rgb_distinct_for_every_instance_index(class_id):
    ids = class_id * 1000 + np.arange(1, 1000)
    rgb = panoptic_rgb(PanopticMap(ids.reshape(27, 37), CLASS_TABLE)).reshape(-1, 3)
    triples = {tuple(p) for p in rgb.tolist()}
    assert len(triples) == 999
    assert (0, 0, 0) not in triples
    stuff = np.round(np.array(segment_color(class_id * 1000)) * 255.0).astype(int)
    assert tuple(stuff.tolist()) not in triples
    hue = colorsys.rgb_to_hsv(*segment_color(class_id * 1000 + 1))[0]
    for segment_id in ids.tolist():
        assert colorsys.rgb_to_hsv(*segment_color(segment_id))[0] == pytest.approx(hue, abs=1e-9)


def test_segment_color_void_is_black():
    assert segment_color(VOID_LABEL) == (0.0, 0.0, 0.0)


def test_panoptic_rgb():
    pan = PanopticMap(np.array([[0, 11001, 11002, VOID_LABEL]]), CLASS_TABLE)
    rgb = panoptic_rgb(pan)
    assert rgb.shape == (1, 4, 3)
    assert rgb.dtype == np.uint8
    assert len({tuple(p) for p in rgb[0]}) == 4
    assert rgb[0, 3].tolist() == [0, 0, 0]


def test_render_panoptic_is_deterministic():
    labels = np.zeros((6, 8), dtype=np.int64)
    labels[1:3, 1:5] = 11001
    pan = PanopticMap(labels, CLASS_TABLE)
    assert render_panoptic(pan) == render_panoptic(PanopticMap(labels.copy(), CLASS_TABLE))
    assert render_panoptic(pan).startswith(b"P6")


def test_color_wheel():
    wheel = color_wheel()
    assert wheel.shape == (55, 3)
    assert wheel[0].tolist() == [1.0, 0.0, 0.0]
    assert wheel.min() >= 0.0 and wheel.max() <= 1.0


def test_offsets_rgb_zero_is_white():
    assert np.all(offsets_rgb(np.zeros((2, 3, 4))) == 255)


def test_offsets_rgb_opposite_directions_differ():
    off = np.zeros((2, 1, 2))
    off[1, 0, 0], off[1, 0, 1] = 1.0, -1.0
    rgb = offsets_rgb(off)
    assert rgb[0, 0].tolist() != rgb[0, 1].tolist()


def test_offsets_rgb_raises_with_bad_shape():
    with pytest.raises(ValueError):
        offsets_rgb(np.zeros((3, 2, 2)))


def test_ppm_round_trip(tmp_path):
    rgb = np.random.default_rng(0).integers(0, 256, size=(5, 7, 3)).astype(np.uint8)
    assert np.array_equal(decode_ppm(encode_ppm(rgb)), rgb)
    path = tmp_path / "offsets.ppm"
    write_ppm(path, render_offsets(np.ones((2, 5, 7))))
    assert read_ppm(path).shape == (5, 7, 3)


@pytest.mark.parametrize("data", [b"", b"P6 garbage", b"PSWT\x01"])
def test_decode_ppm_raises_with_garbage(data):
    with pytest.raises(ImageFormatError):
        decode_ppm(data)


def test_encode_ppm_raises_with_bad_shape():
    with pytest.raises(ValueError):
        encode_ppm(np.zeros((4, 4), dtype=np.uint8))
