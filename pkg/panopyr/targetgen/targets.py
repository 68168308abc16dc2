import logging
from typing import List, Sequence, Union

import numpy as np
from scipy import ndimage

from panopyr.pixelgrid import BinaryMask, LabelGrid, Tensor3, distance_transform, gaussian_splat
from panopyr.targetgen import (
    DEFAULT_SIGMA,
    PanopticMap,
    TargetConfig,
    TargetSet,
    WeightLadder,
)
from panopyr.typing import Centroid


LOGGER = logging.getLogger(__name__)


def _index_instances(pan: PanopticMap):
    """Encoded id per instance plus a map of 1-based instance slots (0 off things)."""
    mask = pan.thing_mask().data
    ids, inverse = np.unique(pan.labels.data[mask], return_inverse=True)
    slots = np.zeros(pan.shape, dtype=np.int64)
    slots[mask] = inverse.reshape(-1) + 1
    return ids, slots, mask


def instance_centroids(pan: PanopticMap) -> List[Centroid]:
    """Mass centroid of every thing instance.

    Args:
        pan: Panoptic map.

    Returns:
        `(encoded_id, row, col)` per instance in ascending encoded id order.
    """
    ids, slots, mask = _index_instances(pan)
    if len(ids) == 0:
        return []
    rows, cols = np.nonzero(mask)
    index = slots[rows, cols] - 1
    counts = np.bincount(index, minlength=len(ids)).astype(np.float64)
    row_sum = np.bincount(index, weights=rows.astype(np.float64), minlength=len(ids))
    col_sum = np.bincount(index, weights=cols.astype(np.float64), minlength=len(ids))
    return [
        (int(i), float(r), float(c))
        for i, r, c in zip(ids, row_sum / counts, col_sum / counts)
    ]


def make_center_heatmap(
    centroids: Sequence[Centroid], h: int, w: int, sigma: float = DEFAULT_SIGMA
) -> Tensor3:
    """Gaussian center heatmap with one unit peak per centroid."""
    return gaussian_splat([(r, c) for _, r, c in centroids], sigma, h, w)


def make_offsets(pan: PanopticMap, centroids: Sequence[Centroid]) -> Tensor3:
    """Per-pixel displacement from each thing pixel to its instance centroid.

    Args:
        pan: Panoptic map.
        centroids: Output of `instance_centroids` for the same map.

    Returns:
        Tensor3: `(2, H, W)` row and column offsets, `(0, 0)` off things.

    Raises:
        ValueError: If an instance of the map has no centroid.
    """
    lookup = {int(i): (r, c) for i, r, c in centroids}
    ids, slots, mask = _index_instances(pan)
    missing = [int(i) for i in ids if int(i) not in lookup]
    if missing:
        raise ValueError(f"No centroid given for instances {missing}")

    centers = np.array([lookup[int(i)] for i in ids], dtype=np.float64).reshape(-1, 2)
    offsets = np.zeros((2,) + pan.shape, dtype=np.float64)
    rows, cols = np.nonzero(mask)
    index = slots[rows, cols] - 1
    offsets[0, rows, cols] = centers[index, 0] - rows
    offsets[1, rows, cols] = centers[index, 1] - cols
    return Tensor3(offsets)


def make_boundary_weights(pan: PanopticMap, ladder: WeightLadder = None) -> Tensor3:
    """Boundary-aware offset-loss weights.

    Each thing pixel gets the ladder weight of its distance to the boundary of its own
    instance (image border included); every other pixel gets 0.

    Args:
        pan: Panoptic map.
        ladder (optional): Weight ladder; the 4-region default when omitted.

    Returns:
        Tensor3: `(1, H, W)` weights.
    """
    ladder = ladder or WeightLadder()
    ids, slots, _ = _index_instances(pan)
    weights = np.zeros(pan.shape, dtype=np.float64)
    for slot, box in enumerate(ndimage.find_objects(slots), start=1):
        if box is None:
            continue
        inside = slots[box] == slot
        distance = distance_transform(BinaryMask(inside)).data[0]
        patch = weights[box]
        patch[inside] = ladder.weight_for(distance[inside])
    return Tensor3(weights[None])


def make_semantic(pan: PanopticMap) -> LabelGrid:
    """Class id per pixel; void pixels become the ignore label 255."""
    return LabelGrid(pan.semantic())


def make_targets(
    pan: PanopticMap, config: Union[TargetConfig, dict, None] = None
) -> TargetSet:
    """Craft semantic, offset, center and weight targets from a panoptic map.

    Args:
        pan: Ground-truth panoptic map.
        config (optional): `TargetConfig` or a dict with `sigma` and ladder keys.

    Returns:
        TargetSet: Targets with the map's spatial shape.
    """
    if not isinstance(config, TargetConfig):
        config = TargetConfig.from_dict(config)
    h, w = pan.shape
    centroids = instance_centroids(pan)
    targets = TargetSet(
        semantic=make_semantic(pan),
        offsets=make_offsets(pan, centroids),
        center_heatmap=make_center_heatmap(centroids, h, w, config.sigma),
        offset_weights=make_boundary_weights(pan, config.ladder),
    )
    LOGGER.info(f"Built targets for {len(centroids)} instances on a {h}x{w} map")
    return targets
