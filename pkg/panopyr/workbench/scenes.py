import logging
from typing import List, Tuple

import numpy as np

from panopyr.panofuse import FuseConfig, nms_centers
from panopyr.pixelgrid import Tensor3
from panopyr.targetgen import (
    MAX_INSTANCES,
    PanopticMap,
    decode,
    encode,
    instance_centroids,
    make_center_heatmap,
)
from panopyr.workbench import SceneSpec


LOGGER = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    """The scene generator: PCG64 seeded with `seed`."""
    return np.random.Generator(np.random.PCG64(seed))


def shape_mask(kind: str, height: int, width: int) -> np.ndarray:
    """4-connected instance mask filling a `height x width` box.

    Args:
        kind: `rectangle`, `ellipse` or `lshape`.
        height: Box height, at least 3.
        width: Box width, at least 3.

    Returns:
        numpy.ndarray: Boolean mask touching all four box sides.
    """
    if kind == "rectangle":
        return np.ones((height, width), dtype=bool)
    if kind == "ellipse":
        rows = (np.arange(height) - (height - 1) / 2.0) / (height / 2.0)
        cols = (np.arange(width) - (width - 1) / 2.0) / (width / 2.0)
        return rows[:, None] ** 2 + cols[None, :] ** 2 <= 1.0
    if kind == "lshape":
        mask = np.ones((height, width), dtype=bool)
        thickness = max(1, min(height, width) // 2)
        mask[: height - thickness, thickness:] = False
        return mask
    raise ValueError(f"Unknown shape {kind!r}")


def _stuff_background(rng: np.random.Generator, spec: SceneSpec) -> np.ndarray:
    """Voronoi partition of the image into stuff classes."""
    stuff = sorted(c for c, thing in spec.class_table.items() if not thing)
    site_rows = rng.uniform(0, spec.height, spec.stuff_regions)
    site_cols = rng.uniform(0, spec.width, spec.stuff_regions)
    site_classes = np.array(stuff)[rng.integers(len(stuff), size=spec.stuff_regions)]
    rows = np.arange(spec.height, dtype=np.float64)[:, None, None]
    cols = np.arange(spec.width, dtype=np.float64)[None, :, None]
    d2 = (rows - site_rows) ** 2 + (cols - site_cols) ** 2
    return site_classes[np.argmin(d2, axis=2)]


def _place_instances(
    rng: np.random.Generator, spec: SceneSpec
) -> List[Tuple[slice, slice, np.ndarray, int]]:
    """Non-overlapping instances with separated centroids.

    Raises:
        ValueError: If an instance cannot be placed within `max_retries` attempts.
    """
    things = sorted(c for c, thing in spec.class_table.items() if thing)
    low, high = spec.instance_range
    count = int(rng.integers(low, high + 1))
    small, large = spec.extent_range
    occupied = np.zeros((spec.height, spec.width), dtype=bool)
    centroids: List[Tuple[float, float]] = []
    placed = []
    for k in range(count):
        for _ in range(spec.max_retries):
            kind = spec.shapes[int(rng.integers(len(spec.shapes)))]
            h, w = (int(v) for v in rng.integers(small, large + 1, size=2))
            top = int(rng.integers(0, spec.height - h + 1))
            left = int(rng.integers(0, spec.width - w + 1))
            mask = shape_mask(kind, h, w)
            box = (slice(top, top + h), slice(left, left + w))
            if (occupied[box] & mask).any():
                continue
            rows, cols = np.nonzero(mask)
            centroid = (top + rows.mean(), left + cols.mean())
            if any(np.hypot(centroid[0] - r, centroid[1] - c) < spec.min_separation for r, c in centroids):
                continue
            break
        else:
            raise ValueError(
                f"Could not place instance {k + 1} of {count} after {spec.max_retries} attempts "
                f"(seed {spec.seed}, {spec.height}x{spec.width})"
            )
        occupied[box] |= mask
        centroids.append(centroid)
        placed.append((box[0], box[1], mask, things[int(rng.integers(len(things)))]))
    return placed


def _canonical_ids(pan: PanopticMap) -> dict:
    """Map provisional instance ids to `class * 1000 + rank` with ranks in center-peak order.

    Ranks follow the order in which non-maximal suppression reports the instance peaks
    of the ground-truth heatmap (descending score, then row-major), so fusing oracle
    predictions reproduces the labels exactly.
    """
    h, w = pan.shape
    centroids = instance_centroids(pan)
    if not centroids:
        return {}
    centers = nms_centers(
        make_center_heatmap(centroids, h, w), FuseConfig(max_centers=MAX_INSTANCES)
    )
    points = np.array([(r, c) for _, r, c in centroids])
    owners = [
        int(np.argmin((points[:, 0] - ctr.row) ** 2 + (points[:, 1] - ctr.col) ** 2))
        for ctr in centers
    ]
    if sorted(owners) != list(range(len(centroids))):
        raise ValueError("Instance centers are not separable into one peak per instance")
    return {
        centroids[owner][0]: encode(decode(centroids[owner][0])[0], rank)
        for rank, owner in enumerate(owners, start=1)
    }


def synth_scene(spec: SceneSpec = None) -> Tuple[Tensor3, PanopticMap]:
    """Draw a deterministic synthetic scene and its panoptic ground truth.

    The background is a Voronoi partition into stuff classes. Thing instances are
    rectangles, ellipses or L-shapes that never overlap and keep their centroids at
    least `min_separation` apart. Every segment gets a seeded color plus seeded noise.

    Args:
        spec (optional): Scene recipe; `SceneSpec()` when omitted.

    Returns:
        tuple: `(3, H, W)` image in [0, 1] and the ground-truth `PanopticMap`.

    Raises:
        ValueError: If the instances cannot be placed.
    """
    spec = spec or SceneSpec()
    if spec.instance_range[1] > MAX_INSTANCES:
        raise ValueError(f"At most {MAX_INSTANCES} instances fit the label encoding")
    rng = make_rng(spec.seed)

    labels = encode(_stuff_background(rng, spec).astype(np.int64), 0)
    for index, (rows, cols, mask, class_id) in enumerate(_place_instances(rng, spec), start=1):
        labels[rows, cols][mask] = encode(class_id, index)
    provisional = PanopticMap(labels, spec.class_table)

    canonical = _canonical_ids(provisional)
    lookup_ids = np.array(sorted(canonical), dtype=np.int64)
    if len(lookup_ids):
        is_instance = np.isin(labels, lookup_ids)
        final = np.array([canonical[i] for i in lookup_ids], dtype=np.int64)
        labels[is_instance] = final[np.searchsorted(lookup_ids, labels[is_instance])]
    pan = PanopticMap(labels, spec.class_table)

    segments = pan.segment_ids()
    colors = rng.uniform(0.1, 0.9, size=(len(segments), 3))
    segment_index = np.searchsorted(segments, pan.labels.data)
    image = colors[segment_index].transpose(2, 0, 1)
    image = image + rng.normal(0.0, spec.noise, size=image.shape)
    LOGGER.info(
        f"Synthesized {len(canonical)} instances on a {spec.height}x{spec.width} scene "
        f"(seed {spec.seed})"
    )
    return Tensor3(np.clip(image, 0.0, 1.0)), pan
