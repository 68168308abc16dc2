"""Ground-truth crafting: panoptic maps in, semantic/offset/center/weight targets out."""
from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple

import numpy as np

from panopyr.pixelgrid import BinaryMask, LabelGrid, Tensor3
from panopyr.utils import filter_kwargs


LABEL_DIVISOR = 1000
VOID_CLASS = 255
VOID_LABEL = VOID_CLASS * LABEL_DIVISOR
IGNORE_LABEL = 255
MAX_INSTANCES = LABEL_DIVISOR - 1

DEFAULT_SIGMA = 5.0
DEFAULT_THRESHOLDS = (2.0, 4.0, 8.0)
DEFAULT_WEIGHTS = (8.0, 4.0, 2.0, 1.0)

TARGET_CONFIG_KWARGS = [
    "sigma",
    "region_count",
    "distance_thresholds",
    "weights",
]


def encode(class_id, instance_index):
    """Encode `(class, instance)` as `class * 1000 + instance`."""
    return class_id * LABEL_DIVISOR + instance_index


def decode(label):
    """Split encoded labels into `(class, instance)`."""
    return label // LABEL_DIVISOR, label % LABEL_DIVISOR


class PanopticMap:
    """Per-pixel `(class, instance)` labels plus the thing/stuff class table.

    Args:
        labels: Encoded labels `class_id * 1000 + instance_index`; `255000` is void.
        class_table: `{class_id: is_thing}` for every class id below 255 in use.

    Attributes:
        labels (LabelGrid): Encoded labels.
        class_table (dict): Sorted `{class_id: is_thing}`.

    Raises:
        ValueError: If a class is missing from the table, stuff pixels carry an instance
            index, thing pixels lack one, or the void class carries an instance index.
    """

    __slots__ = ("labels", "class_table")

    def __init__(self, labels, class_table: Mapping[int, bool]):
        self.labels = labels if isinstance(labels, LabelGrid) else LabelGrid(labels)
        table = {int(c): bool(t) for c, t in sorted(class_table.items())}
        bad = [c for c in table if not 0 <= c < VOID_CLASS]
        if bad:
            raise ValueError(f"Class ids must lie in [0, {VOID_CLASS}), got {bad}")
        self.class_table = table
        self._validate()

    def _validate(self):
        ids = np.unique(self.labels.data)
        classes, instances = decode(ids)
        unknown = sorted(
            {int(c) for c in classes if c != VOID_CLASS and int(c) not in self.class_table}
        )
        if unknown:
            raise ValueError(f"Classes {unknown} are missing from the class table")
        for label, c, i in zip(ids, classes, instances):
            c = int(c)
            if c == VOID_CLASS:
                if i != 0:
                    raise ValueError(f"Void label must be {VOID_LABEL}, got {label}")
            elif self.class_table[c] and i == 0:
                raise ValueError(f"Thing class {c} pixel without an instance index")
            elif not self.class_table[c] and i != 0:
                raise ValueError(f"Stuff class {c} pixel with instance index {i}")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.labels.shape

    @property
    def thing_classes(self) -> Tuple[int, ...]:
        return tuple(c for c, thing in self.class_table.items() if thing)

    @property
    def stuff_classes(self) -> Tuple[int, ...]:
        return tuple(c for c, thing in self.class_table.items() if not thing)

    def semantic(self) -> np.ndarray:
        """Class id per pixel, 255 on void."""
        return (self.labels.data // LABEL_DIVISOR).astype(np.uint32)

    def thing_mask(self) -> BinaryMask:
        """Pixels that belong to a thing instance."""
        instances = self.labels.data % LABEL_DIVISOR
        return BinaryMask((instances > 0) & (self.labels.data != VOID_LABEL))

    def void_mask(self) -> BinaryMask:
        return BinaryMask(self.labels.data == VOID_LABEL)

    def segment_ids(self) -> np.ndarray:
        """Sorted encoded ids of every non-void segment."""
        ids = np.unique(self.labels.data)
        return ids[ids != VOID_LABEL]

    def instance_ids(self) -> np.ndarray:
        """Sorted encoded ids of thing instances."""
        ids = self.segment_ids()
        return ids[ids % LABEL_DIVISOR > 0]

    def __eq__(self, other):
        if not isinstance(other, PanopticMap):
            return NotImplemented
        return self.class_table == other.class_table and np.array_equal(
            self.labels.data, other.labels.data
        )

    def __repr__(self):
        h, w = self.shape
        return f"PanopticMap(height={h}, width={w}, segments={len(self.segment_ids())})"


@dataclass(frozen=True)
class WeightLadder:
    """Boundary-distance bands and the offset-loss weight of each band.

    Region `r` holds the pixels with `distance <= distance_thresholds[r]` that no
    earlier region holds; the last region takes everything deeper.

    Attributes:
        region_count: Number of regions.
        distance_thresholds: Strictly ascending band limits in pixels (`region_count - 1`).
        weights: Strictly descending positive weights (`region_count`), largest at the border.
    """

    region_count: int = 4
    distance_thresholds: Tuple[float, ...] = DEFAULT_THRESHOLDS
    weights: Tuple[float, ...] = DEFAULT_WEIGHTS

    def __post_init__(self):
        object.__setattr__(self, "distance_thresholds", tuple(float(t) for t in self.distance_thresholds))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.region_count < 1:
            raise ValueError(f"region_count must be positive, got {self.region_count}")
        if len(self.weights) != self.region_count:
            raise ValueError(
                f"Expected {self.region_count} weights, got {len(self.weights)}"
            )
        if len(self.distance_thresholds) != self.region_count - 1:
            raise ValueError(
                f"Expected {self.region_count - 1} thresholds, got {len(self.distance_thresholds)}"
            )
        if any(b <= a for a, b in zip(self.distance_thresholds, self.distance_thresholds[1:])):
            raise ValueError(f"Thresholds must ascend strictly: {self.distance_thresholds}")
        if any(b >= a for a, b in zip(self.weights, self.weights[1:])):
            raise ValueError(f"Weights must descend strictly: {self.weights}")
        if any(w <= 0 for w in self.weights):
            raise ValueError(f"Weights must be positive: {self.weights}")

    @classmethod
    def interpolated(cls, region_count: int, largest: float = 8.0) -> "WeightLadder":
        """Ladder whose weights fall geometrically from `largest` to 1.

        Thresholds double per band starting at 2 px. With 4 regions this is the
        default ladder; other counts are a convenience, not a validated setting.
        """
        if region_count < 2:
            raise ValueError(f"An interpolated ladder needs 2+ regions, got {region_count}")
        exponents = 1.0 - np.arange(region_count) / (region_count - 1)
        weights = tuple(float(w) for w in largest ** exponents)
        thresholds = tuple(2.0 ** (i + 1) for i in range(region_count - 1))
        return cls(region_count, thresholds, weights)

    def weight_for(self, distance: np.ndarray) -> np.ndarray:
        """Map boundary distances to ladder weights."""
        region = np.searchsorted(np.asarray(self.distance_thresholds), distance, side="left")
        return np.asarray(self.weights)[region]


@dataclass(frozen=True)
class TargetConfig:
    """Settings for `make_targets`."""

    sigma: float = DEFAULT_SIGMA
    ladder: WeightLadder = field(default_factory=WeightLadder)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @classmethod
    def from_dict(cls, config: Optional[dict] = None) -> "TargetConfig":
        """Build from a plain dict; ladder keys may be given flat.

        A bare `region_count` other than 4 selects `WeightLadder.interpolated`.
        """
        config = filter_kwargs(config or {}, TARGET_CONFIG_KWARGS)
        ladder_kwargs = {k: v for k, v in config.items() if k != "sigma"}
        if set(ladder_kwargs) == {"region_count"}:
            ladder = WeightLadder.interpolated(int(ladder_kwargs["region_count"]))
        else:
            ladder = WeightLadder(**ladder_kwargs)
        return cls(sigma=float(config.get("sigma", DEFAULT_SIGMA)), ladder=ladder)


@dataclass(frozen=True, eq=False)
class TargetSet:
    """The four training targets of one image.

    Attributes:
        semantic: Class id per pixel, 255 where ignored.
        offsets: `(2, H, W)` row/col displacement to the instance centroid.
        center_heatmap: `(1, H, W)` Gaussian center bumps in [0, 1].
        offset_weights: `(1, H, W)` boundary-aware weights, 0 off things.
    """

    semantic: LabelGrid
    offsets: Tensor3
    center_heatmap: Tensor3
    offset_weights: Tensor3

    def __post_init__(self):
        shape = self.semantic.shape
        for name, tensor, channels in (
            ("offsets", self.offsets, 2),
            ("center_heatmap", self.center_heatmap, 1),
            ("offset_weights", self.offset_weights, 1),
        ):
            if tensor.channels != channels or (tensor.height, tensor.width) != shape:
                raise ValueError(
                    f"{name} has shape {tensor.shape}, expected ({channels}, {shape[0]}, {shape[1]})"
                )

    @property
    def shape(self) -> Tuple[int, int]:
        return self.semantic.shape


from panopyr.targetgen.targets import (
    instance_centroids,
    make_boundary_weights,
    make_center_heatmap,
    make_offsets,
    make_semantic,
    make_targets,
)
