"""Tooling around the math: tensor files, synthetic scenes, rendering, benchmarks and the CLI."""
from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple

import pandas as pd

from panopyr.utils import filter_kwargs


DEFAULT_CLASS_TABLE = {0: False, 1: False, 2: False, 11: True, 12: True, 13: True}
SHAPE_FAMILIES = ("rectangle", "ellipse", "lshape")
MIN_EXTENT = 3
BENCH_STAGES = ["forward", "nms", "assign", "vote", "construct"]
MIN_REPS = 5

SCENE_SPEC_KWARGS = [
    "seed",
    "height",
    "width",
    "class_table",
    "instance_range",
    "shapes",
    "min_separation",
    "extent_range",
    "stuff_regions",
    "noise",
    "max_retries",
]


@dataclass(frozen=True)
class SceneSpec:
    """Recipe of one synthetic scene.

    Attributes:
        seed: Seed of the PCG64 generator.
        height, width: Image size in pixels.
        class_table: `{class_id: is_thing}`; needs a stuff class for the background.
        instance_range: Inclusive bounds of the instance count.
        shapes: Allowed instance shapes among rectangle, ellipse and lshape.
        min_separation: Minimal distance between instance centroids in pixels.
        extent_range: Inclusive bounds of an instance's bounding-box side.
        stuff_regions: Number of sites of the background partition.
        noise: Standard deviation of the per-pixel image noise.
        max_retries: Placement attempts per instance before giving up.
    """

    seed: int = 0
    height: int = 128
    width: int = 128
    class_table: Mapping[int, bool] = field(default_factory=lambda: dict(DEFAULT_CLASS_TABLE))
    instance_range: Tuple[int, int] = (3, 8)
    shapes: Tuple[str, ...] = SHAPE_FAMILIES
    min_separation: float = 8.0
    extent_range: Tuple[int, int] = (MIN_EXTENT, 16)
    stuff_regions: int = 4
    noise: float = 0.05
    max_retries: int = 200

    def __post_init__(self):
        object.__setattr__(self, "instance_range", tuple(int(n) for n in self.instance_range))
        object.__setattr__(self, "extent_range", tuple(int(n) for n in self.extent_range))
        object.__setattr__(self, "shapes", tuple(self.shapes))
        low, high = self.instance_range
        if not 0 <= low <= high:
            raise ValueError(f"Invalid instance_range {self.instance_range}")
        small, large = self.extent_range
        if not MIN_EXTENT <= small <= large:
            raise ValueError(f"extent_range must satisfy {MIN_EXTENT} <= low <= high, got {self.extent_range}")
        if large > min(self.height, self.width):
            raise ValueError(f"Extent {large} does not fit a {self.height}x{self.width} image")
        unknown = [s for s in self.shapes if s not in SHAPE_FAMILIES]
        if unknown or not self.shapes:
            raise ValueError(f"Shapes must be drawn from {SHAPE_FAMILIES}, got {self.shapes}")
        if not any(not thing for thing in self.class_table.values()):
            raise ValueError("The class table needs a stuff class for the background")
        if high > 0 and not any(self.class_table.values()):
            raise ValueError("Instances requested but the class table has no thing class")
        if self.stuff_regions < 1 or self.max_retries < 1:
            raise ValueError("stuff_regions and max_retries must be positive")
        if not 0 <= self.seed < 2 ** 32:
            raise ValueError(f"seed must fit in 32 unsigned bits, got {self.seed}")

    @classmethod
    def from_dict(cls, config: Optional[dict] = None) -> "SceneSpec":
        return cls(**filter_kwargs(config or {}, SCENE_SPEC_KWARGS))


@dataclass(frozen=True, eq=False)
class BenchReport:
    """Per-stage wall times of the inference pipeline.

    Attributes:
        timings: Table indexed by stage with `mean`, `std` (seconds) and `reps` columns.
        height, width: Image size.
        threads: Threads used by instance assignment.
        reps: Repetitions per stage.
        digest: SHA-256 of the fused panoptic labels.
    """

    timings: pd.DataFrame
    height: int
    width: int
    threads: int
    reps: int
    digest: str

    def to_text(self) -> str:
        lines = [
            f"size {self.height}x{self.width} threads {self.threads} reps {self.reps}",
            f"digest {self.digest}",
        ]
        for stage, row in self.timings.iterrows():
            lines.append(f"{stage} mean {row['mean']:.6f} std {row['std']:.6f}")
        return "\n".join(lines) + "\n"


from panopyr.workbench.tensorfile import (
    BadMagicError,
    DuplicateNameError,
    ImageFormatError,
    MissingTensorError,
    TensorFileError,
    TruncatedPayloadError,
    UnknownDtypeError,
    UnsupportedVersionError,
    read_tensors,
    write_tensors,
)
from panopyr.workbench.scenes import synth_scene
from panopyr.workbench.render import read_ppm, render_offsets, render_panoptic, write_ppm
from panopyr.workbench.bench import bench_pipeline
