"""Post-processing: center NMS, offset grouping, semantic voting and oracle studies."""
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from panopyr.targetgen import MAX_INSTANCES
from panopyr.utils import filter_kwargs, parse_flags


ORACLE_MARGIN = 10.0
ASSIGN_CHUNK = 2 ** 22

FUSE_CONFIG_KWARGS = [
    "nms_window",
    "nms_threshold",
    "max_centers",
    "stuff_area_limit",
]

ORACLE_FLAG_NAMES = {
    "sem": "semantic",
    "semantic": "semantic",
    "cen": "centers",
    "centers": "centers",
    "off": "offsets",
    "offsets": "offsets",
}


@dataclass(frozen=True)
class FuseConfig:
    """Post-processing settings.

    Attributes:
        nms_window: Odd NMS window side, at least 3.
        nms_threshold: Minimal center score.
        max_centers: Centers kept after thresholding, at most 999.
        stuff_area_limit: Stuff classes covering fewer pixels become void; 0 disables.
    """

    nms_window: int = 7
    nms_threshold: float = 0.1
    max_centers: int = 200
    stuff_area_limit: int = 0

    def __post_init__(self):
        if self.nms_window < 3 or self.nms_window % 2 == 0:
            raise ValueError(f"nms_window must be odd and >= 3, got {self.nms_window}")
        if self.nms_threshold < 0:
            raise ValueError(f"nms_threshold must be non-negative, got {self.nms_threshold}")
        if not 1 <= self.max_centers <= MAX_INSTANCES:
            raise ValueError(f"max_centers must lie in [1, {MAX_INSTANCES}], got {self.max_centers}")
        if self.stuff_area_limit < 0:
            raise ValueError(f"stuff_area_limit must be non-negative, got {self.stuff_area_limit}")

    @classmethod
    def from_dict(cls, config: Optional[dict] = None) -> "FuseConfig":
        return cls(**filter_kwargs(config or {}, FUSE_CONFIG_KWARGS))


@dataclass(frozen=True)
class DetectedCenter:
    """A center-heatmap peak.

    Attributes:
        row: Peak row.
        col: Peak column.
        score: Heatmap value at the peak.
        index: 1-based rank by descending score, ties by row-major position.
    """

    row: int
    col: int
    score: float
    index: int


@dataclass(frozen=True)
class OracleFlags:
    """Which predictions `oracle_substitute` swaps for ground truth."""

    semantic: bool = False
    centers: bool = False
    offsets: bool = False

    @classmethod
    def from_names(cls, names: Union[str, Iterable[str], None]) -> "OracleFlags":
        """Parse `"sem,cen,off"` style flags (long names accepted too).

        Raises:
            ValueError: On an unknown flag.
        """
        if not isinstance(names, str):
            names = ",".join(names or [])
        chosen = parse_flags(names, ORACLE_FLAG_NAMES)
        return cls(**{ORACLE_FLAG_NAMES[n]: True for n in chosen})

    def any(self) -> bool:
        return self.semantic or self.centers or self.offsets


from panopyr.panofuse.fusion import (
    assign_instances,
    construct_panoptic,
    fuse_panoptic,
    nms_centers,
    oracle_substitute,
    vote_semantics,
)
