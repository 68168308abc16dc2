from typing import Dict, List, Mapping, Tuple, Union

import numpy as np


ClassTable = Mapping[int, bool]
"""Class id -> True for thing classes, False for stuff classes."""

Centroid = Tuple[int, float, float]
"""(encoded panoptic id, centroid row, centroid col)."""

NamedTensors = Dict[str, np.ndarray]

Detection = Union[
    Tuple[np.ndarray, int, float], Tuple[np.ndarray, int, float, Tuple[int, int]]
]
"""(mask, class id, score) with an optional (row, col) peak for tie-breaking."""

GroundTruthInstance = Tuple[np.ndarray, int]

ImageDetections = List[Detection]
ImageGroundTruth = List[GroundTruthInstance]
