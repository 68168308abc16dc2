"""Conversions between domain objects and named tensors."""
from collections import OrderedDict
from typing import List, Mapping, Optional, Tuple

import numpy as np

from panopyr.panofuse import DetectedCenter
from panopyr.pixelgrid import LabelGrid, Tensor3
from panopyr.pyramidnet import PredictionSet
from panopyr.pyramidnet.params import META_CONFIG, PRNG_NAME, NetParams
from panopyr.targetgen import VOID_CLASS, PanopticMap, TargetSet
from panopyr.typing import ClassTable, NamedTensors
from panopyr.workbench.tensorfile import TensorFileError, require


CLASS_ABSENT, CLASS_STUFF, CLASS_THING = 0, 1, 2
TARGET_TENSORS = ["semantic", "offsets", "center_heatmap", "offset_weights"]
PREDICTION_TENSORS = ["sem_logits", "center_heatmap", "offsets"]


def class_table_to_array(class_table: ClassTable) -> np.ndarray:
    """255 codes, one per class id: 0 absent, 1 stuff, 2 thing."""
    codes = np.zeros(VOID_CLASS, dtype=np.uint8)
    for class_id, thing in class_table.items():
        codes[class_id] = CLASS_THING if thing else CLASS_STUFF
    return codes


def class_table_from_array(codes: np.ndarray) -> dict:
    codes = np.asarray(codes).reshape(-1)
    if codes.size != VOID_CLASS or codes.max(initial=0) > CLASS_THING:
        raise TensorFileError(f"class_table must hold {VOID_CLASS} codes in 0..2")
    return {int(c): bool(codes[c] == CLASS_THING) for c in np.nonzero(codes)[0]}


def panoptic_to_tensors(pan: PanopticMap) -> NamedTensors:
    return OrderedDict(
        [("panoptic", pan.labels.data), ("class_table", class_table_to_array(pan.class_table))]
    )


def panoptic_from_tensors(tensors: Mapping[str, np.ndarray]) -> PanopticMap:
    require(tensors, "panoptic", "class_table")
    return PanopticMap(tensors["panoptic"], class_table_from_array(tensors["class_table"]))


def targets_to_tensors(targets: TargetSet, pan: Optional[PanopticMap] = None) -> NamedTensors:
    """Targets plus, when given, the panoptic map they were crafted from."""
    tensors = OrderedDict(
        [
            ("semantic", targets.semantic.data),
            ("offsets", targets.offsets.data),
            ("center_heatmap", targets.center_heatmap.data),
            ("offset_weights", targets.offset_weights.data),
        ]
    )
    if pan is not None:
        tensors.update(panoptic_to_tensors(pan))
    return tensors


def targets_from_tensors(tensors: Mapping[str, np.ndarray]) -> TargetSet:
    require(tensors, *TARGET_TENSORS)
    return TargetSet(
        semantic=LabelGrid(tensors["semantic"]),
        offsets=Tensor3(tensors["offsets"]),
        center_heatmap=Tensor3(tensors["center_heatmap"]),
        offset_weights=Tensor3(tensors["offset_weights"]),
    )


def predictions_to_tensors(preds: PredictionSet) -> NamedTensors:
    return OrderedDict((name, getattr(preds, name).data) for name in PREDICTION_TENSORS)


def predictions_from_tensors(tensors: Mapping[str, np.ndarray]) -> PredictionSet:
    require(tensors, *PREDICTION_TENSORS)
    return PredictionSet(**{name: Tensor3(tensors[name]) for name in PREDICTION_TENSORS})


def params_to_tensors(params: NetParams) -> NamedTensors:
    return params.to_tensors()


def params_from_tensors(tensors: Mapping[str, np.ndarray]) -> NetParams:
    require(tensors, META_CONFIG)
    return NetParams.from_tensors(tensors)


def centers_to_array(centers: List[DetectedCenter]) -> np.ndarray:
    """`K x 4` float32 rows of `(row, col, score, index)`."""
    rows = [(c.row, c.col, c.score, c.index) for c in centers]
    return np.array(rows, dtype=np.float32).reshape(-1, 4)


def centers_from_array(array: np.ndarray) -> List[DetectedCenter]:
    array = np.asarray(array, dtype=np.float64)
    if array.ndim != 2 or array.shape[1] != 4:
        raise TensorFileError(f"centers must have shape (K, 4), got {array.shape}")
    return [DetectedCenter(int(r), int(c), float(s), int(i)) for r, c, s, i in array]


def fused_to_tensors(pan: PanopticMap, centers: List[DetectedCenter]) -> NamedTensors:
    tensors = panoptic_to_tensors(pan)
    tensors["centers"] = centers_to_array(centers)
    return tensors


def fused_from_tensors(tensors: Mapping[str, np.ndarray]) -> Tuple[PanopticMap, List[DetectedCenter]]:
    centers = centers_from_array(tensors["centers"]) if "centers" in tensors else []
    return panoptic_from_tensors(tensors), centers


def scene_to_tensors(image: Tensor3, pan: PanopticMap, seed: int) -> NamedTensors:
    """Scene image and ground truth, tagged with the generator name and seed."""
    tensors = OrderedDict([("image", image.data)])
    tensors.update(panoptic_to_tensors(pan))
    tensors["meta.prng"] = np.frombuffer(PRNG_NAME.encode("ascii"), dtype=np.uint8)
    tensors["meta.seed"] = np.array([seed], dtype=np.uint32)
    return tensors


def scene_from_tensors(tensors: Mapping[str, np.ndarray]) -> Tuple[Tensor3, PanopticMap]:
    require(tensors, "image")
    return Tensor3(tensors["image"]), panoptic_from_tensors(tensors)


def image_from_tensors(tensors: Mapping[str, np.ndarray]) -> Tensor3:
    """The `image` tensor of a scene or image file."""
    require(tensors, "image")
    return Tensor3(tensors["image"])
