import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from panopyr.panofuse import (
    ASSIGN_CHUNK,
    ORACLE_MARGIN,
    DetectedCenter,
    FuseConfig,
    OracleFlags,
)
from panopyr.pixelgrid import LABEL_DTYPE, BinaryMask, LabelGrid, Tensor3, argmax_channel
from panopyr.targetgen import (
    IGNORE_LABEL,
    MAX_INSTANCES,
    VOID_CLASS,
    VOID_LABEL,
    PanopticMap,
    TargetSet,
    encode,
)
from panopyr.typing import ClassTable


LOGGER = logging.getLogger(__name__)


def _resolve(cfg: Union[FuseConfig, dict, None]) -> FuseConfig:
    return cfg if isinstance(cfg, FuseConfig) else FuseConfig.from_dict(cfg)


def nms_centers(heatmap, cfg: Union[FuseConfig, dict, None] = None) -> List[DetectedCenter]:
    """Recover instance centers by non-maximal suppression of the center heatmap.

    A pixel survives if its value reaches the threshold, no pixel in its window is
    greater, and no equal-valued pixel earlier in row-major order shares its window.
    Survivors are ranked by descending score, then row-major position, and truncated
    to `max_centers` after thresholding.

    Args:
        heatmap: `(1, H, W)` center scores.
        cfg (optional): `FuseConfig` or config dict.

    Returns:
        list: `DetectedCenter` objects with 1-based ranks.
    """
    cfg = _resolve(cfg)
    heat = np.asarray(heatmap, dtype=np.float64)
    if heat.ndim != 3 or heat.shape[0] != 1:
        raise ValueError(f"Center heatmap must have shape (1, H, W), got {heat.shape}")
    heat = heat[0]
    h, w = heat.shape

    window_max = ndimage.maximum_filter(
        heat, size=cfg.nms_window, mode="constant", cval=-np.inf
    )
    keep = (heat >= cfg.nms_threshold) & (heat == window_max)

    r = cfg.nms_window // 2
    padded = np.pad(heat, r, constant_values=np.nan)
    for dr in range(-r, 1):
        for dc in range(-r, r + 1 if dr < 0 else 0):
            earlier = padded[r + dr : r + dr + h, r + dc : r + dc + w]
            keep &= earlier != heat

    rows, cols = np.nonzero(keep)
    scores = heat[rows, cols]
    order = np.lexsort((rows * w + cols, -scores))[: cfg.max_centers]
    centers = [
        DetectedCenter(int(rows[i]), int(cols[i]), float(scores[i]), rank)
        for rank, i in enumerate(order, start=1)
    ]
    if len(order) < len(rows):
        LOGGER.debug(f"Kept {len(order)} of {len(rows)} centers (max_centers)")
    return centers


def assign_instances(
    offsets,
    thing_mask,
    centers: Sequence[DetectedCenter],
    threads: int = 1,
) -> LabelGrid:
    """Group thing pixels around the closest center their offset points at.

    For thing pixel `p` the regressed center is `p + offset(p)`; the pixel takes the rank of
    the nearest detected center (Euclidean, ties to the lowest rank). Non-thing pixels and
    all pixels when no center exists get 0.

    Args:
        offsets: `(2, H, W)` row/col offsets.
        thing_mask: `(H, W)` pixels eligible for assignment.
        centers: Output of `nms_centers`.
        threads (optional): Worker threads; the result does not depend on it.

    Returns:
        LabelGrid: Center rank per pixel, 0 where unassigned.
    """
    off = np.asarray(offsets, dtype=np.float64)
    mask = np.asarray(thing_mask, dtype=bool)
    if off.ndim != 3 or off.shape[0] != 2 or off.shape[1:] != mask.shape:
        raise ValueError(f"Offsets {off.shape} do not match thing mask {mask.shape}")
    assigned = np.zeros(mask.shape, dtype=LABEL_DTYPE)
    if not centers or not mask.any():
        return LabelGrid(assigned)

    centers = sorted(centers, key=lambda c: c.index)
    center_rows = np.array([c.row for c in centers], dtype=np.float64)
    center_cols = np.array([c.col for c in centers], dtype=np.float64)
    ranks = np.array([c.index for c in centers], dtype=LABEL_DTYPE)
    rows, cols = np.nonzero(mask)
    target_rows = rows + off[0, rows, cols]
    target_cols = cols + off[1, rows, cols]

    chunk = max(1, ASSIGN_CHUNK // len(centers))

    def nearest(start: int) -> Tuple[int, np.ndarray]:
        dr = target_rows[start : start + chunk, None] - center_rows[None, :]
        dc = target_cols[start : start + chunk, None] - center_cols[None, :]
        return start, np.argmin(dr * dr + dc * dc, axis=1)

    starts = range(0, len(rows), chunk)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        for start, best in pool.map(nearest, starts):
            stop = start + len(best)
            assigned[rows[start:stop], cols[start:stop]] = ranks[best]
    return LabelGrid(assigned)


def vote_semantics(instance_map, sem_labels, thing_classes: Sequence[int]) -> Dict[int, int]:
    """Majority class of every instance, counting thing-class pixels only.

    Args:
        instance_map: `(H, W)` instance ranks, 0 for none.
        sem_labels: `(H, W)` semantic decision per pixel.
        thing_classes: Class ids that may name an instance.

    Returns:
        dict: `{rank: class id}`; ties go to the lowest class id and instances without
        thing votes get the void class 255.
    """
    inst = np.asarray(instance_map).astype(np.int64)
    sem = np.asarray(sem_labels).astype(np.int64)
    if inst.shape != sem.shape:
        raise ValueError(f"Instance map {inst.shape} and labels {sem.shape} differ in shape")
    things = np.array(sorted(set(int(c) for c in thing_classes)), dtype=np.int64)
    present = np.unique(inst[inst > 0])
    if len(present) == 0:
        return {}

    votes = np.zeros((int(present[-1]) + 1, max(len(things), 1)), dtype=np.int64)
    if len(things):
        voting = (inst > 0) & np.isin(sem, things)
        index = inst[voting] * len(things) + np.searchsorted(things, sem[voting])
        votes = np.bincount(index, minlength=votes.size).reshape(votes.shape)

    classes = {}
    for rank in present:
        if votes[rank].sum() == 0:
            LOGGER.warning(f"Instance {rank} received no thing-class votes; marked void")
            classes[int(rank)] = VOID_CLASS
        else:
            classes[int(rank)] = int(things[np.argmax(votes[rank])])
    return classes


def construct_panoptic(
    sem_labels,
    instance_map,
    instance_classes: Dict[int, int],
    class_table: ClassTable,
    stuff_area_limit: int = 0,
) -> Tuple[PanopticMap, Dict[int, int]]:
    """Assemble the panoptic map from semantic decisions, instances and their votes.

    Stuff pixels keep their class with instance 0. Thing pixels of instances with a voted
    class become `class * 1000 + rank`, with ranks re-compacted to `1..K` in their original
    order. Unassigned thing pixels, classes outside the table and stuff classes covering
    fewer than `stuff_area_limit` pixels become void.

    Args:
        sem_labels: `(H, W)` semantic decision.
        instance_map: `(H, W)` instance ranks from `assign_instances`.
        instance_classes: Output of `vote_semantics`.
        class_table: `{class_id: is_thing}`.
        stuff_area_limit (optional): Minimal stuff class area; 0 keeps every class.

    Returns:
        tuple: The `PanopticMap` and `{original rank: compact rank}` of surviving instances.
    """
    sem = np.asarray(sem_labels).astype(np.int64)
    inst = np.asarray(instance_map).astype(np.int64)
    stuff = [c for c, thing in class_table.items() if not thing]
    things = [c for c, thing in class_table.items() if thing]
    labels = np.full(sem.shape, VOID_LABEL, dtype=np.int64)

    stuff_pixels = np.isin(sem, stuff)
    if stuff_area_limit > 0 and stuff_pixels.any():
        areas = np.bincount(sem[stuff_pixels])
        small = np.nonzero((areas > 0) & (areas < stuff_area_limit))[0]
        if len(small):
            LOGGER.debug(f"Voiding stuff classes {small.tolist()} below {stuff_area_limit} px")
            stuff_pixels &= ~np.isin(sem, small)
    labels[stuff_pixels] = encode(sem[stuff_pixels], 0)

    assigned = np.isin(sem, things) & (inst > 0)
    present = set(np.unique(inst[assigned]).tolist())
    survivors = [
        r for r in sorted(instance_classes) if r in present and instance_classes[r] != VOID_CLASS
    ]
    if len(survivors) > MAX_INSTANCES:
        raise ValueError(f"{len(survivors)} instances exceed the limit of {MAX_INSTANCES}")
    remap = {old: new for new, old in enumerate(survivors, start=1)}

    lookup = np.zeros(max([0] + list(instance_classes) + list(present)) + 1, dtype=np.int64)
    for old, new in remap.items():
        lookup[old] = encode(instance_classes[old], new)
    encoded = lookup[np.where(assigned, inst, 0)]
    labels[encoded > 0] = encoded[encoded > 0]

    unassigned = int((np.isin(sem, things) & (encoded == 0)).sum())
    if unassigned:
        LOGGER.debug(f"{unassigned} thing pixels left unassigned (void)")
    return PanopticMap(labels, class_table), remap


def fuse_panoptic(
    preds,
    class_table: ClassTable,
    cfg: Union[FuseConfig, dict, None] = None,
    threads: int = 1,
) -> Tuple[PanopticMap, List[DetectedCenter]]:
    """Turn network predictions into a panoptic map.

    Args:
        preds: `PredictionSet` with semantic logits, center heatmap and offsets.
        class_table: `{class_id: is_thing}`.
        cfg (optional): `FuseConfig` or config dict.
        threads (optional): Threads used by instance assignment.

    Returns:
        tuple: The fused `PanopticMap` and the centers owning a segment, re-indexed to
        their compact rank.
    """
    cfg = _resolve(cfg)
    things = [c for c, thing in class_table.items() if thing]
    sem = argmax_channel(preds.sem_logits)
    if preds.void_mask is not None:
        sem = LabelGrid(np.where(preds.void_mask.data, VOID_CLASS, sem.data))
    thing_mask = BinaryMask(np.isin(sem.data, things))

    centers = nms_centers(preds.center_heatmap, cfg)
    if not centers and thing_mask.data.any():
        LOGGER.warning("No instance centers detected; thing pixels become void")
    instances = assign_instances(preds.offsets, thing_mask, centers, threads=threads)
    classes = vote_semantics(instances, sem, things)
    pan, remap = construct_panoptic(sem, instances, classes, class_table, cfg.stuff_area_limit)
    kept = [replace(c, index=remap[c.index]) for c in centers if c.index in remap]
    LOGGER.info(f"Fused {len(kept)} instances from {len(centers)} detected centers")
    return pan, kept


def oracle_substitute(preds, targets: TargetSet, flags: Union[OracleFlags, str, None] = None):
    """Swap selected predictions for their ground-truth counterparts.

    Semantic logits become one-hot scores with margin 10 and ignored pixels are carried
    as the void mask, so fusion labels them void. The center heatmap and offsets are
    replaced by the targets. Unflagged tensors are passed through as the very same objects.

    Args:
        preds: `PredictionSet` to patch.
        targets: `TargetSet` of the same image.
        flags (optional): `OracleFlags` or a `"sem,cen,off"` string.

    Returns:
        PredictionSet: `preds` itself when no flag is set, a patched copy otherwise.
    """
    if not isinstance(flags, OracleFlags):
        flags = OracleFlags.from_names(flags)
    if not flags.any():
        return preds
    if targets.shape != preds.shape:
        raise ValueError(f"Targets {targets.shape} do not match predictions {preds.shape}")

    changes = {}
    if flags.semantic:
        labels = targets.semantic.data.astype(np.int64)
        num_classes = preds.num_classes
        valid = labels != IGNORE_LABEL
        if (labels[valid] >= num_classes).any():
            raise ValueError(f"Target classes exceed the {num_classes} predicted channels")
        logits = np.zeros((num_classes,) + preds.shape)
        rows, cols = np.nonzero(valid)
        logits[labels[rows, cols], rows, cols] = ORACLE_MARGIN
        changes["sem_logits"] = Tensor3(logits)
        changes["void_mask"] = BinaryMask(~valid)
    if flags.centers:
        changes["center_heatmap"] = targets.center_heatmap
    if flags.offsets:
        changes["offsets"] = targets.offsets
    return preds.replace(**changes)
