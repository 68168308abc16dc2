import hashlib
import logging
import os
import time
import warnings
from typing import Union

import numpy as np
import pandas as pd

from panopyr.pandas.utils import summarize_timings
from panopyr.panofuse import FuseConfig
from panopyr.panofuse.fusion import (
    assign_instances,
    construct_panoptic,
    fuse_panoptic,
    nms_centers,
    vote_semantics,
)
from panopyr.pixelgrid import BinaryMask, argmax_channel
from panopyr.pyramidnet import NetConfig, init_params, model_forward
from panopyr.workbench import BENCH_STAGES, MIN_REPS, BenchReport, SceneSpec
from panopyr.workbench.scenes import synth_scene


LOGGER = logging.getLogger(__name__)

BENCH_NET_DEFAULTS = {"pyramid_levels": 3, "base_channels": 8, "upsample_channels": 32}


def labels_digest(labels: np.ndarray) -> str:
    """SHA-256 hex digest of a label array's shape and little-endian bytes."""
    digest = hashlib.sha256(str(labels.shape).encode("ascii"))
    digest.update(np.ascontiguousarray(labels, dtype="<u4").tobytes())
    return digest.hexdigest()


def bench_pipeline(
    spec: SceneSpec = None,
    cfg: Union[NetConfig, dict, None] = None,
    threads: int = 1,
    reps: int = MIN_REPS,
    fuse_cfg: Union[FuseConfig, dict, None] = None,
) -> BenchReport:
    """Time forward pass and post-processing stages on a synthetic scene.

    Every repetition runs the forward pass, center NMS, instance assignment, semantic
    voting and panoptic construction, timing each with a monotonic clock. When more than
    one thread is used, the fused map is checked against a single-threaded reference.

    Args:
        spec (optional): Scene recipe; its size sets the image size.
        cfg (optional): `NetConfig` or dict; a small network sized for the scene's classes
            when omitted.
        threads (optional): Threads for instance assignment.
        reps (optional): Repetitions, at least 5.
        fuse_cfg (optional): Post-processing settings.

    Returns:
        BenchReport: Per-stage timings and the digest of the fused map.

    Raises:
        ValueError: If `reps < 5` or `threads < 1`.
        RuntimeError: If outputs differ across repetitions or from the single-threaded
            reference.
    """
    if reps < MIN_REPS:
        raise ValueError(f"reps must be at least {MIN_REPS}, got {reps}")
    if threads < 1:
        raise ValueError(f"threads must be positive, got {threads}")
    if threads > (os.cpu_count() or 1):
        warnings.warn(f"{threads} threads requested on a host with {os.cpu_count()} CPUs")
    spec = spec or SceneSpec()
    if not isinstance(cfg, NetConfig):
        config = dict(BENCH_NET_DEFAULTS, num_classes=max(spec.class_table) + 1)
        config.update(cfg or {})
        cfg = NetConfig.from_dict(config)
    fuse_cfg = fuse_cfg if isinstance(fuse_cfg, FuseConfig) else FuseConfig.from_dict(fuse_cfg)

    image, gt = synth_scene(spec)
    params = init_params(cfg)
    things = [c for c, thing in gt.class_table.items() if thing]

    records = []
    digests = set()
    for rep in range(reps):
        clock = time.perf_counter()

        def lap(stage: str):
            nonlocal clock
            now = time.perf_counter()
            records.append({"stage": stage, "rep": rep, "seconds": now - clock})
            clock = now

        preds = model_forward(image, params, cfg)
        lap("forward")
        centers = nms_centers(preds.center_heatmap, fuse_cfg)
        lap("nms")
        sem = argmax_channel(preds.sem_logits)
        instances = assign_instances(
            preds.offsets, BinaryMask(np.isin(sem.data, things)), centers, threads=threads
        )
        lap("assign")
        classes = vote_semantics(instances, sem, things)
        lap("vote")
        pan, _ = construct_panoptic(
            sem, instances, classes, gt.class_table, fuse_cfg.stuff_area_limit
        )
        lap("construct")
        digests.add(labels_digest(pan.labels.data))

    if len(digests) != 1:
        raise RuntimeError(f"Fused maps differ across {reps} repetitions")
    digest = digests.pop()
    if threads > 1:
        reference, _ = fuse_panoptic(preds, gt.class_table, fuse_cfg, threads=1)
        if labels_digest(reference.labels.data) != digest:
            raise RuntimeError(
                f"Fused map with {threads} threads differs from the single-threaded reference"
            )

    timings = summarize_timings(pd.DataFrame(records)).reindex(BENCH_STAGES)
    report = BenchReport(
        timings=timings,
        height=spec.height,
        width=spec.width,
        threads=threads,
        reps=reps,
        digest=digest,
    )
    for stage, row in timings.iterrows():
        LOGGER.info(f"{stage}: {row['mean'] * 1e3:.2f} ms (std {row['std'] * 1e3:.2f} ms)")
    return report
