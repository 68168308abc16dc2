import logging
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from panopyr.pixelgrid import (
    ACCUMULATOR_DTYPE,
    Tensor3,
    bilinear_resize,
    conv2d,
    max_pool2d,
)
from panopyr.pyramidnet import (
    BACKBONE_STRIDE,
    BLOCKS_PER_STAGE,
    HEAD_UPSAMPLE,
    STAGE_STRIDES,
    NetConfig,
    PredictionSet,
)
from panopyr.pyramidnet.params import NetParams, skip_prefix


LOGGER = logging.getLogger(__name__)


def _preactivate(x: Tensor3, params: NetParams, prefix: str) -> Tensor3:
    """Inference-mode normalization followed by ReLU."""
    scale = params[f"{prefix}.bn.scale"].astype(ACCUMULATOR_DTYPE)[:, None, None]
    shift = params[f"{prefix}.bn.shift"].astype(ACCUMULATOR_DTYPE)[:, None, None]
    return Tensor3(np.maximum(x.data.astype(ACCUMULATOR_DTYPE) * scale + shift, 0.0))


def _conv(x: Tensor3, params: NetParams, prefix: str, stride: int = 1) -> Tensor3:
    weight = params[f"{prefix}.conv.weight"]
    return conv2d(
        x, weight, params[f"{prefix}.conv.bias"], stride=stride, zero_padding=weight.shape[-1] // 2
    )


def _unit(x: Tensor3, params: NetParams, prefix: str, stride: int = 1) -> Tensor3:
    """BN-ReLU-Conv unit."""
    return _conv(_preactivate(x, params, prefix), params, prefix, stride)


def _add(*tensors: Tensor3) -> Tensor3:
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise ValueError(f"Cannot fuse features of shapes {sorted(shapes)}")
    total = tensors[0].data.astype(ACCUMULATOR_DTYPE)
    for t in tensors[1:]:
        total = total + t.data
    return Tensor3(total)


def _residual_block(x: Tensor3, params: NetParams, prefix: str, stride: int) -> Tensor3:
    """Pre-activation residual block; the projection shortcut reads the first pre-activation."""
    pre = _preactivate(x, params, f"{prefix}.conv1")
    out = _conv(pre, params, f"{prefix}.conv1", stride)
    out = _unit(out, params, f"{prefix}.conv2")
    if f"{prefix}.shortcut.weight" in params:
        shortcut = conv2d(
            pre,
            params[f"{prefix}.shortcut.weight"],
            params[f"{prefix}.shortcut.bias"],
            stride=stride,
        )
    else:
        shortcut = x
    return _add(out, shortcut)


def _resolve_config(params: NetParams, cfg: Optional[NetConfig]) -> NetConfig:
    """Forward config: the params' own, or one that uses at most their pyramid levels."""
    if cfg is None:
        return params.config
    built = params.config
    comparable = replace(cfg, seed=built.seed, pyramid_levels=built.pyramid_levels)
    if comparable != built or cfg.pyramid_levels > built.pyramid_levels:
        raise ValueError(f"Config {cfg} cannot run parameters built for {built}")
    return cfg


def upsample_strides(cfg: NetConfig) -> List[int]:
    """Overall strides visited by the upsampling path, coarsest first.

    Example:
        >>> upsample_strides(NetConfig(pyramid_levels=3))
        [128, 64, 32, 16, 8]
    """
    return list(cfg.path_strides)


def build_pyramid(image: Tensor3, levels: int) -> List[Tensor3]:
    """Image pyramid: level 0 is the input, level `k` is resized by `2**-k`.

    Args:
        image: Input image.
        levels: Number of levels `L`.

    Returns:
        list: `L` tensors, finest first.

    Raises:
        ValueError: If the size is not divisible by `32 * 2**(L - 1)`.
    """
    if levels < 1:
        raise ValueError(f"levels must be positive, got {levels}")
    stride = BACKBONE_STRIDE * 2 ** (levels - 1)
    if image.height % stride or image.width % stride:
        raise ValueError(
            f"Image {image.height}x{image.width} is not divisible by {stride} for {levels} levels"
        )
    pyramid = [image]
    for k in range(1, levels):
        pyramid.append(bilinear_resize(image, image.height >> k, image.width >> k))
    return pyramid


def backbone_forward(image: Tensor3, params: NetParams) -> List[Tensor3]:
    """Shared backbone: stem to /4, then four stages of residual blocks.

    Args:
        image: Input with height and width divisible by 32.
        params: Network parameters.

    Returns:
        list: Features at strides 4, 8, 16 and 32 of the input.

    Raises:
        ValueError: On a size not divisible by 32.
    """
    if image.height % BACKBONE_STRIDE or image.width % BACKBONE_STRIDE:
        raise ValueError(
            f"Backbone input {image.height}x{image.width} is not divisible by {BACKBONE_STRIDE}"
        )
    x = _unit(image, params, "backbone.stem", stride=2)
    x = max_pool2d(x, kernel=3, stride=2, padding=1)
    features = []
    for stage in range(1, len(STAGE_STRIDES) + 1):
        for block in range(1, BLOCKS_PER_STAGE + 1):
            stride = 2 if stage > 1 and block == 1 else 1
            x = _residual_block(x, params, f"backbone.stage{stage}.block{block}", stride)
        features.append(x)
    return features


def upsample_module(
    current: Optional[Tensor3],
    skips: Sequence[Tensor3],
    params: NetParams,
    stride: int,
    output_skips: Sequence[Tensor3] = (),
) -> Tensor3:
    """One upsampling stage: add matching skips, BN-ReLU-Conv 3x3, bilinear 2x.

    Args:
        current: Output of the previous stage, None for the first one.
        skips: Projected skip features whose overall stride equals `stride`.
        params: Network parameters.
        stride: Overall stride consumed by this stage.
        output_skips (optional): Projected skips at `stride / 2`, added to the upsampled
            output. The last stage takes the stride-4 skips of the finest level.

    Returns:
        Tensor3: Features at `stride / 2`.
    """
    inputs = ([current] if current is not None else []) + list(skips)
    if not inputs:
        raise ValueError(f"Upsample stage at stride {stride} received no features")
    x = _unit(_add(*inputs), params, f"upsample.s{stride}")
    LOGGER.debug(f"Upsample stage /{stride}: {len(inputs)} inputs, {x.shape}")
    x = bilinear_resize(x, 2 * x.height, 2 * x.width)
    return _add(x, *output_skips) if output_skips else x


def pyramid_fuse_forward(
    image: Tensor3, params: NetParams, cfg: Optional[NetConfig] = None
) -> Tensor3:
    """Run the backbone on every pyramid level and fuse along one upsampling path.

    The path starts from the deepest feature of the coarsest level. Each of its
    `2 + L` stages sums every projected skip with a matching overall stride. The
    last stage adds the stride-4 skip of the finest level to its upsampled output.

    Args:
        image: Input image.
        params: Network parameters.
        cfg (optional): Forward configuration; `params.config` when omitted. May use fewer
            pyramid levels than the parameters were built for.

    Returns:
        Tensor3: `D` channels at stride 4.
    """
    cfg = _resolve_config(params, cfg)
    cfg.check_input(image.height, image.width)

    skips: Dict[int, List[Tensor3]] = {}
    for level, level_image in enumerate(build_pyramid(image, cfg.pyramid_levels)):
        features = backbone_forward(level_image, params)
        for stage_stride, feature in zip(STAGE_STRIDES, features):
            projected = _unit(feature, params, skip_prefix(params.config, level, stage_stride))
            skips.setdefault(stage_stride * 2 ** level, []).append(projected)

    current = None
    last = cfg.path_strides[-1]
    for stride in cfg.path_strides:
        tail = skips[STAGE_STRIDES[0]] if stride == last else ()
        current = upsample_module(current, skips.get(stride, []), params, stride, tail)
    return current


def heads_forward(
    features: Tensor3, params: NetParams, cfg: Optional[NetConfig] = None
) -> PredictionSet:
    """Semantic, center and offset heads: 1x1 BN-ReLU-Conv then 4x bilinear upsampling."""
    _resolve_config(params, cfg)
    out_h, out_w = features.height * HEAD_UPSAMPLE, features.width * HEAD_UPSAMPLE
    outputs = {
        head: bilinear_resize(_unit(features, params, f"head.{head}"), out_h, out_w)
        for head in ("semantic", "center", "offset")
    }
    return PredictionSet(
        sem_logits=outputs["semantic"],
        center_heatmap=outputs["center"],
        offsets=outputs["offset"],
    )


def model_forward(
    image: Tensor3, params: NetParams, cfg: Optional[NetConfig] = None
) -> PredictionSet:
    """Full forward pass from an image to the three dense predictions.

    Args:
        image: `(3, H, W)` image with `H` and `W` divisible by `32 * 2**(L - 1)`.
        params: Network parameters.
        cfg (optional): Forward configuration.

    Returns:
        PredictionSet: Predictions at input resolution.
    """
    features = pyramid_fuse_forward(image, params, cfg)
    preds = heads_forward(features, params, cfg)
    LOGGER.debug(f"Forward pass {image.shape} -> {preds.sem_logits.shape}")
    return preds
