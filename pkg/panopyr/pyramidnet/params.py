import logging
from collections import OrderedDict
from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np

from panopyr.pixelgrid import FLOAT_DTYPE
from panopyr.pyramidnet import (
    BLOCKS_PER_STAGE,
    HEAD_CHANNELS,
    NET_CONFIG_KWARGS,
    STAGE_STRIDES,
    STEM_KERNEL,
    NetConfig,
)


LOGGER = logging.getLogger(__name__)

META_CONFIG = "meta.config"
PRNG_NAME = "PCG64"


def _unit_shapes(prefix: str, in_ch: int, out_ch: int, kernel: int) -> Dict[str, Tuple[int, ...]]:
    """Buffers of one BN-ReLU-Conv unit."""
    return OrderedDict(
        [
            (f"{prefix}.bn.scale", (in_ch,)),
            (f"{prefix}.bn.shift", (in_ch,)),
            (f"{prefix}.conv.weight", (out_ch, in_ch, kernel, kernel)),
            (f"{prefix}.conv.bias", (out_ch,)),
        ]
    )


def skip_prefix(cfg: NetConfig, level: int, stage_stride: int) -> str:
    if cfg.share_skip_projections:
        return f"skip.s{stage_stride}"
    return f"skip.level{level}.s{stage_stride}"


def param_shapes(cfg: NetConfig) -> Dict[str, Tuple[int, ...]]:
    """Name and shape of every parameter buffer, in initialization order.

    Args:
        cfg: Network configuration.

    Returns:
        OrderedDict: `{buffer name: shape}`.
    """
    shapes = OrderedDict()
    shapes.update(_unit_shapes("backbone.stem", cfg.image_channels, cfg.base_channels, STEM_KERNEL))

    in_ch = cfg.base_channels
    for stage, width in enumerate(cfg.stage_channels, start=1):
        for block in range(1, BLOCKS_PER_STAGE + 1):
            prefix = f"backbone.stage{stage}.block{block}"
            shapes.update(_unit_shapes(f"{prefix}.conv1", in_ch, width, 3))
            shapes.update(_unit_shapes(f"{prefix}.conv2", width, width, 3))
            if block == 1 and (stage > 1 or in_ch != width):
                shapes[f"{prefix}.shortcut.weight"] = (width, in_ch, 1, 1)
                shapes[f"{prefix}.shortcut.bias"] = (width,)
            in_ch = width

    levels = [0] if cfg.share_skip_projections else range(cfg.pyramid_levels)
    for level in levels:
        for stage_stride, width in zip(STAGE_STRIDES, cfg.stage_channels):
            shapes.update(
                _unit_shapes(skip_prefix(cfg, level, stage_stride), width, cfg.upsample_channels, 1)
            )

    for stride in cfg.path_strides:
        shapes.update(
            _unit_shapes(f"upsample.s{stride}", cfg.upsample_channels, cfg.upsample_channels, 3)
        )

    for head, channels in HEAD_CHANNELS.items():
        channels = channels or cfg.num_classes
        shapes.update(_unit_shapes(f"head.{head}", cfg.upsample_channels, channels, 1))
    return shapes


class NetParams:
    """Named parameter buffers of one network.

    Buffers are read-only 32-bit arrays keyed by dotted names such as
    `backbone.stage2.block1.conv1.conv.weight`, `skip.s8.bn.scale`, `upsample.s32.conv.bias`
    or `head.offset.conv.weight`.

    Args:
        config: Configuration the buffers were built for.
        buffers: `{name: array}` holding exactly the names of `param_shapes(config)`.

    Raises:
        ValueError: On missing, unexpected or mis-shaped buffers.
    """

    __slots__ = ("config", "_buffers")

    def __init__(self, config: NetConfig, buffers: Mapping[str, np.ndarray]):
        expected = param_shapes(config)
        missing = [name for name in expected if name not in buffers]
        unexpected = [name for name in buffers if name not in expected]
        if missing or unexpected:
            raise ValueError(
                f"Parameter names do not match the config: missing {missing[:5]}, "
                f"unexpected {unexpected[:5]}"
            )
        self.config = config
        self._buffers = OrderedDict()
        for name, shape in expected.items():
            array = np.array(buffers[name], dtype=FLOAT_DTYPE)
            if array.shape != shape:
                raise ValueError(f"Parameter {name} has shape {array.shape}, expected {shape}")
            if not np.isfinite(array).all():
                raise ValueError(f"Parameter {name} holds NaN/Inf")
            array.flags.writeable = False
            self._buffers[name] = array

    def __getitem__(self, name: str) -> np.ndarray:
        return self._buffers[name]

    def __contains__(self, name: str) -> bool:
        return name in self._buffers

    def __iter__(self) -> Iterator[str]:
        return iter(self._buffers)

    def __len__(self) -> int:
        return len(self._buffers)

    @property
    def names(self) -> List[str]:
        return list(self._buffers)

    def group(self, prefix: str) -> List[str]:
        """Buffer names under a dotted prefix, e.g. `"backbone"` or `"upsample.s8"`."""
        return [n for n in self._buffers if n == prefix or n.startswith(prefix + ".")]

    def count(self, prefix: str = "") -> int:
        """Number of scalars, optionally restricted to a prefix."""
        names = self.group(prefix) if prefix else self._buffers
        return int(sum(self._buffers[n].size for n in names))

    def with_buffer(self, name: str, value: np.ndarray) -> "NetParams":
        """Copy with one buffer replaced."""
        if name not in self._buffers:
            raise ValueError(f"Unknown parameter {name}")
        buffers = OrderedDict(self._buffers)
        buffers[name] = value
        return NetParams(self.config, buffers)

    def to_tensors(self) -> Dict[str, np.ndarray]:
        """Named arrays for the tensor container, config stored under `meta.config`."""
        tensors = OrderedDict()
        tensors[META_CONFIG] = np.array(
            [int(getattr(self.config, k)) for k in NET_CONFIG_KWARGS], dtype=np.uint32
        )
        tensors.update(self._buffers)
        return tensors

    @classmethod
    def from_tensors(cls, tensors: Mapping[str, np.ndarray]) -> "NetParams":
        """Inverse of `to_tensors`.

        Raises:
            ValueError: If `meta.config` is absent or malformed.
        """
        if META_CONFIG not in tensors:
            raise ValueError(f"Parameter tensors lack {META_CONFIG}")
        meta = np.asarray(tensors[META_CONFIG]).reshape(-1)
        if meta.size != len(NET_CONFIG_KWARGS):
            raise ValueError(
                f"{META_CONFIG} holds {meta.size} values, expected {len(NET_CONFIG_KWARGS)}"
            )
        config = dict(zip(NET_CONFIG_KWARGS, (int(v) for v in meta)))
        config["share_skip_projections"] = bool(config["share_skip_projections"])
        buffers = {k: v for k, v in tensors.items() if k != META_CONFIG}
        return cls(NetConfig(**config), buffers)

    def __repr__(self):
        return f"NetParams(buffers={len(self)}, scalars={self.count()}, config={self.config})"


def init_params(cfg: NetConfig) -> NetParams:
    """Seeded He-style initialization.

    Convolution weights are drawn from `N(0, 2 / fan_in)` by a PCG64 generator seeded with
    `cfg.seed`, in `param_shapes` order. Normalization scales start at 1; shifts and biases
    at 0.

    Args:
        cfg: Network configuration.

    Returns:
        NetParams: Fresh parameters.
    """
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    buffers = OrderedDict()
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".weight"):
            fan_in = int(np.prod(shape[1:]))
            buffers[name] = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        elif name.endswith(".bn.scale"):
            buffers[name] = np.ones(shape)
        else:
            buffers[name] = np.zeros(shape)
    params = NetParams(cfg, buffers)
    LOGGER.info(f"Initialized {len(params)} parameter buffers ({params.count()} scalars)")
    return params
