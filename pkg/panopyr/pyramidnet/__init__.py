"""Forward-only pyramidal-fusion network: shared backbone, one upsampling path, three heads."""
from dataclasses import dataclass, replace
from typing import Optional, Tuple

from panopyr.pixelgrid import BinaryMask, Tensor3
from panopyr.utils import filter_kwargs


BACKBONE_STRIDE = 32
STAGE_STRIDES = (4, 8, 16, 32)
BLOCKS_PER_STAGE = 2
STEM_KERNEL = 7
HEAD_UPSAMPLE = 4
HEAD_CHANNELS = {"semantic": None, "center": 1, "offset": 2}
SUPPORTED_LEVELS = (1, 2, 3)

NET_CONFIG_KWARGS = [
    "pyramid_levels",
    "base_channels",
    "upsample_channels",
    "num_classes",
    "seed",
    "image_channels",
    "share_skip_projections",
]


@dataclass(frozen=True)
class NetConfig:
    """Network shape and initialization seed.

    Attributes:
        pyramid_levels: Number of image resolutions `L` fed to the shared backbone.
        base_channels: Backbone width `c`; stages use `c, 2c, 4c, 8c`.
        upsample_channels: Width `D` of the skip projections and the upsampling path.
        num_classes: Semantic classes `C`.
        seed: Seed of the parameter initializer.
        image_channels: Input image channels.
        share_skip_projections: One 1x1 projection per backbone stage for all levels
            when True, one per (level, stage) otherwise.
    """

    pyramid_levels: int = 3
    base_channels: int = 64
    upsample_channels: int = 256
    num_classes: int = 19
    seed: int = 0
    image_channels: int = 3
    share_skip_projections: bool = True

    def __post_init__(self):
        if self.pyramid_levels not in SUPPORTED_LEVELS:
            raise ValueError(
                f"pyramid_levels must be one of {SUPPORTED_LEVELS}, got {self.pyramid_levels}"
            )
        for name in ("base_channels", "upsample_channels", "num_classes", "image_channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 <= self.seed < 2 ** 32:
            raise ValueError(f"seed must fit in 32 unsigned bits, got {self.seed}")

    @classmethod
    def from_dict(cls, config: Optional[dict] = None) -> "NetConfig":
        return cls(**filter_kwargs(config or {}, NET_CONFIG_KWARGS))

    @property
    def input_stride(self) -> int:
        """Divisor required of the input height and width: `32 * 2**(L - 1)`."""
        return BACKBONE_STRIDE * 2 ** (self.pyramid_levels - 1)

    @property
    def path_strides(self) -> Tuple[int, ...]:
        """Overall strides consumed by the upsample modules, coarsest first."""
        return tuple(self.input_stride // 2 ** i for i in range(self.pyramid_levels + 2))

    @property
    def stage_channels(self) -> Tuple[int, ...]:
        return tuple(self.base_channels * 2 ** i for i in range(len(STAGE_STRIDES)))

    def check_input(self, height: int, width: int):
        """Raise `ValueError` unless `height` and `width` are multiples of `input_stride`."""
        if height % self.input_stride or width % self.input_stride:
            raise ValueError(
                f"Input {height}x{width} is not divisible by {self.input_stride} "
                f"for {self.pyramid_levels} pyramid levels"
            )


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """The three dense network outputs at input resolution.

    Attributes:
        sem_logits: `(C, H, W)` class scores.
        center_heatmap: `(1, H, W)` instance-center scores.
        offsets: `(2, H, W)` row/col displacement to the instance center in pixels.
        void_mask: Pixels known to be void. Fusion labels them void and keeps them out
            of instance grouping and voting. `None` for network outputs.
    """

    sem_logits: Tensor3
    center_heatmap: Tensor3
    offsets: Tensor3
    void_mask: Optional[BinaryMask] = None

    def __post_init__(self):
        for name in ("sem_logits", "center_heatmap", "offsets"):
            value = getattr(self, name)
            if not isinstance(value, Tensor3):
                object.__setattr__(self, name, Tensor3(value))
        shape = (self.sem_logits.height, self.sem_logits.width)
        if self.center_heatmap.shape != (1,) + shape:
            raise ValueError(f"center_heatmap has shape {self.center_heatmap.shape}, expected (1, {shape[0]}, {shape[1]})")
        if self.offsets.shape != (2,) + shape:
            raise ValueError(f"offsets has shape {self.offsets.shape}, expected (2, {shape[0]}, {shape[1]})")
        if self.void_mask is not None:
            if not isinstance(self.void_mask, BinaryMask):
                object.__setattr__(self, "void_mask", BinaryMask(self.void_mask))
            if self.void_mask.shape != shape:
                raise ValueError(f"void_mask has shape {self.void_mask.shape}, expected {shape}")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.sem_logits.height, self.sem_logits.width

    @property
    def num_classes(self) -> int:
        return self.sem_logits.channels

    def replace(self, **changes) -> "PredictionSet":
        return replace(self, **changes)


from panopyr.pyramidnet.params import NetParams, init_params, param_shapes
from panopyr.pyramidnet.network import (
    backbone_forward,
    build_pyramid,
    heads_forward,
    model_forward,
    pyramid_fuse_forward,
    upsample_module,
    upsample_strides,
)
