"""Compound training objective: semantic, center and boundary-aware offset terms."""
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from panopyr.utils import filter_kwargs


LAMBDA_SEM = 1.0
LAMBDA_CEN = 200.0
LAMBDA_BAOL = 0.0025
PLAIN_L1_LAMBDA = 0.01
MINING_FRACTION = 0.2

OFFSET_LOSSES = ["bal", "l1"]

LOSS_CONFIG_KWARGS = [
    "lambda_sem",
    "lambda_cen",
    "lambda_baol",
    "plain_l1_lambda",
    "hard_pixel_fraction",
    "hard_pixel_mining",
]


@dataclass(frozen=True)
class LossConfig:
    """Loss weights and the hard-pixel-mining fraction.

    `hard_pixel_fraction` left as `None` resolves from `hard_pixel_mining`: 0.2 when
    mining is on, 1.0 (plain mean) otherwise.

    Example:
        >>> LossConfig.from_dict({"lambda_cen": 100, "bucket": "ignored"}).lambda_cen
        100.0
    """

    lambda_sem: float = LAMBDA_SEM
    lambda_cen: float = LAMBDA_CEN
    lambda_baol: float = LAMBDA_BAOL
    plain_l1_lambda: float = PLAIN_L1_LAMBDA
    hard_pixel_mining: bool = True
    hard_pixel_fraction: Optional[float] = None

    def __post_init__(self):
        for name in ("lambda_sem", "lambda_cen", "lambda_baol", "plain_l1_lambda"):
            value = float(getattr(self, name))
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")
            object.__setattr__(self, name, value)
        if self.hard_pixel_fraction is None:
            fraction = MINING_FRACTION if self.hard_pixel_mining else 1.0
            object.__setattr__(self, "hard_pixel_fraction", fraction)
        fraction = float(self.hard_pixel_fraction)
        if not 0.0 < fraction <= 1.0:
            raise ValueError(f"hard_pixel_fraction must lie in (0, 1], got {fraction}")
        object.__setattr__(self, "hard_pixel_fraction", fraction)

    @classmethod
    def from_dict(cls, config: Optional[dict] = None) -> "LossConfig":
        return cls(**filter_kwargs(config or {}, LOSS_CONFIG_KWARGS))


@dataclass(frozen=True, eq=False)
class LossValue:
    """A loss scalar and its gradient with respect to the scored prediction.

    Attributes:
        scalar: Loss value.
        gradient: 64-bit array shaped like the prediction input.
    """

    scalar: float
    gradient: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.scalar) or not np.isfinite(self.gradient).all():
            raise ValueError("Loss value and gradient must be finite")


@dataclass(frozen=True, eq=False)
class CompoundLoss:
    """Weighted total of the three loss terms.

    Attributes:
        total: `sum(lambdas[k] * components[k])`.
        components: Unweighted `semantic`, `center` and `offset` scalars.
        lambdas: Weight applied to each component.
        gradients: Gradient of `total` per prediction tensor (`sem_logits`,
            `center_heatmap`, `offsets`).
        offset_loss: `"bal"` or `"l1"`.
    """

    total: float
    components: Dict[str, float]
    lambdas: Dict[str, float]
    gradients: Dict[str, np.ndarray] = field(repr=False)
    offset_loss: str = "bal"

    def breakdown(self) -> Dict[str, float]:
        """Flat view with every component, its weight and the total."""
        flat = {"total": self.total}
        for name, value in self.components.items():
            flat[name] = value
            flat[f"lambda_{name}"] = self.lambdas[name]
        return flat


from panopyr.losses.objective import (
    center_loss,
    compound_loss,
    offset_loss_bal,
    offset_loss_l1,
    semantic_loss,
)
