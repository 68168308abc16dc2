import logging
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple, Union

from panopyr.losses import CompoundLoss, LossConfig, compound_loss
from panopyr.panofuse import DetectedCenter, FuseConfig, OracleFlags
from panopyr.panofuse.fusion import fuse_panoptic, oracle_substitute
from panopyr.panometrics import (
    ApReport,
    PqReport,
    SemanticReport,
    average_precision,
    ground_truth_from_panoptic,
    instances_from_panoptic,
    miou,
    panoptic_quality,
)
from panopyr.pixelgrid import Tensor3
from panopyr.pyramidnet import NetConfig, NetParams, PredictionSet, init_params, model_forward
from panopyr.targetgen import IGNORE_LABEL, PanopticMap, TargetConfig, TargetSet, make_targets
from panopyr.workbench import BenchReport, SceneSpec
from panopyr.workbench.bench import bench_pipeline
from panopyr.workbench.scenes import synth_scene


LOGGER = logging.getLogger(__name__)


class Panopyr:
    """End-to-end panoptic segmentation workbench.

    Holds one configuration per stage and runs target crafting, the forward pass, the
    training objective, post-processing and evaluation with it.

    Args:
        target_config (optional): Target settings (`sigma`, `region_count`, ...).
        loss_config (optional): Loss weights and mining settings.
        net_config (optional): Network shape and seed.
        fuse_config (optional): Post-processing settings.

    Attributes:
        target_config (TargetConfig): Parsed target settings.
        loss_config (LossConfig): Parsed loss settings.
        net_config (NetConfig): Parsed network settings.
        fuse_config (FuseConfig): Parsed post-processing settings.

    Example:
        >>> pp = Panopyr(net_config={"base_channels": 8, "upsample_channels": 32})
        >>> image, gt = pp.synth(seed=3)
        >>> preds = pp.forward(image)
    """

    def __init__(
        self,
        target_config: dict = None,
        loss_config: dict = None,
        net_config: dict = None,
        fuse_config: dict = None,
    ):
        self.target_config = TargetConfig.from_dict(target_config)
        self.loss_config = LossConfig.from_dict(loss_config)
        self.net_config = NetConfig.from_dict(net_config)
        self._bench_net_config = net_config
        self.fuse_config = FuseConfig.from_dict(fuse_config)
        self._params: Optional[NetParams] = None

    @property
    def params(self) -> NetParams:
        """Network parameters, initialized from `net_config` on first use."""
        if self._params is None:
            self._params = init_params(self.net_config)
        return self._params

    @params.setter
    def params(self, params: NetParams):
        self._params = params

    def targets(self, pan: PanopticMap) -> TargetSet:
        return make_targets(pan, self.target_config)

    def forward(self, image: Tensor3, params: NetParams = None, levels: int = None) -> PredictionSet:
        """Forward pass, optionally with fewer pyramid levels than the parameters hold."""
        params = params or self.params
        cfg = replace(params.config, pyramid_levels=levels) if levels else None
        return model_forward(image, params, cfg)

    def loss(self, preds: PredictionSet, targets: TargetSet, offset_loss: str = "bal") -> CompoundLoss:
        return compound_loss(preds, targets, self.loss_config, offset_loss=offset_loss)

    def fuse(
        self,
        preds: PredictionSet,
        class_table: dict,
        oracle: Union[OracleFlags, str, None] = None,
        targets: TargetSet = None,
        threads: int = 1,
    ) -> Tuple[PanopticMap, List[DetectedCenter]]:
        """Post-process predictions, optionally swapping some for ground truth first.

        Raises:
            ValueError: If oracle flags are set without targets.
        """
        flags = oracle if isinstance(oracle, OracleFlags) else OracleFlags.from_names(oracle)
        if flags.any():
            if targets is None:
                raise ValueError("Oracle substitution needs targets")
            preds = oracle_substitute(preds, targets, flags)
        return fuse_panoptic(preds, class_table, self.fuse_config, threads=threads)

    def evaluate_pq(self, pred: PanopticMap, gt: PanopticMap) -> PqReport:
        return panoptic_quality(pred, gt)

    def evaluate_miou(self, pred: PanopticMap, gt: PanopticMap, num_classes: int = None) -> SemanticReport:
        """mIoU of the semantic parts of two panoptic maps; void is ignored."""
        num_classes = num_classes or max(gt.class_table) + 1
        return miou(pred.semantic(), gt.semantic(), num_classes, IGNORE_LABEL)

    def evaluate_ap(
        self,
        preds: Sequence[PanopticMap],
        gts: Sequence[PanopticMap],
        centers: Sequence[Sequence[DetectedCenter]] = None,
    ) -> ApReport:
        """Mask AP of fused maps, scored by their centers when given."""
        centers = centers or [None] * len(preds)
        detections = [instances_from_panoptic(p, c) for p, c in zip(preds, centers)]
        return average_precision(detections, [ground_truth_from_panoptic(g) for g in gts])

    def synth(self, seed: int = 0, height: int = 128, width: int = 128, **spec) -> Tuple[Tensor3, PanopticMap]:
        return synth_scene(SceneSpec.from_dict(dict(spec, seed=seed, height=height, width=width)))

    def bench(self, spec: SceneSpec = None, threads: int = 1, reps: int = 5) -> BenchReport:
        return bench_pipeline(spec, self._bench_net_config, threads=threads, reps=reps, fuse_cfg=self.fuse_config)
