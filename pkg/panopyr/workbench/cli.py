"""`panopyr` command line.

Every subcommand reads and writes tensor files (`.pswt`) or PPM images. Exit codes: 0 on
success, 2 on unreadable or malformed input files, 3 on contract violations.
"""
import argparse
import logging
import sys
from dataclasses import replace
from typing import List, Optional


from panopyr import __version__
from panopyr.losses import LossConfig, compound_loss
from panopyr.panofuse import FuseConfig, OracleFlags
from panopyr.panofuse.fusion import fuse_panoptic, oracle_substitute
from panopyr.panometrics import (
    average_precision,
    ground_truth_from_panoptic,
    instances_from_panoptic,
    miou,
    panoptic_quality,
)
from panopyr.pyramidnet import NetConfig, init_params, model_forward
from panopyr.targetgen import (
    IGNORE_LABEL,
    TargetConfig,
    WeightLadder,
    make_boundary_weights,
    make_targets,
)
from panopyr.utils import parse_id_list, parse_size
from panopyr.workbench import SceneSpec
from panopyr.workbench import codecs
from panopyr.workbench.bench import bench_pipeline
from panopyr.workbench.render import render_offsets, render_panoptic, write_ppm
from panopyr.workbench.scenes import synth_scene
from panopyr.workbench.tensorfile import (
    MissingTensorError,
    TensorFileError,
    read_tensors,
    require,
    write_tensors,
)


LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FORMAT = 2
EXIT_CONTRACT = 3


def _emit(text: str, output: Optional[str] = None):
    if output:
        with open(output, "w") as f:
            f.write(text)
        LOGGER.info(f"Wrote report to {output}")
    else:
        sys.stdout.write(text)


def _class_table(args, *tensor_sets) -> dict:
    """Class table from `--things/--stuff`, `--classes <file>` or the first file holding one."""
    if args.things is not None or args.stuff is not None:
        things = parse_id_list(args.things or "")
        stuff = parse_id_list(args.stuff or "")
        table = {c: False for c in stuff}
        table.update({c: True for c in things})
        return table
    if args.classes:
        tensors = read_tensors(args.classes)
        require(tensors, "class_table")
        return codecs.class_table_from_array(tensors["class_table"])
    for tensors in tensor_sets:
        if tensors is not None and "class_table" in tensors:
            return codecs.class_table_from_array(tensors["class_table"])
    raise MissingTensorError("No class table: pass --things/--stuff or --classes")


def cmd_targets(args) -> int:
    pan = codecs.panoptic_from_tensors(read_tensors(args.panoptic))
    config = {"sigma": args.sigma}
    if args.regions is not None:
        config["region_count"] = args.regions
    targets = make_targets(pan, TargetConfig.from_dict(config))
    write_tensors(args.output, codecs.targets_to_tensors(targets, pan))
    return EXIT_OK


def cmd_params(args) -> int:
    cfg = NetConfig(
        pyramid_levels=args.levels,
        base_channels=args.base_channels,
        upsample_channels=args.upsample_channels,
        num_classes=args.num_classes,
        seed=args.seed,
        share_skip_projections=not args.separate_skips,
    )
    write_tensors(args.output, codecs.params_to_tensors(init_params(cfg)))
    return EXIT_OK


def cmd_forward(args) -> int:
    image = codecs.image_from_tensors(read_tensors(args.image))
    params = codecs.params_from_tensors(read_tensors(args.params))
    cfg = replace(params.config, pyramid_levels=args.levels) if args.levels else None
    preds = model_forward(image, params, cfg)
    write_tensors(args.output, codecs.predictions_to_tensors(preds))
    return EXIT_OK


def cmd_fuse(args) -> int:
    pred_tensors = read_tensors(args.predictions)
    preds = codecs.predictions_from_tensors(pred_tensors)
    target_tensors = read_tensors(args.targets) if args.targets else None
    flags = OracleFlags.from_names(args.oracle)
    if flags.any():
        if target_tensors is None:
            raise ValueError("--oracle needs --targets")
        preds = oracle_substitute(preds, codecs.targets_from_tensors(target_tensors), flags)
    class_table = _class_table(args, target_tensors, pred_tensors)
    cfg = FuseConfig(
        nms_window=args.nms_window,
        nms_threshold=args.nms_threshold,
        max_centers=args.max_centers,
    )
    pan, centers = fuse_panoptic(preds, class_table, cfg, threads=args.threads)
    write_tensors(args.output, codecs.fused_to_tensors(pan, centers))
    return EXIT_OK


def cmd_loss(args) -> int:
    preds = codecs.predictions_from_tensors(read_tensors(args.predictions))
    target_tensors = read_tensors(args.targets)
    targets = codecs.targets_from_tensors(target_tensors)
    if args.regions is not None:
        pan = codecs.panoptic_from_tensors(target_tensors)
        ladder = WeightLadder() if args.regions == 4 else WeightLadder.interpolated(args.regions)
        targets = replace(targets, offset_weights=make_boundary_weights(pan, ladder))
    cfg = LossConfig(
        lambda_sem=args.lambda_sem,
        lambda_cen=args.lambda_cen,
        lambda_baol=args.lambda_baol,
        plain_l1_lambda=args.lambda_l1,
        hard_pixel_mining=not args.no_mining,
    )
    loss = compound_loss(preds, targets, cfg, offset_loss=args.offset_loss)
    lines = [f"{name} {float(value)!r}" for name, value in loss.breakdown().items()]
    _emit("\n".join(lines) + "\n", args.report)
    return EXIT_OK


def cmd_eval(args) -> int:
    pred_tensors, gt_tensors = read_tensors(args.prediction), read_tensors(args.ground_truth)
    pred = codecs.panoptic_from_tensors(pred_tensors)
    gt = codecs.panoptic_from_tensors(gt_tensors)
    if args.metric == "pq":
        report = panoptic_quality(pred, gt)
    elif args.metric == "miou":
        num_classes = args.num_classes or max(gt.class_table) + 1
        report = miou(pred.semantic(), gt.semantic(), num_classes, IGNORE_LABEL)
    else:
        centers = codecs.centers_from_array(pred_tensors["centers"]) if "centers" in pred_tensors else None
        report = average_precision(
            [instances_from_panoptic(pred, centers)], [ground_truth_from_panoptic(gt)]
        )
    _emit(report.to_text(), args.report)
    return EXIT_OK


def cmd_synth(args) -> int:
    height, width = parse_size(args.size)
    config = {"seed": args.seed, "height": height, "width": width}
    if args.instances:
        config["instance_range"] = tuple(int(n) for n in args.instances.split(","))
    image, pan = synth_scene(SceneSpec.from_dict(config))
    write_tensors(args.output, codecs.scene_to_tensors(image, pan, args.seed))
    return EXIT_OK


def cmd_render(args) -> int:
    tensors = read_tensors(args.input)
    if args.kind == "pan":
        data = render_panoptic(codecs.panoptic_from_tensors(tensors))
    else:
        require(tensors, "offsets")
        data = render_offsets(tensors["offsets"])
    write_ppm(args.output, data)
    return EXIT_OK


def cmd_bench(args) -> int:
    height, width = parse_size(args.size)
    spec = SceneSpec(seed=args.seed, height=height, width=width)
    report = bench_pipeline(spec, {"pyramid_levels": args.levels}, threads=args.threads, reps=args.reps)
    _emit(report.to_text(), args.report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panopyr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="log warnings only")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("targets", help="craft training targets from a panoptic map")
    p.add_argument("panoptic")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--sigma", type=float, default=5.0)
    p.add_argument("--regions", type=int, default=None, help="boundary weight regions")
    p.set_defaults(func=cmd_targets)

    p = sub.add_parser("params", help="write seeded network parameters")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--levels", type=int, choices=(1, 2, 3), default=3)
    p.add_argument("--base-channels", type=int, default=8)
    p.add_argument("--upsample-channels", type=int, default=32)
    p.add_argument("--num-classes", type=int, default=14)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--separate-skips", action="store_true", help="one skip projection per level")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("forward", help="run the network on an image")
    p.add_argument("image")
    p.add_argument("--params", required=True)
    p.add_argument("--levels", type=int, choices=(1, 2, 3), default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("fuse", help="post-process predictions into a panoptic map")
    p.add_argument("predictions")
    p.add_argument("--oracle", default="", help="comma separated subset of sem,cen,off")
    p.add_argument("--targets", default=None)
    p.add_argument("--things", default=None, help="thing class ids, e.g. 11,12,13")
    p.add_argument("--stuff", default=None, help="stuff class ids, e.g. 0,1,2")
    p.add_argument("--classes", default=None, help="tensor file holding a class_table")
    p.add_argument("--nms-window", type=int, default=7)
    p.add_argument("--nms-threshold", type=float, default=0.1)
    p.add_argument("--max-centers", type=int, default=200)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("loss", help="evaluate the training objective")
    p.add_argument("predictions")
    p.add_argument("targets")
    p.add_argument("--lambda-sem", type=float, default=LossConfig.lambda_sem)
    p.add_argument("--lambda-cen", type=float, default=LossConfig.lambda_cen)
    p.add_argument("--lambda-baol", type=float, default=LossConfig.lambda_baol)
    p.add_argument("--lambda-l1", type=float, default=LossConfig.plain_l1_lambda)
    p.add_argument("--regions", type=int, default=None)
    p.add_argument("--offset-loss", choices=("bal", "l1"), default="bal")
    p.add_argument("--no-mining", action="store_true", help="average all valid pixels")
    p.add_argument("--report", default=None, help="write the report here instead of stdout")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("eval", help="compare a prediction against ground truth")
    p.add_argument("metric", choices=("pq", "miou", "ap"))
    p.add_argument("prediction")
    p.add_argument("ground_truth")
    p.add_argument("--num-classes", type=int, default=None)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", default="128x128")
    p.add_argument("--instances", default=None, help="instance count range, e.g. 3,8")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render", help="render a panoptic map or offsets as PPM")
    p.add_argument("kind", choices=("pan", "offsets"))
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("bench", help="time the inference pipeline")
    p.add_argument("--size", default="128x128")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--levels", type=int, choices=(1, 2, 3), default=3)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (TensorFileError, OSError) as err:
        LOGGER.error(f"{args.command}: {err}")
        return EXIT_FORMAT
    except (ValueError, RuntimeError) as err:
        LOGGER.error(f"{args.command}: {err}")
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
