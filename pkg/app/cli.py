"""
Command line entry point: python -m app.cli <command> [options]

Every command accepts --config (JSON settings overrides), --seed and --out.
Reports are written as sorted, indented JSON so repeated runs with the same
seed produce identical files.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import uvicorn

from app.core.config import Settings, load_settings
from app.core.error_handlers import AppException, DatasetError, UntrainedModelError
from app.core.logger import get_logger
from app.schemas.training import (
    ClassifierTrainConfig,
    FuserTrainConfig,
    OcrTrainConfig,
    SimulationConfig,
    SynthConfig,
)
from app.services.camsim import simulate
from app.services.fusion import fuser_checkpoint, held_out_losses, train_fusion_net
from app.services.imaging import crop, load_png
from app.services.neuralcore.checkpoint import save_checkpoint
from app.services.pipeline.evaluation import compare_strategies, evaluate_records
from app.services.pipeline.layout import train_classifier
from app.services.pipeline.multiview import ViewStrategy, view_pairs
from app.services.pipeline.params import FUSER_FILE, LAYOUT_FILE, OCR_FILE, PipelineParams
from app.services.pipeline.recognizer import row_samples, train_ocr
from app.services.pipeline.runner import Frame, PlateRecognizer, PlateResult
from app.services.synthgen import Layout, SceneRecord, load_records, make_dataset
from main import create_app, load_recognizer

logger = get_logger(__name__)


def _write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"Cannot write {path}", details={"reason": str(e)})
    logger.info(f"Wrote {path}")
    return path


def _records(manifest: str) -> List[SceneRecord]:
    records = load_records(Path(manifest))
    if not records:
        raise DatasetError(f"Manifest {manifest} has no records")
    return records


def _recognizer(config: Settings, params_dir: Optional[str], strategy: Optional[str] = None) -> PlateRecognizer:
    params = PipelineParams.load(Path(params_dir or config.PARAMS_DIR))
    return PlateRecognizer(params, config, ViewStrategy(strategy) if strategy else None)


def _curves(loss_curve: Sequence[float], val_curve: Sequence[float], **extra: Any) -> Dict[str, Any]:
    return {"loss_curve": list(loss_curve), "val_curve": list(val_curve), **extra}


def _result_dict(result: PlateResult) -> Dict[str, Any]:
    return {
        "bundle_id": result.bundle_id,
        "scene_id": result.scene_id,
        "text": result.text,
        "confidence": result.confidence,
        "per_view_texts": result.per_view_texts,
        "layout": result.layout.value if result.layout else None,
        "detections": [
            {"view_id": d.view_id, "box": d.box.as_list(), "confidence": d.confidence}
            for d in result.detections
        ],
    }


# ---------------------------------------------------------------- commands

def cmd_synth(args: argparse.Namespace, config: Settings) -> int:
    synth = SynthConfig(
        num_scenes=args.scenes,
        views_per_scene=args.views,
        two_row_fraction=args.two_row_fraction,
    )
    dataset = make_dataset(synth, seed=_seed(args, config), out_dir=Path(args.out or "data"))
    logger.info(f"Manifest written to {dataset.manifest_path}")
    return 0


def cmd_train_ocr(args: argparse.Namespace, config: Settings) -> int:
    records = _records(args.manifest)
    samples = [sample for record in records for sample in row_samples(record)]
    train_config = OcrTrainConfig.from_settings(config, seed=_seed(args, config))
    if args.epochs:
        train_config = train_config.model_copy(update={"epochs": args.epochs})

    result = train_ocr(samples, train_config, input_height=config.CANONICAL_PLATE_HEIGHT)
    out = Path(args.out or config.PARAMS_DIR)
    save_checkpoint(out / OCR_FILE, result.model.to_checkpoint({"seed": train_config.seed, "samples": len(samples)}))
    _write_json(out / "ocr_training.json", _curves(result.loss_curve, result.val_curve, skipped=result.skipped))
    return 0


def cmd_train_classifier(args: argparse.Namespace, config: Settings) -> int:
    records = _records(args.manifest)
    samples = [
        (crop(r.frame, *r.gt_box.as_list()), r.spec.layout if r.spec else Layout.SINGLE_ROW)
        for r in records
    ]
    train_config = ClassifierTrainConfig.from_settings(config, seed=_seed(args, config))
    if args.epochs:
        train_config = train_config.model_copy(update={"epochs": args.epochs})

    result = train_classifier(samples, train_config)
    out = Path(args.out or config.PARAMS_DIR)
    save_checkpoint(out / LAYOUT_FILE, result.classifier.to_checkpoint({"seed": train_config.seed}))
    _write_json(out / "layout_training.json", _curves(result.loss_curve, result.val_curve))
    return 0


def cmd_train_fuser(args: argparse.Namespace, config: Settings) -> int:
    pairs = view_pairs(_records(args.manifest))
    train_config = FuserTrainConfig.from_settings(config, seed=_seed(args, config))
    if args.epochs:
        train_config = train_config.model_copy(update={"epochs": args.epochs})

    result = train_fusion_net(pairs, train_config)
    trained, analytic = held_out_losses(result.params, pairs, train_config.temperature)
    out = Path(args.out or config.PARAMS_DIR)
    save_checkpoint(out / FUSER_FILE, fuser_checkpoint(result.params, train_config, {"seed": train_config.seed}))
    _write_json(
        out / "fuser_training.json",
        _curves(result.loss_curve, result.val_curve, trained_loss=trained, analytic_loss=analytic),
    )
    return 0


def cmd_eval(args: argparse.Namespace, config: Settings) -> int:
    recognizer = _recognizer(config, args.params, args.strategy)
    records = _records(args.manifest)
    if args.compare:
        reports = compare_strategies(recognizer, records)
        payload = {name: report.model_dump() for name, report in reports.items()}
    else:
        report = evaluate_records(recognizer, records)
        payload = report.model_dump()
        logger.info(
            f"exact={report.plate_exact_match_rate:.4f} char_acc={report.character_accuracy:.4f} f1={report.f1:.4f}"
        )
    _write_json(Path(args.out or "eval_report.json"), payload)
    return 0


def cmd_run(args: argparse.Namespace, config: Settings) -> int:
    """Treat the given images as simultaneous views of one scene."""
    recognizer = _recognizer(config, args.params, args.strategy)
    frames = [Frame(view_id, 0.0, load_png(Path(path))) for view_id, path in enumerate(args.images)]
    results = recognizer.process_frames(frames)
    payload = [_result_dict(r) for r in results]
    for r in results:
        logger.info(f"bundle {r.bundle_id}: '{r.text}' ({r.confidence:.3f})")
    if args.out:
        _write_json(Path(args.out), payload)
    else:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_serve(args: argparse.Namespace, config: Settings) -> int:
    if args.params:
        config = config.model_copy(update={"PARAMS_DIR": args.params})
    app = create_app(config=config, num_workers=args.workers, queue_depth=args.queue_depth)
    uvicorn.run(app, host=args.host or config.HOST, port=args.port or config.PORT, log_level="info")
    return 0


def cmd_simulate(args: argparse.Namespace, config: Settings) -> int:
    if args.params:
        config = config.model_copy(update={"PARAMS_DIR": args.params})
    recognizer = load_recognizer(config)
    if recognizer is None:
        raise UntrainedModelError(f"No usable parameters in {config.PARAMS_DIR}")

    frames = [r.frame for r in _records(args.manifest)]
    sim_config = SimulationConfig(
        num_cameras=args.cameras,
        num_workers=args.workers or config.NUM_WORKERS,
        duration=args.duration,
        frame_interval=args.frame_interval,
        queue_depth=args.queue_depth or config.QUEUE_DEPTH,
        time_scale=args.time_scale,
        seed=_seed(args, config),
    )
    report = simulate(sim_config, recognizer.recognize_frame, frames)
    _write_json(Path(args.out or "simulation_report.json"), report.model_dump(mode="json"))
    return 0


# ---------------------------------------------------------------- parser

def _seed(args: argparse.Namespace, config: Settings) -> int:
    return config.SEED if args.seed is None else args.seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="app.cli", description="Multi-view license plate recognition")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of settings overrides")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", help="output file or directory")

    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler: Callable[[argparse.Namespace, Settings], int], help_text: str) -> argparse.ArgumentParser:
        command = sub.add_parser(name, parents=[common], help=help_text)
        command.set_defaults(handler=handler)
        return command

    synth = add("synth", cmd_synth, "render a synthetic multi-view dataset")
    synth.add_argument("--scenes", type=int, default=100)
    synth.add_argument("--views", type=int, default=3)
    synth.add_argument("--two-row-fraction", type=float, default=0.3)

    for name, handler, help_text in (
        ("train-ocr", cmd_train_ocr, "train the CRNN recognizer with CTC"),
        ("train-classifier", cmd_train_classifier, "train the plate layout classifier"),
        ("train-fuser", cmd_train_fuser, "train the learned two-view fuser"),
    ):
        command = add(name, handler, help_text)
        command.add_argument("--manifest", required=True)
        command.add_argument("--epochs", type=int, default=None)

    evaluate = add("eval", cmd_eval, "evaluate trained parameters on a manifest")
    evaluate.add_argument("--manifest", required=True)
    evaluate.add_argument("--params")
    evaluate.add_argument("--strategy", choices=[s.value for s in ViewStrategy])
    evaluate.add_argument("--compare", action="store_true", help="report every view strategy")

    run = add("run", cmd_run, "recognize plates in images of one scene")
    run.add_argument("images", nargs="+")
    run.add_argument("--params")
    run.add_argument("--strategy", choices=[s.value for s in ViewStrategy])

    serve = add("serve", cmd_serve, "start the HTTP recognition service")
    serve.add_argument("--workers", type=int, default=None)
    serve.add_argument("--queue-depth", type=int, default=None)
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--host", default=None)
    serve.add_argument("--params")

    sim = add("simulate", cmd_simulate, "replay camera streams against the worker pool")
    sim.add_argument("--manifest", required=True)
    sim.add_argument("--params")
    sim.add_argument("--cameras", type=int, default=30)
    sim.add_argument("--workers", type=int, default=None)
    sim.add_argument("--queue-depth", type=int, default=None)
    sim.add_argument("--duration", type=float, default=10.0)
    sim.add_argument("--frame-interval", type=float, default=0.5)
    sim.add_argument("--time-scale", type=float, default=1.0)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_settings(args.config)
        return args.handler(args, config)
    except AppException as e:
        logger.error(f"{args.command} failed: {e.message} {e.details or ''}".rstrip())
        return 1


if __name__ == "__main__":
    sys.exit(main())
