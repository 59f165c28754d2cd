"""Command line interface: gen-data / train / infer / eval / report."""

import argparse
import datetime
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    PRESETS,
    build_eval_config,
    build_model,
    build_suppression_config,
    build_train_config,
    config_hash,
    load_config,
)
from .errors import ConfigError, DataError, DivergenceError
from .formats import (
    check_model_config,
    load_checkpoint,
    load_dataset,
    read_proposals,
    save_checkpoint,
    save_dataset,
    write_metric_report,
    write_proposals,
)
from .metrics import auc, detection_map, oracle_detections, recall_curve
from .network import ProposalNet
from .postprocess import infer_video
from .synth import gen_dataset, make_windows
from .training import train


def _add_common(sub):
    sub.add_argument("--config", default=None, help="JSON config file")
    sub.add_argument(
        "--preset", default="desk", choices=sorted(PRESETS), help="base configuration"
    )
    sub.add_argument("--seed", type=int, default=None, help="override config seed")
    sub.add_argument(
        "--threads", type=int, default=None, help="worker threads (default 1)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tapgen", description="temporal action proposal pipeline"
    )
    parser.add_argument("--version", action="version", version=f"tapgen {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("gen-data", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--out", required=True, help="output dataset directory")

    p = subs.add_parser("train", help="train a model on a dataset")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")

    p = subs.add_parser("infer", help="generate proposals with a trained model")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--checkpoint", required=True, help="trained checkpoint")
    p.add_argument("--out", required=True, help="proposal output directory")

    p = subs.add_parser("eval", help="score proposals against annotations")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset directory (ground truth)")
    p.add_argument("--proposals", required=True, help="proposal directory")
    p.add_argument("--out", required=True, help="metrics output directory")

    p = subs.add_parser("report", help="print a metrics summary table")
    p.add_argument("--run", required=True, help="eval output directory")
    return parser


def _resolve_config(args) -> dict:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        overrides["threads"] = args.threads
    return load_config(args.preset, args.config, overrides)


def _write_manifest(out_dir, command, cfg, inputs, outputs, t0):
    doc = {
        "command": command,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seed": cfg["seed"],
        "inputs": inputs,
        "outputs": outputs,
        "versions": {
            "tapgen": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    (Path(out_dir) / "manifest.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n"
    )


def _make_executor(threads: int):
    if threads <= 1:
        return None
    from concurrent.futures import ThreadPoolExecutor

    return ThreadPoolExecutor(max_workers=threads)


def cmd_gen_data(args) -> int:
    t0 = time.perf_counter()
    cfg = _resolve_config(args)
    d = cfg["data"]
    videos = gen_dataset(
        cfg["seed"],
        d["n_videos"],
        d["video_length"],
        d["n_channels"],
        d["n_actions"],
        n_classes=d["n_classes"],
        max_duration=cfg["model"]["max_duration"],
    )
    save_dataset(args.out, videos)
    _write_manifest(
        args.out, "gen-data", cfg, {}, {"videos": [v.id for v in videos]}, t0
    )
    print(f"wrote {len(videos)} videos to {args.out}")
    return 0


def _training_windows(records, window_length):
    windows = []
    for rec in records:
        windows.extend(make_windows(rec, window_length))
    if not windows:
        raise DataError("dataset produced no training windows")
    return windows


def cmd_train(args) -> int:
    t0 = time.perf_counter()
    cfg = _resolve_config(args)
    records = load_dataset(args.data)
    channels = {rec.features.shape[1] for rec in records}
    if len(channels) != 1:
        raise DataError(f"inconsistent feature dimensions in dataset: {sorted(channels)}")
    (c_in,) = channels
    if c_in != cfg["data"]["n_channels"]:
        cfg = dict(cfg)
        cfg["data"] = dict(cfg["data"], n_channels=c_in)
    model = build_model(cfg)
    tcfg = build_train_config(cfg)
    state, start_step, start_batches = None, 0, None
    if args.resume:
        params, stored, step, _epoch, batches, adam = load_checkpoint(args.resume)
        check_model_config(stored, model.config, path=args.resume)
        model.load_param_dict(params)
        state, start_step, start_batches = adam, step, batches
    windows = _training_windows(records, model.window_length)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def save(result):
        save_checkpoint(
            out / "checkpoint.bsnc",
            model.param_dict(),
            model.config,
            step=result.step,
            epoch=result.epoch,
            batches=result.batches_done,
            adam=result.state,
        )
        result.log.to_csv(out / "train_log.csv")

    try:
        result = train(
            model, windows, tcfg, state=state, start_step=start_step,
            start_batches=start_batches,
        )
    except DivergenceError as exc:
        save(exc.result)  # last finite weights + partial log
        raise
    save(result)
    _write_manifest(
        args.out,
        "train",
        cfg,
        {"data": str(args.data), "resume": args.resume},
        {"checkpoint": "checkpoint.bsnc", "log": "train_log.csv", "steps": result.step},
        t0,
    )
    final = result.log.records[-1].total if result.log.records else float("nan")
    print(f"trained {result.step} steps ({result.epoch} epochs), final loss {final:.6f}")
    return 0


def cmd_infer(args) -> int:
    t0 = time.perf_counter()
    cfg = _resolve_config(args)
    params, stored, _step, _epoch, _batches, _adam = load_checkpoint(args.checkpoint)
    model = ProposalNet(**stored, seed=cfg["seed"])
    model.load_param_dict(params)
    records = load_dataset(args.data)
    scfg = build_suppression_config(cfg)
    executor = _make_executor(cfg["threads"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    total = 0
    try:
        for rec in records:
            proposals = infer_video(
                model, rec.features, scfg, video_id=rec.id, executor=executor
            )
            write_proposals(out / f"{rec.id}.json", rec.id, proposals)
            total += len(proposals)
    finally:
        if executor is not None:
            executor.shutdown()
    _write_manifest(
        args.out,
        "infer",
        cfg,
        {"data": str(args.data), "checkpoint": str(args.checkpoint)},
        {"videos": [rec.id for rec in records], "proposals": total},
        t0,
    )
    print(f"wrote proposals for {len(records)} videos to {args.out}")
    return 0


def cmd_eval(args) -> int:
    t0 = time.perf_counter()
    cfg = _resolve_config(args)
    ecfg = build_eval_config(cfg)
    records = load_dataset(args.data)
    proposals_dir = Path(args.proposals)
    per_video, dets_by_vid, gts_by_vid = [], {}, {}
    for rec in records:
        vid, props = read_proposals(proposals_dir / f"{rec.id}.json")
        if vid != rec.id:
            raise DataError(f"{rec.id}.json holds proposals for {vid!r}")
        triples = [(p.t_start, p.t_end, p.score) for p in props]
        gts = [(a.t_start, a.t_end) for a in rec.annotations]
        labeled = [(a.t_start, a.t_end, a.label) for a in rec.annotations]
        per_video.append((triples, gts))
        dets_by_vid[rec.id] = oracle_detections(props, labeled)
        gts_by_vid[rec.id] = labeled
    curve = recall_curve(per_video, ecfg)
    area = auc(curve)
    dmap = detection_map(dets_by_vid, gts_by_vid, ecfg.tiou_thresholds)
    rows = [("ar", None, an, curve.at(an)) for an in range(1, ecfg.an_max + 1)]
    rows.append(("auc", None, None, area))
    for thr in ecfg.tiou_thresholds:
        rows.append(("map", thr, None, dmap["per_threshold"][thr]))
    rows.append(("map_avg", None, None, dmap["average"]))
    summary = {"AUC": area, "avg_mAP": dmap["average"]}
    for an in (1, 10, 100):
        if an <= ecfg.an_max:
            summary[f"AR@{an}"] = curve.at(an)
    for thr in ecfg.tiou_thresholds:
        summary[f"mAP@{thr:.2f}"] = dmap["per_threshold"][thr]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_metric_report(out / "metrics.csv", out / "summary.json", rows, summary)
    _write_manifest(
        args.out,
        "eval",
        cfg,
        {"data": str(args.data), "proposals": str(args.proposals)},
        {"metrics": "metrics.csv", "summary": "summary.json"},
        t0,
    )
    print(f"AUC {area:.4f}  avg_mAP {dmap['average']:.4f}")
    return 0


def cmd_report(args) -> int:
    path = Path(args.run) / "summary.json"
    if not path.exists():
        raise DataError(f"no summary.json under {args.run}")
    summary = json.loads(path.read_text())
    width = max(len(k) for k in summary)
    print(f"{'metric':<{width}}  value")
    print(f"{'-' * width}  {'-' * 8}")
    for key in sorted(summary):
        print(f"{key:<{width}}  {summary[key]:8.4f}")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
