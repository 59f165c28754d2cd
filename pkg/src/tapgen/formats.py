"""On-disk artifact formats.

Binary layouts are little-endian with 4-byte ASCII magics:

* features  ``BSNF``: magic, u32 version=1, u32 T, u32 C, then T*C float32
  row-major.
* checkpoint ``BSNC``: magic, u32 version=1, u32 header length, UTF-8 JSON
  header (model config, progress counters, parameter manifest with shapes,
  optional optimizer flag), then float64 parameter data in manifest order,
  followed by Adam first/second moments in the same order when present.

Annotations, proposals, run manifests and metric summaries are JSON;
per-step training logs and metric tables are CSV.
"""

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .optim import AdamState
from .synth import ActionInstance, VideoRecord

FEATURE_MAGIC = b"BSNF"
CHECKPOINT_MAGIC = b"BSNC"
FORMAT_VERSION = 1


def write_features(path, features: np.ndarray) -> None:
    features = np.asarray(features)
    if features.ndim != 2:
        raise DataError(f"features must be (T, C), got shape {features.shape}")
    t, c = features.shape
    with open(path, "wb") as f:
        f.write(FEATURE_MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, t, c))
        f.write(np.ascontiguousarray(features, dtype="<f4").tobytes())


def read_features(path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != FEATURE_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
        version, t, c = struct.unpack("<III", f.read(12))
        if version != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported feature format version {version}")
        raw = f.read(4 * t * c)
        if len(raw) != 4 * t * c:
            raise DataError(f"{path}: truncated feature payload")
    return np.frombuffer(raw, dtype="<f4").reshape(t, c).astype(np.float64)


def write_annotations(path, video: VideoRecord) -> None:
    doc = {
        "id": video.id,
        "length": int(video.length),
        "instances": [
            {"start": a.t_start, "end": a.t_end, "label": int(a.label)}
            for a in video.annotations
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_annotations(path):
    try:
        doc = json.loads(Path(path).read_text())
        vid = str(doc["id"])
        length = int(doc["length"])
        instances = [
            ActionInstance(float(i["start"]), float(i["end"]), int(i.get("label", 0)))
            for i in doc["instances"]
        ]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: malformed annotation file ({exc})") from exc
    return vid, length, instances


def write_index(path, video_ids: list[str]) -> None:
    Path(path).write_text(json.dumps({"videos": list(video_ids)}, indent=2) + "\n")


def read_index(path) -> list[str]:
    try:
        return [str(v) for v in json.loads(Path(path).read_text())["videos"]]
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: malformed index file ({exc})") from exc


def load_dataset(data_dir) -> list[VideoRecord]:
    """Read every indexed video (features + annotations) from a directory."""
    data_dir = Path(data_dir)
    index_path = data_dir / "index.json"
    if not index_path.exists():
        raise DataError(f"no index.json in {data_dir}")
    videos = []
    for vid in read_index(index_path):
        feat_path = data_dir / f"{vid}.bsnf"
        ann_path = data_dir / f"{vid}.json"
        for p in (feat_path, ann_path):
            if not p.exists():
                raise DataError(f"indexed video {vid}: missing {p.name}")
        features = read_features(feat_path)
        ann_id, length, instances = read_annotations(ann_path)
        if ann_id != vid:
            raise DataError(f"{ann_path}: id {ann_id!r} does not match index entry {vid!r}")
        if length != features.shape[0]:
            raise DataError(
                f"{vid}: annotation length {length} != feature length {features.shape[0]}"
            )
        videos.append(VideoRecord(vid, features, instances))
    return videos


def save_dataset(data_dir, videos: list[VideoRecord]) -> None:
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    for v in videos:
        write_features(data_dir / f"{v.id}.bsnf", v.features)
        write_annotations(data_dir / f"{v.id}.json", v)
    write_index(data_dir / "index.json", [v.id for v in videos])


def save_checkpoint(
    path,
    params: dict[str, np.ndarray],
    model_config: dict,
    *,
    step: int = 0,
    epoch: int = 0,
    batches: int = None,
    adam: AdamState = None,
) -> None:
    names = list(params.keys())
    header = {
        "model": model_config,
        "step": int(step),
        "epoch": int(epoch),
        "batches": int(step) if batches is None else int(batches),
        "params": [{"name": n, "shape": list(params[n].shape)} for n in names],
        "adam": None
        if adam is None
        else {"step": adam.step, "beta1": adam.beta1, "beta2": adam.beta2, "eps": adam.eps},
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        f.write(blob)
        for n in names:
            f.write(np.ascontiguousarray(params[n], dtype="<f8").tobytes())
        if adam is not None:
            for n in names:
                f.write(np.ascontiguousarray(adam.m[n], dtype="<f8").tobytes())
            for n in names:
                f.write(np.ascontiguousarray(adam.v[n], dtype="<f8").tobytes())


def load_checkpoint(path):
    """Returns (params dict, model_config, step, epoch, batches, AdamState or None)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        version, hlen = struct.unpack("<II", f.read(8))
        if version != FORMAT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(f.read(hlen).decode())
        payload = f.read()
    entries = [(e["name"], tuple(e["shape"])) for e in header["params"]]

    def take_block(offset):
        out = {}
        for name, shape in entries:
            n = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(payload, dtype="<f8", count=n, offset=offset)
            out[name] = arr.reshape(shape).astype(np.float64)
            offset += 8 * n
        return out, offset

    params, offset = take_block(0)
    adam = None
    if header.get("adam"):
        meta = header["adam"]
        m, offset = take_block(offset)
        v, offset = take_block(offset)
        adam = AdamState(
            step=int(meta["step"]),
            m=m,
            v=v,
            beta1=meta["beta1"],
            beta2=meta["beta2"],
            eps=meta["eps"],
        )
    if offset != len(payload):
        raise DataError(f"{path}: checkpoint payload size mismatch")
    return (
        params,
        header["model"],
        header["step"],
        header["epoch"],
        header.get("batches", header["step"]),
        adam,
    )


def check_model_config(stored: dict, expected: dict, path="checkpoint") -> None:
    """Reject a checkpoint whose architecture does not match the run config."""
    diffs = []
    for key in sorted(set(stored) | set(expected)):
        a, b = stored.get(key), expected.get(key)
        if a != b:
            diffs.append(f"{key}: checkpoint={a!r} config={b!r}")
    if diffs:
        raise DataError(f"{path}: incompatible model config; " + "; ".join(diffs))


def write_proposals(path, video_id: str, proposals) -> None:
    doc = {
        "id": video_id,
        "proposals": [
            {"start": p.t_start, "end": p.t_end, "score": p.score} for p in proposals
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_proposals(path):
    from .postprocess import Proposal

    try:
        doc = json.loads(Path(path).read_text())
        vid = str(doc["id"])
        props = [
            Proposal(float(p["start"]), float(p["end"]), float(p["score"]))
            for p in doc["proposals"]
        ]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: malformed proposal file ({exc})") from exc
    return vid, props


def write_metric_report(csv_path, json_path, rows, summary: dict) -> None:
    """rows: (metric, threshold, an, value) tuples; summary: flat JSON dict."""
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["metric", "threshold", "an", "value"])
        for metric, threshold, an, value in rows:
            writer.writerow(
                [
                    metric,
                    "" if threshold is None else f"{threshold:.2f}",
                    "" if an is None else an,
                    f"{value:.10f}",
                ]
            )
    Path(json_path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
