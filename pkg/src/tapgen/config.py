"""Run configuration: presets, JSON overrides, validation, hashing."""

import copy
import hashlib
import json
from pathlib import Path

from .errors import ConfigError
from .metrics import ANET_THRESHOLDS, THUMOS_THRESHOLDS, EvalConfig
from .network import ProposalNet
from .postprocess import SuppressionConfig
from .training import TrainConfig

DESK = {
    "seed": 0,
    "threads": 1,
    "data": {
        "n_videos": 8,
        "video_length": 64,
        "n_channels": 8,
        "n_actions": 2,
        "n_classes": 4,
    },
    "model": {
        "window_length": 32,
        "max_duration": 16,
        "base_width": 64,
        "unet_width": 64,
        "reduced_channels": 32,
        "hidden_width": 64,
        "attn_width": None,
        "bidirectional": True,
    },
    "train": {
        "beta": 10.0,
        "gamma": 1e-4,
        "batch_size": 4,
        "lr_schedule": [[1e-3, 1000]],
        "max_steps": 300,
        "n_cells": 32,
        "lam": 0.15,
    },
    "suppression": {"sigma": 0.5, "score_floor": 1e-4, "max_out": 100, "hard": False},
    "eval": {"tiou_thresholds": list(ANET_THRESHOLDS), "an_max": 100},
}

PRESETS = {
    "desk": {},
    "paper-activitynet": {
        "data": {"n_videos": 10, "video_length": 200, "n_channels": 32, "n_actions": 3},
        "model": {
            "window_length": 100,
            "max_duration": 100,
            "base_width": 256,
            "unet_width": 512,
            "reduced_channels": 128,
            "hidden_width": 512,
        },
        "train": {
            "batch_size": 16,
            "lr_schedule": [[1e-3, 7], [1e-4, 3]],
            "max_steps": None,
        },
    },
    "paper-thumos": {
        "data": {"n_videos": 10, "video_length": 512, "n_channels": 32, "n_actions": 4},
        "model": {
            "window_length": 128,
            "max_duration": 64,
            "base_width": 256,
            "unet_width": 512,
            "reduced_channels": 128,
            "hidden_width": 512,
        },
        "train": {
            "batch_size": 16,
            "lr_schedule": [[1e-3, 7], [1e-4, 3]],
            "max_steps": None,
        },
        "eval": {"tiou_thresholds": list(THUMOS_THRESHOLDS)},
    },
}


def _deep_merge(base: dict, override: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config field {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected a section, got {value!r}")
            out[key] = _deep_merge(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(preset: str = "desk", config_path=None, overrides: dict = None) -> dict:
    """Resolve preset -> JSON file -> explicit overrides, then validate."""
    if preset not in PRESETS:
        raise ConfigError(
            f"unknown preset {preset!r}; available: {sorted(PRESETS)}"
        )
    cfg = _deep_merge(DESK, PRESETS[preset])
    if config_path is not None:
        try:
            doc = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {config_path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{config_path}: top level must be an object")
        file_preset = doc.pop("preset", None)
        if file_preset is not None:
            if file_preset not in PRESETS:
                raise ConfigError(f"{config_path}: unknown preset {file_preset!r}")
            cfg = _deep_merge(_deep_merge(DESK, PRESETS[file_preset]), doc)
        else:
            cfg = _deep_merge(cfg, doc)
    if overrides:
        cfg = _deep_merge(cfg, overrides)
    validate_config(cfg)
    return cfg


def _require(cond: bool, field: str, message: str):
    if not cond:
        raise ConfigError(f"{field}: {message}")


def validate_config(cfg: dict) -> None:
    m, t, d, s, e = cfg["model"], cfg["train"], cfg["data"], cfg["suppression"], cfg["eval"]
    _require(isinstance(cfg["seed"], int), "seed", "must be an integer")
    _require(isinstance(cfg["threads"], int) and cfg["threads"] >= 1, "threads", "must be >= 1")
    _require(m["window_length"] % 4 == 0, "model.window_length", "must be divisible by 4")
    _require(
        1 <= m["max_duration"] <= m["window_length"],
        "model.max_duration",
        f"must lie in [1, window_length={m['window_length']}]",
    )
    for key in ("base_width", "unet_width", "reduced_channels", "hidden_width"):
        _require(int(m[key]) >= 1, f"model.{key}", "must be >= 1")
    _require(
        m["attn_width"] is None or int(m["attn_width"]) >= 1,
        "model.attn_width",
        "must be >= 1 or null",
    )
    _require(d["video_length"] >= m["window_length"], "data.video_length", "shorter than one window")
    _require(d["n_videos"] >= 1, "data.n_videos", "must be >= 1")
    _require(d["n_channels"] >= 1, "data.n_channels", "must be >= 1")
    _require(d["n_actions"] >= 1, "data.n_actions", "must be >= 1")
    _require(d["n_classes"] >= 1, "data.n_classes", "must be >= 1")
    _require(t["beta"] >= 0, "train.beta", "must be >= 0")
    _require(t["gamma"] >= 0, "train.gamma", "must be >= 0")
    _require(t["batch_size"] >= 1, "train.batch_size", "must be >= 1")
    _require(t["n_cells"] >= 2, "train.n_cells", "must be >= 2")
    _require(0 < t["lam"] < 1, "train.lam", "must lie in (0, 1)")
    _require(
        t["max_steps"] is None or int(t["max_steps"]) >= 1,
        "train.max_steps",
        "must be >= 1 or null",
    )
    sched = t["lr_schedule"]
    _require(
        isinstance(sched, (list, tuple)) and len(sched) >= 1,
        "train.lr_schedule",
        "must be a non-empty list of [lr, epochs] pairs",
    )
    for k, entry in enumerate(sched):
        ok = (
            isinstance(entry, (list, tuple))
            and len(entry) == 2
            and float(entry[0]) > 0
            and int(entry[1]) >= 1
        )
        _require(ok, f"train.lr_schedule[{k}]", "must be [positive lr, epochs >= 1]")
    _require(s["sigma"] > 0, "suppression.sigma", "must be positive")
    _require(s["score_floor"] >= 0, "suppression.score_floor", "must be >= 0")
    _require(s["max_out"] >= 1, "suppression.max_out", "must be >= 1")
    thr = e["tiou_thresholds"]
    _require(
        isinstance(thr, (list, tuple)) and len(thr) >= 1,
        "eval.tiou_thresholds",
        "must be a non-empty list",
    )
    _require(
        all(0 < x <= 1 for x in thr) and list(thr) == sorted(thr),
        "eval.tiou_thresholds",
        "must be increasing values in (0, 1]",
    )
    _require(e["an_max"] >= 1, "eval.an_max", "must be >= 1")


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()


def build_model(cfg: dict) -> ProposalNet:
    m = cfg["model"]
    return ProposalNet(
        in_channels=cfg["data"]["n_channels"],
        window_length=m["window_length"],
        max_duration=m["max_duration"],
        base_width=m["base_width"],
        unet_width=m["unet_width"],
        reduced_channels=m["reduced_channels"],
        hidden_width=m["hidden_width"],
        attn_width=m["attn_width"],
        bidirectional=m["bidirectional"],
        seed=cfg["seed"],
    )


def build_train_config(cfg: dict) -> TrainConfig:
    t = cfg["train"]
    return TrainConfig(
        beta=float(t["beta"]),
        gamma=float(t["gamma"]),
        batch_size=int(t["batch_size"]),
        lr_schedule=tuple((float(lr), int(n)) for lr, n in t["lr_schedule"]),
        max_steps=None if t["max_steps"] is None else int(t["max_steps"]),
        n_cells=int(t["n_cells"]),
        lam=float(t["lam"]),
        seed=int(cfg["seed"]),
        threads=int(cfg["threads"]),
    )


def build_suppression_config(cfg: dict) -> SuppressionConfig:
    s = cfg["suppression"]
    return SuppressionConfig(
        sigma=float(s["sigma"]),
        score_floor=float(s["score_floor"]),
        max_out=int(s["max_out"]),
        hard=bool(s["hard"]),
    )


def build_eval_config(cfg: dict) -> EvalConfig:
    e = cfg["eval"]
    return EvalConfig(
        tiou_thresholds=tuple(float(x) for x in e["tiou_thresholds"]),
        an_max=int(e["an_max"]),
    )
