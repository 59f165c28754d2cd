"""On-disk formats: features, annotations, checkpoints, proposals, reports."""

import json

import numpy as np
import pytest

from tapgen.errors import DataError
from tapgen.formats import (
    check_model_config,
    load_checkpoint,
    load_dataset,
    read_annotations,
    read_features,
    read_proposals,
    save_checkpoint,
    save_dataset,
    write_annotations,
    write_features,
    write_metric_report,
    write_proposals,
)
from tapgen.optim import AdamState
from tapgen.postprocess import Proposal
from tapgen.synth import ActionInstance, VideoRecord, gen_video


def test_features_roundtrip_bit_exact(tmp_path):
    v = gen_video(9, 48, 6, 2, max_duration=12)
    path = tmp_path / "x.bsnf"
    write_features(path, v.features)
    back = read_features(path)
    assert back.dtype == np.float64
    assert np.array_equal(back, v.features)


def test_features_bad_magic(tmp_path):
    path = tmp_path / "x.bsnf"
    path.write_bytes(b"JUNKxxxxxxxxxxxxxxxx")
    with pytest.raises(DataError):
        read_features(path)


def test_features_truncated(tmp_path):
    v = gen_video(9, 16, 4, 1, max_duration=8)
    path = tmp_path / "x.bsnf"
    write_features(path, v.features)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(DataError):
        read_features(path)


def test_annotations_roundtrip(tmp_path):
    v = VideoRecord(
        "vid-1",
        np.zeros((20, 3)),
        [ActionInstance(2.0, 8.0, 1), ActionInstance(10.0, 17.0, 3)],
    )
    path = tmp_path / "vid-1.json"
    write_annotations(path, v)
    vid, length, instances = read_annotations(path)
    assert vid == "vid-1"
    assert length == 20
    assert [(a.t_start, a.t_end, a.label) for a in instances] == [
        (2.0, 8.0, 1),
        (10.0, 17.0, 3),
    ]


def test_dataset_roundtrip(tmp_path):
    videos = [gen_video(k, 32, 4, 1, max_duration=8, video_id=f"v{k}") for k in range(3)]
    save_dataset(tmp_path, videos)
    back = load_dataset(tmp_path)
    assert [v.id for v in back] == ["v0", "v1", "v2"]
    for a, b in zip(videos, back):
        assert np.array_equal(a.features, b.features)
        assert [(x.t_start, x.t_end) for x in a.annotations] == [
            (x.t_start, x.t_end) for x in b.annotations
        ]


def test_dataset_id_mismatch(tmp_path):
    videos = [gen_video(0, 32, 4, 1, max_duration=8, video_id="v0")]
    save_dataset(tmp_path, videos)
    doc = json.loads((tmp_path / "v0.json").read_text())
    doc["id"] = "other"
    (tmp_path / "v0.json").write_text(json.dumps(doc))
    with pytest.raises(DataError):
        load_dataset(tmp_path)


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    params = {"a.w": rng.normal(size=(3, 2)), "b.w": rng.normal(size=(4,))}
    adam = AdamState(
        step=5,
        m={k: rng.normal(size=v.shape) for k, v in params.items()},
        v={k: np.abs(rng.normal(size=v.shape)) for k, v in params.items()},
    )
    cfg = {"window_length": 32, "max_duration": 16}
    path = tmp_path / "c.bsnc"
    save_checkpoint(path, params, cfg, step=17, epoch=2, batches=19, adam=adam)
    p2, cfg2, step, epoch, batches, adam2 = load_checkpoint(path)
    assert step == 17 and epoch == 2 and batches == 19
    assert cfg2 == cfg
    for k in params:
        assert np.array_equal(p2[k], params[k])
        assert np.array_equal(adam2.m[k], adam.m[k])
        assert np.array_equal(adam2.v[k], adam.v[k])
    assert adam2.step == 5


def test_checkpoint_without_adam(tmp_path):
    path = tmp_path / "c.bsnc"
    save_checkpoint(path, {"w": np.ones(3)}, {"x": 1})
    _, _, step, epoch, batches, adam = load_checkpoint(path)
    assert (step, epoch, batches, adam) == (0, 0, 0, None)


def test_checkpoint_corrupt_payload(tmp_path):
    path = tmp_path / "c.bsnc"
    save_checkpoint(path, {"w": np.ones(3)}, {})
    path.write_bytes(path.read_bytes() + b"\x00" * 8)
    with pytest.raises(DataError):
        load_checkpoint(path)


def test_check_model_config_diff():
    check_model_config({"a": 1}, {"a": 1})
    with pytest.raises(DataError, match="window_length"):
        check_model_config({"window_length": 32}, {"window_length": 64})


def test_proposals_roundtrip(tmp_path):
    props = [Proposal(1.0, 5.0, 0.9), Proposal(2.5, 7.25, 0.125)]
    path = tmp_path / "p.json"
    write_proposals(path, "vid-9", props)
    vid, back = read_proposals(path)
    assert vid == "vid-9"
    assert [(p.t_start, p.t_end, p.score) for p in back] == [
        (1.0, 5.0, 0.9),
        (2.5, 7.25, 0.125),
    ]


def test_proposals_malformed(tmp_path):
    path = tmp_path / "p.json"
    path.write_text('{"id": "v", "proposals": [{"start": 1}]}')
    with pytest.raises(DataError):
        read_proposals(path)


def test_metric_report_golden(tmp_path):
    rows = [("ar", None, 1, 0.5), ("map", 0.5, None, 0.25), ("auc", None, None, 62.5)]
    csv_path = tmp_path / "m.csv"
    json_path = tmp_path / "s.json"
    write_metric_report(csv_path, json_path, rows, {"AUC": 62.5, "AR@1": 0.5})
    text = csv_path.read_text()
    assert text.splitlines()[0] == "metric,threshold,an,value"
    assert "ar,,1,0.5000000000" in text
    assert "map,0.50,,0.2500000000" in text
    assert json.loads(json_path.read_text()) == {"AUC": 62.5, "AR@1": 0.5}
