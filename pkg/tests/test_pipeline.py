import pytest

from sotmot.appearance import NCCBackend, OracleBackend
from sotmot.config import PipelineConfig
from sotmot.core import nms_by_frame
from sotmot.metrics import evaluate
from sotmot.pipeline import track


@pytest.fixture(scope="module")
def runs(drop_seq):
    oracle = OracleBackend(drop_seq.gt, seed=0)
    on = track(drop_seq.detections, PipelineConfig(sot=True), drop_seq.frames, oracle)
    off = track(drop_seq.detections, PipelineConfig(sot=False), drop_seq.frames, oracle)
    return on, off


def test_summary_is_consistent(runs):
    for res in runs:
        s = res.summary
        assert s["after_sot"] == s["after_nms"] + s["sot_added"]
        assert s["mot_input"] == s["after_nms"] + s["sot_added"] - s["post_sot_suppressed"]
        assert s["output_boxes"] == sum(len(t) for t in res.trajectories)
        assert s["trajectories"] == len(res.trajectories)


def test_sot_disabled_input_is_nms_filtered_detections(drop_seq, runs):
    _, off = runs
    kept = nms_by_frame([d for d in drop_seq.detections if d.score > 0.3], "iom", 0.6)
    assert off.mot_input == kept
    assert off.sot_added == []


def test_sot_improves_and_ids_are_dense(drop_seq, runs):
    on, off = runs
    r_on, r_off = evaluate(drop_seq.gt, on.trajectories), evaluate(drop_seq.gt, off.trajectories)
    assert r_on.fn < r_off.fn and r_on.mota > r_off.mota
    assert [t.id for t in on.trajectories] == list(range(1, len(on.trajectories) + 1))


def test_mixed_backends(single_object_seq):
    seq = single_object_seq
    res = track(seq.detections, PipelineConfig(sot=True), seq.frames, OracleBackend(seq.gt, seed=0), NCCBackend())
    assert len(res.sot_added) > 0
    assert len(res.trajectories) == 1 and res.trajectories[0].frames == list(range(1, 11))


def test_track_is_deterministic(drop_seq):
    oracle = OracleBackend(drop_seq.gt, seed=0)
    a = track(drop_seq.detections, PipelineConfig(), drop_seq.frames, oracle)
    b = track(drop_seq.detections, PipelineConfig(), drop_seq.frames, oracle)
    assert [t.detections for t in a.trajectories] == [t.detections for t in b.trajectories]
