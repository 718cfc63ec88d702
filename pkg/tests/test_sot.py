import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sotmot.appearance import EmbeddingBackend, FeatureCache, NCCBackend, OracleBackend, affinity
from sotmot.core import BoundingBox, Detection, Source, iou
from sotmot.sot import IncompatibleBackend, SotParams, candidate_boxes, next_detection, run_sot, sample_candidates

from conftest import det


def test_params_validation():
    with pytest.raises(ValueError):
        SotParams(decay=1.0)
    with pytest.raises(ValueError):
        SotParams(max_len=0)
    with pytest.raises(ValueError):
        SotParams(tau=1.5)


def test_candidate_zero_is_prior_and_count():
    prior = BoundingBox(10, 20, 30, 60)
    cands = sample_candidates(prior, 4, SotParams(), np.random.default_rng(0))
    assert len(cands) == 257
    assert cands[0].box == prior
    assert all(c.frame == 4 and c.source is Source.SOT for c in cands)


def test_degenerate_sampling_returns_prior():
    prior = BoundingBox(1, 2, 3, 4)
    boxes = candidate_boxes(prior, SotParams(n_candidates=5, sigma_pos_frac=0.0, sigma_scale=0.0), np.random.default_rng(0))
    np.testing.assert_array_equal(boxes, np.tile(prior.as_tuple(), (6, 1)))


def test_sampling_is_deterministic_per_seed():
    prior = BoundingBox(0, 0, 20, 40)
    a = candidate_boxes(prior, SotParams(), np.random.default_rng(9))
    b = candidate_boxes(prior, SotParams(), np.random.default_rng(9))
    c = candidate_boxes(prior, SotParams(), np.random.default_rng(10))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_sampling_spread_matches_parameters():
    prior = BoundingBox(100, 100, 20, 60)
    boxes = candidate_boxes(prior, SotParams(n_candidates=10000), np.random.default_rng(1))[1:]
    cx = boxes[:, 0] + boxes[:, 2] / 2
    cy = boxes[:, 1] + boxes[:, 3] / 2
    assert np.std(cx) == pytest.approx(4.0, rel=0.05)
    assert np.std(cy) == pytest.approx(12.0, rel=0.05)
    assert np.std(np.log(boxes[:, 2] / 20)) == pytest.approx(0.05, rel=0.05)
    assert np.allclose(boxes[:, 2] / boxes[:, 3], 20 / 60)


def test_next_follows_the_object(single_object_seq):
    seq = single_object_seq
    oracle = OracleBackend(seq.gt, seed=0)
    gt = seq.gt[0]
    anchor = oracle.features(None, 1, [gt.at(1).box])[0]
    rng = np.random.default_rng(0)
    found = next_detection(gt.at(1).box, anchor, 2, oracle, seq.frames, SotParams(), rng)
    assert found is not None and found.source is Source.SOT and found.frame == 2
    assert iou(found.box, gt.at(2).box) >= 0.7
    assert found.score > 0.5


def test_next_with_ncc_follows_the_object(single_object_seq):
    seq = single_object_seq
    backend = NCCBackend()
    gt = seq.gt[0]
    anchor = backend.features(seq.frames, 1, [gt.at(1).box])[0]
    found = next_detection(gt.at(1).box, anchor, 2, backend, seq.frames, SotParams(), np.random.default_rng(0))
    assert found is not None and iou(found.box, gt.at(2).box) >= 0.7


def test_next_returns_none_when_nothing_matches(single_object_seq):
    seq = single_object_seq
    oracle = OracleBackend(seq.gt, seed=0)
    empty_corner = BoundingBox(150, 150, 30, 30)
    anchor = oracle.features(None, 1, [seq.gt[0].at(1).box])[0]
    assert next_detection(empty_corner, anchor, 2, oracle, seq.frames, SotParams(), np.random.default_rng(0)) is None


def test_next_zero_noise_returns_prior_exactly(single_object_seq):
    seq = single_object_seq
    backend = NCCBackend()
    box = seq.gt[0].at(3).box
    anchor = backend.features(seq.frames, 3, [box])[0]
    params = SotParams(n_candidates=4, sigma_pos_frac=0.0, sigma_scale=0.0)
    found = next_detection(box, anchor, 3, backend, seq.frames, params, np.random.default_rng(0))
    assert found.box == box
    assert found.score == pytest.approx(1.0)


def test_embedding_backend_is_rejected():
    backend = EmbeddingBackend({})
    with pytest.raises(IncompatibleBackend):
        run_sot([det(1, 0, 0, 5, 5)], backend, None)
    with pytest.raises(IncompatibleBackend):
        next_detection(BoundingBox(0, 0, 5, 5), np.ones(2), 2, backend, None, SotParams(), np.random.default_rng(0))


@pytest.fixture(scope="module")
def filled(single_object_seq):
    seq = single_object_seq
    oracle = OracleBackend(seq.gt, seed=0)
    assert [d.frame for d in seq.detections] == [1, 10]
    return seq, run_sot(seq.detections, oracle, seq.frames, SotParams(), frame_range=(1, 10))


def test_run_sot_fills_the_gap(filled):
    seq, res = filled
    gt = seq.gt[0]
    assert len(res.tracklets) == 1
    t = res.tracklets[0]
    assert t.frames == list(range(1, 11))
    for d in t.detections:
        assert iou(d.box, gt.at(d.frame).box) >= 0.5
    assert res.n_merges == 1
    assert len(res.added) == 8


def test_run_sot_keeps_inputs_first(filled):
    seq, res = filled
    assert res.detections[: len(seq.detections)] == seq.detections
    assert res.detections[len(seq.detections):] == res.added


def test_run_sot_anchor_and_depth_bookkeeping(filled):
    seq, res = filled
    n_in = len(seq.detections)
    f = OracleBackend(seq.gt, seed=0)
    cache = FeatureCache(f, seq.frames)
    for idx, a in res.anchors.items():
        assert a < n_in
        assert affinity(cache[res.detections[a]], cache[res.detections[idx]]) >= SotParams().tau_app
        assert 1 <= res.depth[idx] < SotParams().max_len


def test_popped_scores_never_increase(filled):
    _, res = filled
    s = res.popped_scores
    assert all(a >= b - 1e-15 for a, b in zip(s, s[1:]))


def test_max_len_caps_extension(single_object_seq):
    seq = single_object_seq
    oracle = OracleBackend(seq.gt, seed=0)
    res = run_sot(seq.detections[:1], oracle, seq.frames, SotParams(max_len=4), frame_range=(1, 10))
    assert [d.frame for d in res.tracklets[0].detections] == [1, 2, 3, 4]


def test_dense_detections_gain_nothing(two_object_seq):
    seq = two_object_seq
    oracle = OracleBackend(seq.gt, seed=0)
    res = run_sot(seq.detections, oracle, seq.frames, SotParams())
    assert res.added == []
    assert len(res.tracklets) == 2
    assert res.n_next_calls == 0


def test_isolated_false_positive_halts(single_object_seq):
    seq = single_object_seq
    oracle = OracleBackend(seq.gt, seed=0)
    fp = det(5, 150, 10, 30, 30, 0.9)
    res = run_sot([fp], oracle, seq.frames, SotParams(), frame_range=(1, 10))
    assert res.added == []


def test_run_sot_is_deterministic(single_object_seq):
    seq = single_object_seq
    backend = NCCBackend()
    a = run_sot(seq.detections, backend, seq.frames, SotParams(rng_seed=5), frame_range=(1, 10))
    b = run_sot(seq.detections, backend, seq.frames, SotParams(rng_seed=5), frame_range=(1, 10))
    assert a.detections == b.detections


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(1, 10), min_size=1, max_size=4, unique=True), st.integers(0, 3))
def test_run_sot_output_is_superset_with_valid_tracklets(single_object_seq, keep_frames, seed):
    seq = single_object_seq
    gt = seq.gt[0]
    oracle = OracleBackend(seq.gt, seed=seed)
    dets = [Detection(f, gt.at(f).box, 0.9) for f in sorted(keep_frames)]
    res = run_sot(dets, oracle, seq.frames, SotParams(rng_seed=seed), frame_range=(1, 10))
    assert res.detections[: len(dets)] == dets
    members = sorted((d for t in res.tracklets for d in t.detections), key=id)
    assert len(members) == len(res.detections)
    for t in res.tracklets:
        assert t.frames == sorted(set(t.frames))
    assert all(1 <= d.frame <= 10 for d in res.added)
