import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sotmot.core import BoundingBox, Detection, Source, Trajectory, iom, iou, nms

from conftest import det


boxes = st.builds(
    BoundingBox,
    st.floats(-50, 50, allow_nan=False),
    st.floats(-50, 50, allow_nan=False),
    st.floats(0.5, 60, allow_nan=False),
    st.floats(0.5, 60, allow_nan=False),
)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ((0, 0, 10, 10), (0, 0, 10, 10), 1.0),
        ((0, 0, 10, 10), (5, 0, 10, 10), 50 / 150),
        ((0, 0, 10, 10), (20, 20, 5, 5), 0.0),
    ],
)
def test_iou_examples(a, b, expected):
    assert iou(BoundingBox(*a), BoundingBox(*b)) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ((0, 0, 10, 10), (2, 2, 4, 4), 1.0),
        ((0, 0, 10, 10), (5, 0, 10, 10), 0.5),
        ((0, 0, 10, 10), (0, 0, 10, 10), 1.0),
    ],
)
def test_iom_examples(a, b, expected):
    assert iom(BoundingBox(*a), BoundingBox(*b)) == pytest.approx(expected, abs=1e-12)


def test_touching_edges_have_no_overlap():
    assert iou(BoundingBox(0, 0, 10, 10), BoundingBox(10, 0, 10, 10)) == 0.0


def test_identical_boxes_give_exactly_one():
    b = BoundingBox(0.1, 0.7, 0.2, 13.3)
    assert iou(b, b) == 1.0
    assert iom(b, b) == 1.0


@given(boxes, boxes)
def test_overlap_symmetric_bounded_and_ordered(a, b):
    assert iou(a, b) == iou(b, a)
    assert iom(a, b) == iom(b, a)
    assert 0.0 <= iou(a, b) <= iom(a, b) <= 1.0


def test_box_requires_positive_size():
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 0, 5)
    with pytest.raises(ValueError):
        BoundingBox(0, 0, 5, -1)


def test_detection_frames_are_one_indexed():
    with pytest.raises(ValueError):
        Detection(0, BoundingBox(0, 0, 1, 1), 0.5)


def test_trajectory_frames_strictly_increasing():
    Trajectory(1, [det(1, 0, 0, 5, 5), det(3, 0, 0, 5, 5)])
    with pytest.raises(ValueError):
        Trajectory(1, [det(2, 0, 0, 5, 5), det(2, 1, 0, 5, 5)])


def test_nms_examples():
    a = det(1, 0, 0, 10, 10, 0.9)
    b = det(1, 0, 0, 10, 10, 0.8)
    assert nms([b, a], "iom", 0.6) == [a]
    far = [det(1, 0, 0, 10, 10, 0.5), det(1, 50, 50, 10, 10, 0.7)]
    assert sorted(nms(far, "iom", 0.6), key=lambda d: d.score) == far
    assert nms([], "iou", 0.6) == []


def test_nms_iom_suppresses_contained_box_that_iou_keeps():
    outer = det(1, 0, 0, 20, 20, 0.9)
    inner = det(1, 5, 5, 6, 6, 0.5)
    assert iou(outer.box, inner.box) < 0.6
    assert nms([outer, inner], "iom", 0.6) == [outer]
    assert len(nms([outer, inner], "iou", 0.6)) == 2


def test_nms_equal_scores_prefer_earlier_input():
    a = det(1, 0, 0, 10, 10, 0.8)
    b = det(1, 1, 0, 10, 10, 0.8)
    assert nms([a, b], "iou", 0.5) == [a]
    assert nms([b, a], "iou", 0.5) == [b]


def test_nms_rejects_unknown_measure():
    with pytest.raises(ValueError):
        nms([], "giou", 0.5)


frame_dets = st.lists(
    st.builds(
        lambda x, y, w, h, s: det(1, x, y, w, h, s),
        st.floats(0, 100),
        st.floats(0, 100),
        st.floats(1, 40),
        st.floats(1, 40),
        st.floats(0, 1),
    ),
    max_size=12,
)


@settings(max_examples=150)
@given(frame_dets, st.sampled_from(["iou", "iom"]), st.floats(0.1, 0.9))
def test_nms_properties(dets, mode, thr):
    out = nms(dets, mode, thr)
    measure = iou if mode == "iou" else iom
    assert nms(out, mode, thr) == out
    assert all(any(d is o for d in dets) for o in out)
    for d in dets:
        if not any(d is o for o in out):
            assert any(measure(d.box, k.box) > thr for k in out)
    for k1, k2 in itertools.combinations(out, 2):
        assert measure(k1.box, k2.box) <= thr


@settings(max_examples=100)
@given(frame_dets, st.randoms(use_true_random=False))
def test_nms_permutation_stable_for_distinct_scores(dets, rnd):
    scores = [d.score for d in dets]
    if len(set(scores)) != len(scores):
        return
    shuffled = list(dets)
    rnd.shuffle(shuffled)
    key = lambda d: d.score
    assert sorted(nms(dets, "iou", 0.5), key=key) == sorted(nms(shuffled, "iou", 0.5), key=key)


def test_clip():
    assert BoundingBox(-5, -5, 10, 10).clip(100, 100) == BoundingBox(0, 0, 5, 5)
    assert BoundingBox(200, 0, 10, 10).clip(100, 100) is None
    b = BoundingBox(1, 1, 3, 3)
    assert b.clip(100, 100) is b
