import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sotmot.core import BoundingBox, Detection, Trajectory
from sotmot.metrics import MalformedInput, evaluate, parse_keyvalue_report

from conftest import det


def three_frame_fixture():
    """One object over three frames; the hypothesis changes id at frame 2 and vanishes at frame 3."""
    gt = [Trajectory(1, [det(f, 10, 10, 20, 40) for f in (1, 2, 3)])]
    hyp = [Trajectory(7, [det(1, 10, 10, 20, 40)]), Trajectory(8, [det(2, 11, 10, 20, 40)])]
    return gt, hyp


def test_three_frame_fixture():
    gt, hyp = three_frame_fixture()
    r = evaluate(gt, hyp)
    assert (r.fn, r.idsw, r.frag, r.fp) == (1, 1, 1, 0)
    assert r.mota == pytest.approx(1 - 2 / 3)
    assert r.frames[1].switches == [1]


def test_self_evaluation(drop_seq):
    r = evaluate(drop_seq.gt, drop_seq.gt)
    assert (r.mota, r.motp, r.fp, r.fn, r.idsw, r.frag) == (1.0, 1.0, 0, 0, 0, 0)
    assert r.mt == len(drop_seq.gt) and r.ml == 0


def test_mota_substitution():
    box = (0, 0, 10, 10)
    gt = [Trajectory(1, [det(f, *box) for f in range(1, 101)])]
    hyp = [
        Trajectory(1, [det(f, *box) for f in range(1, 51)]),
        Trajectory(2, [det(f, *box) for f in range(51, 91)]),
        Trajectory(3, [det(f, 500, 500, 10, 10) for f in range(1, 6)]),
    ]
    r = evaluate(gt, hyp)
    assert (r.gt_total, r.fn, r.fp, r.idsw) == (100, 10, 5, 1)
    assert r.mota == pytest.approx(0.84)


def test_correspondence_persists_over_better_match():
    gt = [Trajectory(1, [det(1, 0, 0, 10, 10), det(2, 0, 0, 10, 10)])]
    hyp = [
        Trajectory(1, [det(1, 0, 0, 10, 10), det(2, 2, 0, 10, 10)]),
        Trajectory(2, [det(2, 0, 0, 10, 10)]),
    ]
    r = evaluate(gt, hyp)
    assert r.idsw == 0 and r.fp == 1
    assert r.frames[1].matches == {1: 1}


def test_mt_ml():
    gt = [Trajectory(1, [det(f, 0, 0, 10, 10) for f in range(1, 11)]), Trajectory(2, [det(f, 50, 0, 10, 10) for f in range(1, 11)])]
    hyp = [Trajectory(1, [det(f, 0, 0, 10, 10) for f in range(1, 9)]), Trajectory(2, [det(f, 50, 0, 10, 10) for f in range(1, 3)])]
    r = evaluate(gt, hyp)
    assert (r.mt, r.ml) == (1, 1)


def test_duplicate_rows_rejected():
    bad = [Trajectory(1, [det(1, 0, 0, 5, 5)]), Trajectory(1, [det(1, 3, 3, 5, 5)])]
    with pytest.raises(MalformedInput):
        evaluate(bad, [])


def test_ignore_regions_drop_hypotheses():
    gt = [Trajectory(1, [det(1, 0, 0, 10, 10)])]
    hyp = [Trajectory(1, [det(1, 0, 0, 10, 10)]), Trajectory(2, [det(1, 100, 100, 10, 10)])]
    assert evaluate(gt, hyp).fp == 1
    assert evaluate(gt, hyp, ignore=[(1, BoundingBox(95, 95, 30, 30))]).fp == 0


def test_keyvalue_round_trip(drop_seq):
    r = evaluate(drop_seq.gt, drop_seq.gt[:3])
    parsed = parse_keyvalue_report(r.to_keyvalue())
    assert parsed["MOTA"] == r.mota and parsed["FN"] == r.fn and parsed["ID Sw."] == r.idsw
    assert "MOTA" in r.to_table("seq")


@settings(max_examples=40, deadline=None)
@given(st.permutations(list(range(1, 7))), st.integers(0, 5))
def test_relabeling_invariance(drop_seq, perm, cut):
    hyp = [Trajectory(t.id, t.detections[cut:]) for t in drop_seq.gt if len(t.detections) > cut]
    relabeled = [Trajectory(perm[t.id - 1] + 100, t.detections) for t in hyp]
    assert evaluate(drop_seq.gt, hyp).as_dict() == evaluate(drop_seq.gt, relabeled).as_dict()


def test_noise_injection_lowers_mota(drop_seq):
    base = evaluate(drop_seq.gt, drop_seq.gt)
    noise = Trajectory(999, [det(f, 0, 0, 2, 2) for f in range(1, 4)])
    assert evaluate(drop_seq.gt, drop_seq.gt + [noise]).mota < base.mota


@pytest.mark.parametrize("matched", [True, False])
def test_removing_one_detection(matched):
    gt = [Trajectory(1, [det(f, 0, 0, 10, 10) for f in (1, 2, 3)])]
    hyp_dets = [det(f, 0, 0, 10, 10) for f in (1, 2, 3)]
    extra = Trajectory(2, [det(2, 200, 200, 10, 10)])
    full = evaluate(gt, [Trajectory(1, hyp_dets), extra])
    if matched:
        reduced = evaluate(gt, [Trajectory(1, [hyp_dets[0], hyp_dets[2]]), extra])
        assert (reduced.fn, reduced.fp) == (full.fn + 1, full.fp)
    else:
        reduced = evaluate(gt, [Trajectory(1, hyp_dets)])
        assert (reduced.fn, reduced.fp) == (full.fn, full.fp - 1)
