import numpy as np
import pytest

from sotmot.core import BoundingBox, Detection, Trajectory
from sotmot.motio import (
    DuplicateEntry,
    Kind,
    MotParseError,
    canonicalize,
    parse_mot_file,
    read_detections,
    read_embeddings,
    read_trajectories,
    write_detections,
    write_embeddings,
    write_trajectories,
)


def test_parse_detection_row(tmp_path):
    p = tmp_path / "det.txt"
    p.write_text("1,-1,10.00,20.00,30.00,60.00,0.90,-1,-1,-1\n")
    (d,) = read_detections(p)
    assert d == Detection(1, BoundingBox(10, 20, 30, 60), 0.9)


def test_round_trip_is_byte_identical(tmp_path):
    src = tmp_path / "res.txt"
    src.write_text("2,1,1.50,2.00,3.00,4.00,0.50,-1,-1,-1\n1,2,0.00,0.00,5.00,5.00,1.00,-1,-1,-1\n1,1,7.25,1.00,2.00,2.00,0.75,-1,-1,-1\n")
    canon = tmp_path / "canon.txt"
    canonicalize(src, canon, Kind.RESULTS)
    again = tmp_path / "again.txt"
    write_trajectories(again, read_trajectories(canon))
    assert again.read_bytes() == canon.read_bytes()
    assert canon.read_text().splitlines()[0].startswith("1,1,7.25")


def test_detection_round_trip(tmp_path):
    dets = [Detection(1, BoundingBox(1.234, 5, 6, 7), 0.5), Detection(3, BoundingBox(1, 2, 3, 4), 0.25)]
    p = tmp_path / "d.txt"
    write_detections(p, dets)
    q = tmp_path / "e.txt"
    write_detections(q, read_detections(p))
    assert p.read_bytes() == q.read_bytes()
    assert p.read_text().splitlines()[0] == "1,-1,1.23,5.00,6.00,7.00,0.50,-1,-1,-1"


def test_zero_width_rejected_with_line_number(tmp_path):
    p = tmp_path / "det.txt"
    p.write_text("1,-1,1,1,5,5,0.9\n2,-1,1,1,0,5,0.9\n")
    with pytest.raises(MotParseError) as exc:
        read_detections(p)
    assert exc.value.line == 2
    assert ":2:" in str(exc.value)


@pytest.mark.parametrize("row", ["1,-1,a,1,5,5", "1,-1,1,1", "0,1,1,1,5,5,1", "1,-1,nan,1,5,5,1"])
def test_malformed_rows(tmp_path, row):
    p = tmp_path / "x.txt"
    p.write_text(row + "\n")
    with pytest.raises(MotParseError):
        parse_mot_file(p, Kind.DETECTIONS)


def test_duplicate_frame_id_rejected(tmp_path):
    p = tmp_path / "gt.txt"
    p.write_text("1,1,0,0,5,5,1\n1,1,3,3,5,5,1\n")
    with pytest.raises(DuplicateEntry):
        read_trajectories(p, Kind.GROUND_TRUTH)


def test_results_sorted_by_frame_then_id(tmp_path):
    t1 = Trajectory(2, [Detection(1, BoundingBox(0, 0, 1, 1), 1.0)])
    t2 = Trajectory(1, [Detection(1, BoundingBox(0, 0, 1, 1), 1.0), Detection(2, BoundingBox(0, 0, 1, 1), 1.0)])
    p = tmp_path / "r.txt"
    write_trajectories(p, [t1, t2])
    assert [tuple(l.split(",")[:2]) for l in p.read_text().splitlines()] == [("1", "1"), ("1", "2"), ("2", "1")]
    assert p.read_text().splitlines()[0].endswith(",-1,-1,-1")


def test_embedding_round_trip_normalises(tmp_path):
    d = Detection(4, BoundingBox(1.005, 2.0, 3.0, 4.0), 1.0)
    p = tmp_path / "emb.txt"
    write_embeddings(p, [(d, np.array([3.0, 4.0]))])
    table = read_embeddings(p)
    (vec,) = table.values()
    np.testing.assert_allclose(vec, [0.6, 0.8])
    assert p.read_text().startswith("4,1.005,2.0,3.0,4.0,2,3.0,4.0")


def test_embedding_dim_mismatch(tmp_path):
    p = tmp_path / "emb.txt"
    p.write_text("1,0,0,5,5,3,1.0,2.0\n")
    with pytest.raises(MotParseError):
        read_embeddings(p)
