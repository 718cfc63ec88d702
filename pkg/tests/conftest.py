import numpy as np
import pytest

from sotmot.core import BoundingBox, Detection, Source, Trajectory
from sotmot.synth import DetectorModel, ObjectSpec, ScenarioSpec, drop_scenario, generate


def det(frame, x, y, w, h, score=0.9, source=Source.DETECTOR):
    return Detection(frame, BoundingBox(x, y, w, h), score, source)


def traj(tid, boxes, start=1, score=0.9):
    return Trajectory(tid, [det(start + k, *b, score=score) for k, b in enumerate(boxes)])


@pytest.fixture(scope="session")
def drop_seq():
    return generate(drop_scenario(seed=0))


@pytest.fixture(scope="session")
def single_object_seq():
    """One object visible in frames 1..10, detected only at frames 1 and 10."""
    spec = ScenarioSpec(
        n_frames=10,
        width=200,
        height=200,
        objects=[ObjectSpec(1, 1, 10, (60.0, 40.0, 40.0, 100.0), (2.0, 0.5), texture_seed=11)],
        detector=DetectorModel(occlusions={1: [(2, 9)]}),
        seed=3,
    )
    return generate(spec)


@pytest.fixture(scope="session")
def two_object_seq():
    spec = ScenarioSpec(
        n_frames=10,
        width=320,
        height=200,
        objects=[
            ObjectSpec(1, 1, 10, (20.0, 40.0, 40.0, 100.0), (1.5, 0.0), texture_seed=5),
            ObjectSpec(2, 1, 10, (220.0, 50.0, 44.0, 110.0), (-1.0, 0.5), texture_seed=6),
        ],
        seed=4,
    )
    return generate(spec)
