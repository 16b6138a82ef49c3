import numpy as np
import pytest

from ngsp.grammar import parse_grammar
from ngsp.shapes import LabelAssignment, Region, Shape

G1_TEXT = "root: r\nr -> A ; B\nA -> a1 ; a2\n"


@pytest.fixture
def g1():
    return parse_grammar(G1_TEXT)


def make_shape(areas, points_per_region=4, shape_id="s", seed=0, faces=False):
    """Shape with given (raw) areas and random points; optional grid faces."""
    rng = np.random.default_rng(seed)
    regions = []
    for i, a in enumerate(areas):
        pts = rng.random((points_per_region, 3)) + i
        fc = None
        if faces:
            fc = np.column_stack([pts, np.full(len(pts), a / len(pts))])
        regions.append(Region(i, pts, a, fc))
    return Shape.from_raw(shape_id, regions)


@pytest.fixture
def s1():
    # three regions, four points each, equal areas
    return make_shape([1.0, 1.0, 1.0], shape_id="S1")


def assignment(*labels):
    return LabelAssignment(tuple(labels))


class FnBank:
    """Scorer bank answering every query through a Python function."""

    def __init__(self, fn):
        self.fn = fn
        self.log = []

    def score(self, shape, queries):
        self.log.extend(queries)
        return [self.fn(q) for q in queries]
