import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ngsp.corruption import (corrupt_dataset, corrupt_shape, farthest_face_clusters,
                             format_provenance, realized_multiplier, split_region)
from ngsp.errors import CorruptionError
from ngsp.evaluation import miou
from ngsp.shapes import LabelAssignment, Region, Shape, format_shape
from ngsp.synth import generate_dataset, grammar_for

from conftest import make_shape


def line_region(xs, rid=0):
    faces = np.array([[x, 0.0, 0.0, 1.0] for x in xs])
    pts = np.array([[x + dx, 0.0, 0.0] for x in xs for dx in (-0.1, 0.1)])
    return Region(rid, pts, float(len(xs)), faces)


def test_collinear_faces_seeded_trace():
    # seed 1 draws start face 1; farthest from x=1 is x=3, farthest from x=3 is x=0
    assert int(np.random.default_rng(1).integers(4)) == 1
    in_first, f1, f2 = farthest_face_clusters(line_region([0, 1, 2, 3]).faces[:, :3], 1)
    assert (f1, f2) == (3, 0)
    assert in_first.tolist() == [False, False, True, True]
    a, b = split_region(line_region([0, 1, 2, 3]), 1)
    assert a.faces[:, 0].tolist() == [2, 3]
    assert b.faces[:, 0].tolist() == [0, 1]
    assert split_region(line_region([0, 1, 2, 3]), None, first_face=1)[0].faces[:, 0].tolist() == [2, 3]


def test_two_faces_give_singletons():
    a, b = split_region(line_region([0, 5]), 0)
    assert len(a.faces) == 1 and len(b.faces) == 1
    assert {a.faces[0, 0], b.faces[0, 0]} == {0.0, 5.0}


def test_equidistant_face_joins_first_seed():
    # faces at -1, 0, 1: start at 0 picks f1 = -1 (first maximum), f2 = 1; 0 is a tie
    in_first, f1, f2 = farthest_face_clusters(np.array([[-1.0, 0, 0], [0, 0, 0], [1, 0, 0]]), 1)
    assert (f1, f2) == (0, 2)
    assert in_first.tolist() == [True, True, False]


def test_split_errors():
    with pytest.raises(CorruptionError):
        split_region(line_region([0]), 0)
    with pytest.raises(CorruptionError):
        split_region(Region(0, np.zeros((2, 3)), 1.0), 0)


def test_split_keeps_points_and_area():
    r = line_region([0, 1, 2, 3, 7])
    a, b = split_region(r, 3)
    assert a.num_points > 0 and b.num_points > 0
    both = np.vstack([a.points, b.points])
    assert sorted(map(tuple, both)) == sorted(map(tuple, r.points))
    assert a.area + b.area == pytest.approx(r.area)


def test_cluster_without_points_gets_nearest():
    # all points sit next to face 0; the other cluster still receives one
    faces = np.array([[0.0, 0, 0, 1], [1.0, 0, 0, 1], [5.0, 0, 0, 1]])
    pts = np.array([[0.0, 0, 0], [0.1, 0, 0], [0.2, 0, 0]])
    a, b = split_region(Region(0, pts, 3.0, faces), None, first_face=0)
    assert a.num_points >= 1 and b.num_points >= 1
    assert a.num_points + b.num_points == 3


def test_level_one_is_identity():
    s = make_shape([1, 2, 3], faces=True)
    out, labels, prov = corrupt_shape(s, LabelAssignment(("a", "b", "c")), level=1, seed=5)
    assert format_shape(out) == format_shape(s)
    assert labels.labels == ("a", "b", "c")
    assert prov == [0, 1, 2]


def test_five_multi_face_plus_one_single_face():
    s = make_shape([1, 1, 1, 1, 1, 1], faces=True)
    regs = list(s.regions)
    r5 = regs[5]
    regs[5] = Region(5, r5.points, r5.area, r5.faces[:1])
    s = Shape.from_raw("s", regs)
    out, _, prov = corrupt_shape(s, level=2, seed=0)
    assert len(out) == 11
    assert prov.count(5) == 1


def test_level_four_quadruples():
    s = make_shape([1, 2, 3], points_per_region=8, faces=True)
    out, labels, prov = corrupt_shape(s, LabelAssignment(("a", "b", "c")), level=4, seed=2)
    assert len(out) == 12
    assert realized_multiplier(s, out) == 4.0
    assert [prov.count(i) for i in range(3)] == [4, 4, 4]
    assert all(labels[i] == "abc"[prov[i]] for i in range(12))


def test_bad_level_and_missing_faces():
    s = make_shape([1, 1], faces=True)
    with pytest.raises(CorruptionError):
        corrupt_shape(s, level=3)
    with pytest.raises(CorruptionError):
        corrupt_shape(make_shape([1, 1]), level=2)


def test_provenance_format():
    assert format_provenance([0, 0, 1]) == "0 0\n1 0\n2 1\n"


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2, 4]))
def test_benchmark_corruption_invariants(seed, level):
    g = grammar_for("toychair")
    item = generate_dataset("toychair", 1, seed=seed)[0]
    (out, prov), = corrupt_dataset([item], level, seed)
    s = item.shape
    assert len(out.shape) == level * len(s)
    for i in range(len(s)):
        kids = [j for j, p in enumerate(prov) if p == i]
        pts = np.vstack([out.shape.regions[j].points for j in kids])
        assert sorted(map(tuple, pts)) == sorted(map(tuple, s.regions[i].points))
        assert sum(out.shape.regions[j].area for j in kids) == pytest.approx(s.regions[i].area, abs=1e-12)
        assert {out.labels[j] for j in kids} == {item.labels[i]}
    assert miou(g, [(out.shape, out.labels, out.labels)]).mean == 100.0
    # deterministic given the seed
    again, prov2 = corrupt_dataset([item], level, seed)[0]
    assert format_shape(again.shape) == format_shape(out.shape) and prov2 == prov
