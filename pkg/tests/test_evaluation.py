from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ngsp.errors import DataError, SplitError
from ngsp.evaluation import (ABLATIONS, ablation_configs, ablation_sweep, build_splits, miou,
                             split_sizes)
from ngsp.grammar import parse_grammar
from ngsp.guide import GuideDistribution
from ngsp.likelihood import LikelihoodConfig
from ngsp.negatives import LabeledShape
from ngsp.shapes import LabelAssignment, Region, Shape

from conftest import G1_TEXT, FnBank, assignment, make_shape
from oracles import point_miou

GXY = parse_grammar("root: r\nr -> x ; y")
G1 = parse_grammar(G1_TEXT)


def test_perfect_prediction(g1):
    s = make_shape([1, 2, 3])
    a = assignment("a1", "a2", "B")
    assert miou(g1, [(s, a, a)]).mean == 100.0


def test_two_region_fixture():
    s = make_shape([1, 1])
    rep = miou(GXY, [(s, assignment("x", "y"), assignment("x", "x"))])
    # x: 4 / 8 points, y: 0 / 4 points, r: 8 / 8
    assert rep.intersection == {"r": 8, "x": 4, "y": 0}
    assert rep.union == {"r": 8, "x": 8, "y": 4}
    s2 = make_shape([1, 1])
    rep2 = miou(GXY, [(s2, assignment("x", "y"), assignment("y", "x"))])
    assert rep2.iou == {"r": 1.0, "x": 0.0, "y": 0.0}
    # equal-count regions, one mislabelled with the other's terminal
    rep3 = miou(GXY, [(make_shape([1, 1, 1]), assignment("x", "y", "x"),
                       assignment("x", "x", "x"))])
    assert rep3.iou["x"] == pytest.approx(2 / 3)
    assert rep3.iou["y"] == 0.0


def test_one_third_fixture():
    # three labels on two regions: y mislabelled as z, x correct
    g = parse_grammar("root: r\nr -> x ; y ; z")
    s = make_shape([1, 1, 1])
    rep = miou(g, [(s, assignment("x", "y", "x"), assignment("y", "x", "x"))])
    assert rep.iou == {"r": 1.0, "x": pytest.approx(1 / 3), "y": 0.0}
    assert rep.mean == pytest.approx(100 * (1 + 1 / 3) / 3)
    assert "z" not in rep.iou


def test_zero_union_modes():
    g = parse_grammar("root: r\nr -> x ; y ; z")
    s = make_shape([1, 1])
    a = assignment("x", "y")
    assert miou(g, [(s, a, a)]).mean == 100.0
    assert miou(g, [(s, a, a)], zero_union="zero").mean == pytest.approx(75.0)
    with pytest.raises(ValueError):
        miou(g, [(s, a, a)], zero_union="nan")


def test_terminals_only_and_per_shape():
    s = make_shape([1, 1])
    items = [(s, assignment("x", "y"), assignment("x", "x")),
             (make_shape([1, 1], seed=1), assignment("x", "y"), assignment("x", "y"))]
    assert miou(GXY, items, terminals_only=True).mean == pytest.approx(100 * (2 / 3 + 1 / 2) / 2)
    first = 100 * (1 + 1 / 2 + 0) / 3
    assert miou(GXY, items, per_shape=True).mean == pytest.approx((first + 100) / 2)


def test_report_format():
    s = make_shape([1, 1])
    text = miou(GXY, [(s, assignment("x", "y"), assignment("x", "x"))]).format(GXY)
    lines = text.splitlines()
    assert lines[0] == "label\tintersection\tunion\tiou"
    assert lines[1] == "r\t8\t8\t1"
    assert lines[-1] == "mean_miou\t50"


def test_prediction_must_cover_shape():
    with pytest.raises(DataError):
        miou(GXY, [(make_shape([1, 1]), assignment("x", "y"), assignment("x"))])


def random_items(g, seed, n_shapes=4):
    rng = np.random.default_rng(seed)
    items = []
    for i in range(n_shapes):
        n = int(rng.integers(1, 8))
        regions = [Region(j, rng.random((int(rng.integers(1, 300)), 3)), 1.0) for j in range(n)]
        s = Shape.from_raw(f"s{i}", regions)
        t = LabelAssignment(tuple(rng.choice(g.terminals, size=n)))
        p = LabelAssignment(tuple(rng.choice(g.terminals, size=n)))
        items.append((s, t, p))
    return items


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_point_oracle(seed):
    items = random_items(G1, seed)
    assert miou(G1, items).mean == float(point_miou(G1, items))
    assert 0.0 <= miou(G1, items).mean <= 100.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_region_permutation_invariance(seed):
    items = random_items(G1, seed)
    rng = np.random.default_rng(seed)
    permuted = []
    for s, t, p in items:
        order = rng.permutation(len(s))
        regs = [Region(k, s.regions[j].points, s.regions[j].area) for k, j in enumerate(order)]
        permuted.append((Shape.from_raw(s.id, regs),
                         LabelAssignment(tuple(t.labels[j] for j in order)),
                         LabelAssignment(tuple(p.labels[j] for j in order))))
    assert miou(G1, permuted).mean == miou(G1, items).mean


def test_oracle_is_exact_fraction(g1):
    items = random_items(g1, 3)
    assert isinstance(point_miou(g1, items), Fraction)


# -- splits -------------------------------------------------------------------------

def labelled(i, labels):
    s = make_shape([1.0] * len(labels), points_per_region=1, shape_id=f"shape{i:05d}")
    return LabeledShape(s, LabelAssignment(tuple(labels)))


def test_split_sizes():
    assert split_sizes(150) == (50, 50, 50)
    assert split_sizes(2000) == (400, 400, 400)
    assert split_sizes(600) == (400, 100, 100)
    with pytest.raises(SplitError):
        split_sizes(149)


def test_min_bound_dataset(g1):
    data = [labelled(i, ["a1", "B"]) for i in range(150)]
    train, val, test = build_splits(g1, data)
    assert (len(train), len(val), len(test)) == (50, 50, 50)
    assert not set(train) & set(val) and not set(val) & set(test) and not set(train) & set(test)


def test_max_bound_dataset(g1):
    data = [labelled(i, ["a1"]) for i in range(2000)]
    sets = build_splits(g1, data)
    assert [len(s) for s in sets] == [400, 400, 400]
    assert len(set().union(*sets)) == 1200


def test_too_small_raises(g1):
    with pytest.raises(SplitError):
        build_splits(g1, [labelled(i, ["B"]) for i in range(20)])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(150, 400))
def test_frequent_terminals_reach_every_split(seed, n):
    rng = np.random.default_rng(seed)
    weights = rng.dirichlet(np.ones(3) * 0.3)
    data = []
    for i in range(n):
        k = int(rng.integers(1, 4))
        data.append(labelled(i, rng.choice(G1.terminals, size=k, p=weights)))
    sets = build_splits(G1, data, min_per_set=50)
    by_id = {d.id: set(d.labels.labels) for d in data}
    for t in G1.terminals:
        if sum(t in by_id[i] for i in by_id) >= 3:
            for s in sets:
                assert any(t in by_id[i] for i in s), t
    assert build_splits(G1, list(reversed(data)), min_per_set=50) == sets


# -- ablations ----------------------------------------------------------------------

def toy_guide(rng, n):
    rows = rng.dirichlet(np.ones(3), size=n)
    return GuideDistribution(("a1", "a2", "B"), rows)


def test_ablation_configs_cover_all():
    cfgs = ablation_configs(LikelihoodConfig(k=5))
    assert tuple(cfgs) == ABLATIONS
    assert not any([cfgs["no-L"].use_geom, cfgs["no-L"].use_layout, cfgs["no-L"].use_region])
    assert cfgs["no-guide"].uniform_guide


def test_no_l_is_guide_argmax_and_k1_full_matches(g1):
    rng = np.random.default_rng(0)
    test_set, guides = [], {}
    for i in range(6):
        n = int(rng.integers(2, 5))
        s = make_shape([1.0] * n, shape_id=f"t{i}", seed=i)
        truth = LabelAssignment(tuple(rng.choice(g1.terminals, size=n)))
        test_set.append(LabeledShape(s, truth))
        guides[s.id] = toy_guide(rng, n)
    bank = FnBank(lambda q: 0.9 if q.label in ("A", "a1") else 0.3)
    res = ablation_sweep(LikelihoodConfig(k=50), bank, g1, guides, test_set)
    assert set(res) == set(ABLATIONS)
    argmax = [(it.shape, it.labels, guides[it.id].argmax()) for it in test_set]
    assert res["no-L"] == miou(g1, argmax).mean
    k1 = ablation_sweep(LikelihoodConfig(k=1), bank, g1, guides, test_set, names=("full",))
    assert k1["full"] == res["no-L"]
