"""Independent reference implementations used only by the tests."""

import itertools
import math
from fractions import Fraction

import numpy as np


def enumerate_assignments(log_rows):
    """Every assignment with its correctly rounded log guide probability.

    The score is the exactly rounded sum of the given per-region logs (sum
    of Fractions, rounded once); ties by signature.
    """
    n, t = len(log_rows), len(log_rows[0])
    out = []
    for sig in itertools.product(range(t), repeat=n):
        total = float(sum(Fraction(float(log_rows[i][j])) for i, j in enumerate(sig)))
        out.append((total, sig))
    out.sort(key=lambda e: (-e[0], e[1]))
    return out


def point_miou(g, items, labels=None):
    """Per-point IoU by explicit set operations over point indices."""
    labels = labels or g.labels
    inter = {l: 0 for l in labels}
    union = {l: 0 for l in labels}
    offset = 0
    for shape, truth, pred in items:
        t_sets = {l: set() for l in labels}
        p_sets = {l: set() for l in labels}
        for r, t, p in zip(shape.regions, truth.labels, pred.labels):
            ids = range(offset, offset + r.num_points)
            offset += r.num_points
            for l in labels:
                if l in g.path_to_root(t):
                    t_sets[l].update(ids)
                if l in g.path_to_root(p):
                    p_sets[l].update(ids)
        for l in labels:
            inter[l] += len(t_sets[l] & p_sets[l])
            union[l] += len(t_sets[l] | p_sets[l])
    ious = [Fraction(inter[l], union[l]) for l in labels if union[l]]
    return 100 * sum(ious) / len(ious)


def weighted_point_features(shape, regions):
    """Base features straight from the points, each point weighted area/count."""
    P = np.vstack([shape.regions[i].points for i in regions])
    w = np.concatenate([np.full(shape.regions[i].num_points,
                                shape.regions[i].area / shape.regions[i].num_points) for i in regions])
    wn = w / w.sum()
    c = wn @ P
    cov = ((P - c) * wn[:, None]).T @ (P - c)
    means = np.array([shape.regions[i].points.mean(axis=0) for i in regions])
    m = len(regions)
    pair = [np.linalg.norm(means[a] - means[b]) for a in range(m) for b in range(m) if a != b]
    return np.concatenate([c, P.max(0) - P.min(0), np.linalg.eigvalsh(cov)[::-1],
                           [w.sum(), m, (sum(pair) / len(pair)) if pair else 0.0]])


def geo_mean_log(values):
    return math.fsum(math.log(v) for v in values) / len(values)
