"""Fixed-length descriptors of region sets.

Union statistics are assembled from per-region sufficient statistics (point
mean, covariance, bounding box) so a group's features never touch its raw
points. Regions are weighted by area; points are uniform within a region.

Layout (per region set)::

    [0:3]   centroid
    [3:6]   bounding-box extents
    [6:9]   covariance eigenvalues, descending
    [9]     total area fraction
    [10]    region count
    [11]    mean pairwise distance between region centroids

The layout kind appends one area fraction per child of the label (production
order), zero-padded to the grammar's maximum fan-out, then for each child slot
the offset of that child's area-weighted centroid from the group centroid
(zeros for absent children).
"""

import numpy as np

BASE_DIM = 12
KINDS = ("geom", "layout", "group")


class RegionStats:
    """Per-region moments for one shape."""

    def __init__(self, shape):
        self.shape_id = shape.id
        self.area = np.array([r.area for r in shape.regions])
        self.mean = np.array([r.points.mean(axis=0) for r in shape.regions])
        self.lo = np.array([r.points.min(axis=0) for r in shape.regions])
        self.hi = np.array([r.points.max(axis=0) for r in shape.regions])
        covs = []
        for r in shape.regions:
            c = r.points - r.points.mean(axis=0)
            covs.append(c.T @ c / len(c))
        self.cov = np.array(covs)
        diff = self.mean[:, None, :] - self.mean[None, :, :]
        self.pair_dist = np.sqrt((diff ** 2).sum(axis=2))

    def __len__(self):
        return len(self.area)


def feature_dim(kind, g):
    return BASE_DIM + (4 * g.max_fanout if kind == "layout" else 0)


def _membership(n, region_sets):
    M = np.zeros((len(region_sets), n), dtype=bool)
    for q, regs in enumerate(region_sets):
        M[q, list(regs)] = True
    return M


def batch_base_features(stats, region_sets):
    """Base features for many region sets of one shape, one row per set."""
    n = len(stats)
    M = _membership(n, region_sets)
    W = M * stats.area
    total = W.sum(axis=1)
    wn = W / total[:, None]
    centroid = wn @ stats.mean
    big = np.inf
    lo = np.where(M[:, :, None], stats.lo[None], big).min(axis=1)
    hi = np.where(M[:, :, None], stats.hi[None], -big).max(axis=1)
    # pooled covariance: within-region plus between-region scatter
    outer = np.einsum("ni,nj->nij", stats.mean, stats.mean).reshape(n, 9)
    second = wn @ (stats.cov.reshape(n, 9) + outer)
    cov = second.reshape(-1, 3, 3) - np.einsum("qi,qj->qij", centroid, centroid)
    eig = np.linalg.eigvalsh(cov)[:, ::-1]
    count = M.sum(axis=1)
    Mf = M.astype(np.float64)
    pair_sum = ((Mf @ stats.pair_dist) * Mf).sum(axis=1)
    denom = np.maximum(count * (count - 1), 1)
    out = np.empty((len(region_sets), BASE_DIM))
    out[:, 0:3] = centroid
    out[:, 3:6] = hi - lo
    out[:, 6:9] = eig
    out[:, 9] = total
    out[:, 10] = count
    out[:, 11] = np.where(count > 1, pair_sum / denom, 0.0)
    return out


def base_features(stats, regions):
    return batch_base_features(stats, [regions])[0]


def batch_layout_features(g, stats, label, region_sets, tag_sets, base=None):
    """Layout rows: base features, child area histogram, child centroid offsets."""
    if base is None:
        base = batch_base_features(stats, region_sets)
    n, fan = len(stats), g.max_fanout
    slot = {c: i for i, c in enumerate(g.children.get(label, ()))}
    # area weight of each region under each child slot
    S = np.zeros((len(region_sets), fan, n))
    for q, (regs, tags) in enumerate(zip(region_sets, tag_sets)):
        for r, t in zip(regs, tags):
            S[q, slot[t], r] = stats.area[r]
    mass = S.sum(axis=2)
    total = mass.sum(axis=1)
    hist = mass / total[:, None]
    centroid = base[:, 0:3]
    safe = np.where(mass > 0, mass, 1.0)
    child_c = (S @ stats.mean) / safe[:, :, None]
    offsets = np.where((mass > 0)[:, :, None], child_c - centroid[:, None, :], 0.0)
    return np.hstack([base, hist, offsets.reshape(len(region_sets), 3 * fan)])


def child_histogram(g, stats, label, regions, tags):
    f = batch_layout_features(g, stats, label, [regions], [tags])[0]
    return f[BASE_DIM:BASE_DIM + g.max_fanout]


def child_offsets(g, stats, label, regions, tags):
    """Per child slot: its centroid minus the group centroid, flattened."""
    f = batch_layout_features(g, stats, label, [regions], [tags])[0]
    return f[BASE_DIM + g.max_fanout:]


def layout_features(g, stats, label, regions, tags, base=None):
    b = None if base is None else np.asarray(base)[None]
    return batch_layout_features(g, stats, label, [regions], [tags], b)[0]


def extract_features(kind, g, stats, regions, tags=None, label=None):
    """Feature vector for ``regions`` (a non-empty sequence of region ids).

    ``stats`` is a :class:`RegionStats` (a shape is accepted and converted).
    Layout features need the owning ``label`` and one child tag per region.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown feature kind {kind!r}")
    if not isinstance(stats, RegionStats):
        stats = RegionStats(stats)
    regions = list(regions)
    if not regions:
        raise ValueError("empty region set")
    base = base_features(stats, regions)
    if kind != "layout":
        return base
    if tags is None or len(tags) != len(regions):
        raise ValueError("layout features need one child tag per region")
    return layout_features(g, stats, label, regions, tags, base)
