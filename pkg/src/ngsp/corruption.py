"""Artificial region splitting (2X / 4X corruption) by farthest-face clustering."""

from __future__ import annotations

import numpy as np

from .errors import CorruptionError
from .seeding import as_rng, derive_rng
from .shapes import LabelAssignment, Region, Shape

LEVELS = (1, 2, 4)


def farthest_face_clusters(centroids, first):
    """Boolean mask of faces in the first cluster.

    ``first`` is the random start face. The first seed face is the one
    farthest from it, the second seed the one farthest from the first seed.
    Every face joins the nearer seed, ties going to the first seed.
    """
    c = np.asarray(centroids, dtype=np.float64)
    f1 = int(np.argmax(np.linalg.norm(c - c[first], axis=1)))
    f2 = int(np.argmax(np.linalg.norm(c - c[f1], axis=1)))
    d1 = np.linalg.norm(c - c[f1], axis=1)
    d2 = np.linalg.norm(c - c[f2], axis=1)
    return d1 <= d2, f1, f2


def split_region(r, seed, first_face=None):
    """Split a region in two by clustering its face centroids.

    ``seed`` (int or numpy Generator) draws the start face unless
    ``first_face`` pins it. Returns two regions with provisional id
    ``r.id``; areas are ``r.area`` times each cluster's share of face area.
    """
    if r.faces is None:
        raise CorruptionError(f"region {r.id} has no face data")
    faces = r.faces
    m = len(faces)
    if m < 2:
        raise CorruptionError(f"region {r.id} has a single face and cannot be split")
    if first_face is None:
        first_face = int(as_rng(seed).integers(m))
    in_first, f1, f2 = farthest_face_clusters(faces[:, :3], first_face)
    if np.array_equal(faces[f1, :3], faces[f2, :3]):
        # every centroid coincides: fall back to an index split
        in_first = np.arange(m) < (m + 1) // 2

    # points follow their nearest face centroid
    diff = r.points[:, None, :] - faces[None, :, :3]
    nearest = np.argmin((diff ** 2).sum(axis=2), axis=1)
    point_first = in_first[nearest]
    if point_first.all() or not point_first.any():
        # a cluster caught no points: hand it the point closest to its seed face
        seed_face = f2 if point_first.all() else f1
        j = int(np.argmin(((r.points - faces[seed_face, :3]) ** 2).sum(axis=1)))
        point_first = point_first.copy()
        point_first[j] = not point_first[j]

    total = faces[:, 3].sum()
    out = []
    for mask_f, mask_p in ((in_first, point_first), (~in_first, ~point_first)):
        share = faces[mask_f, 3].sum() / total
        out.append(Region(r.id, r.points[mask_p], r.area * share, faces[mask_f]))
    return tuple(out)


def _split_pass(shape, labels, provenance, seed, pass_no):
    regions, new_labels, new_prov = [], [], []
    for r, label, parent in zip(shape.regions, labels, provenance):
        if r.faces is None:
            raise CorruptionError(f"shape {shape.id}: region {r.id} has no face data")
        if len(r.faces) < 2:
            parts = (r,)
        else:
            parts = split_region(r, derive_rng(seed, shape.id, r.id, pass_no))
        for p in parts:
            regions.append(Region(len(regions), p.points, p.area, p.faces))
            new_labels.append(label)
            new_prov.append(parent)
    return Shape.from_raw(shape.id, regions), new_labels, new_prov


def corrupt_shape(shape, labels=None, level=2, seed=0):
    """Split every multi-face region once (level 2) or twice (level 4).

    Returns ``(shape, labels, provenance)`` where ``provenance[i]`` is the
    original region id of new region ``i``; ``labels`` is None when none was
    given.
    """
    if level not in LEVELS:
        raise CorruptionError(f"corruption level must be one of {LEVELS}, got {level}")
    provenance = list(range(len(shape)))
    lab = list(labels.labels) if labels is not None else [None] * len(shape)
    if level == 1:
        return shape, labels, provenance
    passes = 1 if level == 2 else 2
    for k in range(passes):
        shape, lab, provenance = _split_pass(shape, lab, provenance, seed, k)
    return shape, (LabelAssignment(tuple(lab)) if labels is not None else None), provenance


def corrupt_dataset(shapes, level=2, seed=0):
    """Corrupt a sequence of ``LabeledShape`` (or bare ``Shape``) items.

    Returns a list of ``(item, provenance)`` pairs of the same kind.
    """
    from .negatives import LabeledShape

    out = []
    for item in shapes:
        if isinstance(item, LabeledShape):
            s, a, prov = corrupt_shape(item.shape, item.labels, level, seed)
            out.append((LabeledShape(s, a), prov))
        else:
            s, _, prov = corrupt_shape(item, None, level, seed)
            out.append((s, prov))
    return out


def format_provenance(provenance):
    return "".join(f"{child} {parent}\n" for child, parent in enumerate(provenance))


def realized_multiplier(before, after):
    return len(after) / len(before)
