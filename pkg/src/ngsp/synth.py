"""Seeded synthetic shape datasets built from labelled cuboids.

Every shape is an assembly of axis-aligned boxes ("parts"), each carrying a
terminal label. Parts are cut into 1-3 regions by axis-aligned planes; each
region is a closed box whose surface is tiled with grid-cell faces and sampled
with 64-256 points. Region areas are box surface areas, so face areas always
add up to the region area.

The parameter table below is versioned; ``ngsp synth --describe`` prints it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .grammar import parse_grammar
from .negatives import LabeledShape
from .seeding import derive_rng
from .shapes import LabelAssignment, Region, Shape

TABLE_VERSION = "toychair-1"

TOYCHAIR_GRAMMAR = """\
# toy chair grammar bundled with the synthetic generator
root: chair
chair -> back ; base ; seat
back -> back_frame ; back_surface
base -> leg ; stretcher
"""

GRAMMARS = {"toychair": TOYCHAIR_GRAMMAR}

# Uniform ranges (lo, hi) unless noted. Lengths in scene units, z is up.
TOYCHAIR_TABLE = {
    "version": TABLE_VERSION,
    "seat_width": (0.40, 0.60),
    "seat_depth": (0.38, 0.55),
    "seat_height": (0.36, 0.52),
    "seat_thickness": (0.03, 0.07),
    "leg_section": (0.03, 0.06),
    "leg_inset": (0.0, 0.03),
    "stretcher_count_probs": (0.3, 0.35, 0.35),  # 0, 1 (front bar), 2 (side bars)
    "stretcher_height": (0.08, 0.22),
    "stretcher_section_scale": (0.6, 0.9),
    "back_height": (0.35, 0.60),
    "post_section_scale": (0.8, 1.2),
    "top_rail_prob": 0.6,
    "top_rail_height": (0.04, 0.08),
    "panel_prob": 0.85,
    "panel_gap": (0.04, 0.12),
    "panel_thickness": (0.015, 0.03),
    "pieces_probs": (0.4, 0.35, 0.25),  # parts cut into 1, 2, 3 regions
    "cut_fraction": (0.25, 0.75),
    "points_per_region": (64, 256),
    "face_cell": 0.05,
    "regions_per_shape": (5, 24),
}


@dataclass(frozen=True)
class Part:
    label: str
    lo: tuple
    hi: tuple


def describe(grammar="toychair"):
    if grammar not in GRAMMARS:
        raise DataError(f"unknown synthetic grammar {grammar!r}")
    return json.dumps(TOYCHAIR_TABLE, indent=2)


def _u(rng, key):
    lo, hi = TOYCHAIR_TABLE[key]
    return float(rng.uniform(lo, hi))


def _box(label, x0, x1, y0, y1, z0, z1):
    return Part(label, (x0, y0, z0), (x1, y1, z1))


def toychair_parts(rng):
    W, D = _u(rng, "seat_width"), _u(rng, "seat_depth")
    H, T = _u(rng, "seat_height"), _u(rng, "seat_thickness")
    c = _u(rng, "leg_section")
    inset = _u(rng, "leg_inset")
    parts = [_box("seat", -W / 2, W / 2, -D / 2, D / 2, H, H + T)]

    lx = W / 2 - inset - c
    ly = D / 2 - inset - c
    for sx in (-1, 1):
        for sy in (-1, 1):
            x0 = lx if sx > 0 else -lx - c
            y0 = ly if sy > 0 else -ly - c
            parts.append(_box("leg", x0, x0 + c, y0, y0 + c, 0.0, H))

    n_str = int(rng.choice(3, p=TOYCHAIR_TABLE["stretcher_count_probs"]))
    if n_str:
        zs = _u(rng, "stretcher_height")
        cs = c * _u(rng, "stretcher_section_scale")
        if n_str == 1:
            y0 = -ly - c + (c - cs) / 2
            parts.append(_box("stretcher", -lx, lx, y0, y0 + cs, zs, zs + cs))
        else:
            for sx in (-1, 1):
                x0 = (lx if sx > 0 else -lx - c) + (c - cs) / 2
                parts.append(_box("stretcher", x0, x0 + cs, -ly, ly, zs, zs + cs))

    hb = _u(rng, "back_height")
    cp = c * _u(rng, "post_section_scale")
    z0 = H + T
    top = z0 + hb
    yb0 = D / 2 - cp
    for sx in (-1, 1):
        x0 = W / 2 - cp if sx > 0 else -W / 2
        parts.append(_box("back_frame", x0, x0 + cp, yb0, D / 2, z0, top))
    panel_top = top
    if rng.random() < TOYCHAIR_TABLE["top_rail_prob"]:
        rh = _u(rng, "top_rail_height")
        parts.append(_box("back_frame", -W / 2 + cp, W / 2 - cp, yb0, D / 2, top - rh, top))
        panel_top = top - rh
    else:
        panel_top = top - float(rng.uniform(0.0, 0.05))
    if rng.random() < TOYCHAIR_TABLE["panel_prob"]:
        gap = _u(rng, "panel_gap")
        pt = _u(rng, "panel_thickness")
        yc = D / 2 - cp / 2
        parts.append(_box("back_surface", -W / 2 + cp, W / 2 - cp, yc - pt / 2, yc + pt / 2,
                          z0 + gap, panel_top))
    return parts


def _cut(part, pieces, rng):
    """Split a box into ``pieces`` boxes with planes across one axis."""
    if pieces == 1:
        return [part]
    lo, hi = np.array(part.lo), np.array(part.hi)
    dims = hi - lo
    # mostly across the longest axis, sometimes across the second longest
    order = np.argsort(-dims)
    axis = int(order[0] if rng.random() < 0.75 else order[1])
    if pieces == 2:
        fr = [float(rng.uniform(*TOYCHAIR_TABLE["cut_fraction"]))]
    else:
        # two cuts at least 0.15 apart so no sliver regions appear
        a, b = sorted(rng.uniform(0.15, 0.85, size=2).tolist())
        fr = [a, b] if b - a >= 0.15 else [a * 0.5, 0.5 + b * 0.5]
    cuts = [lo[axis]] + [lo[axis] + f * dims[axis] for f in fr] + [hi[axis]]
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        plo, phi = lo.copy(), hi.copy()
        plo[axis], phi[axis] = a, b
        out.append(Part(part.label, tuple(plo), tuple(phi)))
    return out


def box_faces(lo, hi, cell):
    """Grid-cell faces tiling a box surface: rows of (cx, cy, cz, area)."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    faces = []
    for axis in range(3):
        u, v = [a for a in range(3) if a != axis]
        nu = max(2, math.ceil((hi[u] - lo[u]) / cell))
        nv = max(2, math.ceil((hi[v] - lo[v]) / cell))
        du, dv = (hi[u] - lo[u]) / nu, (hi[v] - lo[v]) / nv
        for side in (lo[axis], hi[axis]):
            for i in range(nu):
                for j in range(nv):
                    c = np.empty(3)
                    c[axis] = side
                    c[u] = lo[u] + (i + 0.5) * du
                    c[v] = lo[v] + (j + 0.5) * dv
                    faces.append((c[0], c[1], c[2], du * dv))
    return np.array(faces)


def sample_box_surface(lo, hi, n, rng):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    d = hi - lo
    areas = np.array([d[1] * d[2], d[0] * d[2], d[0] * d[1]] * 2)
    side = rng.choice(6, size=n, p=areas / areas.sum())
    pts = lo + rng.random((n, 3)) * d
    axis = side % 3
    pts[np.arange(n), axis] = np.where(side < 3, lo[axis], hi[axis])
    return pts


def _piece_counts(n_parts, rng):
    lo, hi = TOYCHAIR_TABLE["regions_per_shape"]
    counts = 1 + rng.choice(3, size=n_parts, p=TOYCHAIR_TABLE["pieces_probs"])
    while counts.sum() > hi:
        j = int(rng.choice(np.flatnonzero(counts > 1)))
        counts[j] -= 1
    while counts.sum() < lo:
        j = int(rng.choice(np.flatnonzero(counts < 3)))
        counts[j] += 1
    return counts


def generate_shape(shape_id, rng):
    parts = toychair_parts(rng)
    counts = _piece_counts(len(parts), rng)
    pieces = []
    for part, n in zip(parts, counts):
        pieces.extend(_cut(part, int(n), rng))
    order = rng.permutation(len(pieces))
    pieces = [pieces[i] for i in order]
    cell = TOYCHAIR_TABLE["face_cell"]
    pmin, pmax = TOYCHAIR_TABLE["points_per_region"]
    regions, labels = [], []
    for rid, piece in enumerate(pieces):
        faces = box_faces(piece.lo, piece.hi, cell)
        npts = int(rng.integers(pmin, pmax + 1))
        pts = sample_box_surface(piece.lo, piece.hi, npts, rng)
        regions.append(Region(rid, pts, float(faces[:, 3].sum()), faces))
        labels.append(piece.label)
    shape = Shape.from_raw(shape_id, regions)
    return LabeledShape(shape, LabelAssignment(tuple(labels))), pieces


def generate_dataset(grammar="toychair", count=1, seed=0, prefix=None):
    """``count`` labelled shapes; shape i depends only on (seed, i)."""
    if grammar not in GRAMMARS:
        raise DataError(f"unknown synthetic grammar {grammar!r}")
    if count < 1:
        raise DataError("count must be >= 1")
    prefix = prefix or grammar
    out = []
    for i in range(count):
        rng = derive_rng(TABLE_VERSION, seed, i)
        item, _ = generate_shape(f"{prefix}_{i:05d}", rng)
        out.append(item)
    return out


def generate_with_parts(grammar="toychair", count=1, seed=0, prefix=None):
    """Like :func:`generate_dataset` but also returns each region's box."""
    if grammar not in GRAMMARS:
        raise DataError(f"unknown synthetic grammar {grammar!r}")
    prefix = prefix or grammar
    out = []
    for i in range(count):
        rng = derive_rng(TABLE_VERSION, seed, i)
        out.append(generate_shape(f"{prefix}_{i:05d}", rng))
    return out


def grammar_for(name="toychair"):
    if name not in GRAMMARS:
        raise DataError(f"unknown synthetic grammar {name!r}")
    return parse_grammar(GRAMMARS[name])
