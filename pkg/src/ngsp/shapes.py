"""Region-decomposed shapes and terminal label assignments.

Region file (``.regs``)::

    shape <id>
    num_regions <n>
    region <id> <num_points> <raw_area>
    x y z                      (num_points lines)
    faces <m>                  (optional)
    cx cy cz farea             (m lines)
    ...

Assignment file (``.labels``): one ``<region_id> <terminal_label>`` per line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AssignmentError, RegionCountMismatch, ShapeFormatError, UnknownLabel

AREA_TOLERANCE = 1e-6
SMALL_REGION_THRESHOLD = 0.001


def _frozen(arr):
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Region:
    id: int
    points: np.ndarray
    area: float
    faces: Optional[np.ndarray] = None  # (m, 4): centroid xyz + face area

    def __post_init__(self):
        pts = _frozen(self.points).reshape(-1, 3)
        if len(pts) == 0:
            raise ShapeFormatError(f"region {self.id} has zero points")
        if not self.area > 0:
            raise ShapeFormatError(f"region {self.id} has non-positive area {self.area}")
        object.__setattr__(self, "points", pts)
        if self.faces is not None:
            object.__setattr__(self, "faces", _frozen(self.faces).reshape(-1, 4))

    @property
    def num_points(self):
        return len(self.points)


@dataclass(frozen=True, eq=False)
class Shape:
    id: str
    regions: tuple

    def __post_init__(self):
        regions = tuple(self.regions)
        if not regions:
            raise ShapeFormatError(f"shape {self.id} has no regions")
        for i, r in enumerate(regions):
            if r.id != i:
                raise ShapeFormatError(f"shape {self.id}: region ids must be 0..n-1 in order")
        total = math.fsum(r.area for r in regions)
        if abs(total - 1.0) > AREA_TOLERANCE:
            raise ShapeFormatError(f"shape {self.id}: areas sum to {total}, expected 1")
        object.__setattr__(self, "regions", regions)

    def __len__(self):
        return len(self.regions)

    @property
    def areas(self):
        return np.array([r.area for r in self.regions])

    @property
    def has_faces(self):
        return all(r.faces is not None for r in self.regions)

    @classmethod
    def from_raw(cls, id, regions):
        """Build a shape from regions carrying raw (unnormalised) areas."""
        total = math.fsum(r.area for r in regions)
        if abs(total - 1.0) <= 1e-15 * len(regions):
            # already normalised: keep the stored bits so files round-trip
            total = 1.0
        return cls(id, tuple(
            Region(r.id, r.points, r.area / total, r.faces) for r in regions))


@dataclass(frozen=True)
class LabelAssignment:
    """Terminal label per region; ``labels[i]`` is the label of region ``i``."""

    labels: tuple

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_mapping(cls, mapping):
        n = len(mapping)
        if sorted(mapping) != list(range(n)):
            raise AssignmentError("assignment must cover region ids 0..n-1")
        return cls(tuple(mapping[i] for i in range(n)))

    def __getitem__(self, i):
        return self.labels[i]

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def as_dict(self):
        return dict(enumerate(self.labels))

    def validate(self, g, s=None):
        if s is not None and len(self.labels) != len(s):
            raise AssignmentError(
                f"assignment has {len(self.labels)} regions, shape has {len(s)}")
        terminals = g.terminal_index
        for i, label in enumerate(self.labels):
            if label not in terminals:
                raise AssignmentError(f"region {i}: {label!r} is not a terminal label")
        return self


# -- file formats -----------------------------------------------------------

def _floats(line, n, where):
    parts = line.split()
    if len(parts) != n:
        raise ShapeFormatError(f"{where}: expected {n} numbers, got {line!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ShapeFormatError(f"{where}: malformed number in {line!r}") from None


def parse_shape(text):
    """Parse a region file; areas are renormalised to sum to one."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ShapeFormatError("malformed header")
    head = lines[0].split(maxsplit=1)
    if len(head) != 2 or head[0] != "shape":
        raise ShapeFormatError("malformed header: expected 'shape <id>'")
    shape_id = head[1].strip()
    head = lines[1].split()
    if len(head) != 2 or head[0] != "num_regions":
        raise ShapeFormatError("malformed header: expected 'num_regions <n>'")
    try:
        n = int(head[1])
    except ValueError:
        raise ShapeFormatError("malformed header: bad region count") from None

    blocks = {}
    pos = 2
    while pos < len(lines):
        parts = lines[pos].split()
        if len(parts) != 4 or parts[0] != "region":
            raise ShapeFormatError(f"expected region header, got {lines[pos]!r}")
        try:
            rid, npts, raw_area = int(parts[1]), int(parts[2]), float(parts[3])
        except ValueError:
            raise ShapeFormatError(f"malformed region header {lines[pos]!r}") from None
        if rid in blocks:
            raise ShapeFormatError(f"duplicate region id {rid}")
        if npts <= 0:
            raise ShapeFormatError(f"region {rid} has zero points")
        if not raw_area > 0:
            raise ShapeFormatError(f"region {rid} has non-positive area")
        pos += 1
        if pos + npts > len(lines):
            raise ShapeFormatError(f"region {rid}: truncated point block")
        pts = [_floats(lines[pos + j], 3, f"region {rid}") for j in range(npts)]
        pos += npts
        faces = None
        if pos < len(lines) and lines[pos].split()[0] == "faces":
            fparts = lines[pos].split()
            try:
                m = int(fparts[1])
            except (IndexError, ValueError):
                raise ShapeFormatError(f"region {rid}: malformed faces header") from None
            pos += 1
            if pos + m > len(lines):
                raise ShapeFormatError(f"region {rid}: truncated face block")
            faces = [_floats(lines[pos + j], 4, f"region {rid} faces") for j in range(m)]
            pos += m
        blocks[rid] = (pts, raw_area, faces)

    if len(blocks) != n:
        raise RegionCountMismatch(
            f"RegionCountMismatch: header says {n} regions, found {len(blocks)}")
    if sorted(blocks) != list(range(n)):
        raise ShapeFormatError("region ids must be 0..n-1")
    regions = [
        Region(i, np.array(pts), area, None if faces is None else np.array(faces))
        for i, (pts, area, faces) in sorted(blocks.items())
    ]
    return Shape.from_raw(shape_id, regions)


def format_shape(s):
    out = [f"shape {s.id}", f"num_regions {len(s)}"]
    for r in s.regions:
        out.append(f"region {r.id} {r.num_points} {float(r.area)!r}")
        out.extend(" ".join(repr(v) for v in row) for row in r.points.tolist())
        if r.faces is not None:
            out.append(f"faces {len(r.faces)}")
            out.extend(" ".join(repr(v) for v in row) for row in r.faces.tolist())
    return "\n".join(out) + "\n"


def load_shape(path):
    with open(path, encoding="utf-8") as f:
        return parse_shape(f.read())


def save_shape(s, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_shape(s))


def parse_labels(text):
    mapping = {}
    for ln in text.splitlines():
        if not ln.strip() or ln.lstrip().startswith("#"):
            continue
        parts = ln.split()
        if len(parts) != 2:
            raise AssignmentError(f"malformed assignment line {ln!r}")
        try:
            rid = int(parts[0])
        except ValueError:
            raise AssignmentError(f"malformed region id in {ln!r}") from None
        if rid in mapping:
            raise AssignmentError(f"region {rid} labelled twice")
        mapping[rid] = parts[1]
    return LabelAssignment.from_mapping(mapping)


def format_labels(a):
    return "".join(f"{i} {label}\n" for i, label in enumerate(a.labels))


def load_labels(path):
    with open(path, encoding="utf-8") as f:
        return parse_labels(f.read())


def save_labels(a, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_labels(a))


# -- queries ------------------------------------------------------------------

def filter_small_regions(s, threshold=SMALL_REGION_THRESHOLD):
    """True when the shape is kept, i.e. no region area is below ``threshold``."""
    return all(r.area >= threshold for r in s.regions)


def _covers(s, a):
    if len(a) != len(s):
        raise AssignmentError(f"assignment has {len(a)} regions, shape has {len(s)}")


def region_group(g, s, a, label):
    """Regions whose terminal label has ``label`` on its root path."""
    g.path_to_root(label)  # raises UnknownLabel
    _covers(s, a)
    return {i for i, t in enumerate(a.labels) if label in g.path_to_root(t)}


def lifted_groups(g, a):
    """Map every occupied label to the sorted tuple of regions occupying it."""
    groups = {}
    for i, t in enumerate(a.labels):
        try:
            path = g._paths[t]
        except KeyError:
            raise UnknownLabel(t) from None
        for label in path:
            groups.setdefault(label, []).append(i)
    return {l: tuple(v) for l, v in groups.items()}


def occupied_labels(g, s, a):
    _covers(s, a)
    return set(lifted_groups(g, a))


def unchanged_area_fraction(s, a, b):
    _covers(s, a)
    _covers(s, b)
    return math.fsum(r.area for r, x, y in zip(s.regions, a.labels, b.labels) if x == y)
