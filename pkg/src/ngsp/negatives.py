"""Positive and negative training examples for the geometry and layout scorers.

An example is a set of regions claimed to form one instance of a label, plus
(for layout scorers) the child label of each region under that label. Negatives
are produced by six strategies mixed at fixed rates per scorer kind, and any
candidate whose region area is more than 95% unchanged relative to the
positive is discarded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NoNegativeFound
from .seeding import as_rng
from .shapes import LabelAssignment, lifted_groups

STRATEGIES = (
    "perturb",
    "add_regions",
    "remove_regions",
    "other_parts",
    "other_shape",
    "child_labels",
)

GEOM_MIXTURE = dict(zip(STRATEGIES, (0.50, 0.15, 0.15, 0.15, 0.05, 0.00)))
LAYOUT_MIXTURE = dict(zip(STRATEGIES, (0.50, 0.075, 0.075, 0.075, 0.025, 0.25)))

# (bucket name, number of assignments, label changes as int count or fraction)
SCHEDULE = (
    ("1", 100, 1),
    ("2", 200, 2),
    ("3", 300, 3),
    ("4", 400, 4),
    ("5", 500, 5),
    ("10%", 500, 0.1),
    ("20%", 1000, 0.2),
    ("30%", 1500, 0.3),
    ("40%", 2000, 0.4),
    ("50%", 2500, 0.5),
    ("all", 999, None),
)
SCHEDULE_TOTAL = sum(n for _, n, _ in SCHEDULE)


@dataclass(frozen=True)
class LabeledShape:
    shape: object
    labels: LabelAssignment

    @property
    def id(self):
        return self.shape.id


@dataclass(frozen=True)
class NegativeSpec:
    kind: str = "geom"
    mixture: dict = field(default=None)
    similarity_threshold: float = 0.95
    proximity_base: float = 2.0
    max_attempts: int = 50

    def __post_init__(self):
        if self.kind not in ("geom", "layout"):
            raise ValueError(f"negative kind must be geom or layout, not {self.kind!r}")
        mixture = self.mixture
        if mixture is None:
            mixture = GEOM_MIXTURE if self.kind == "geom" else LAYOUT_MIXTURE
        mixture = {s: float(mixture.get(s, 0.0)) for s in STRATEGIES}
        if abs(math.fsum(mixture.values()) - 1.0) > 1e-9:
            raise ValueError("negative strategy mixture must sum to 1")
        if self.kind == "geom" and mixture["child_labels"] != 0:
            raise ValueError("child_labels negatives are only valid for layout scorers")
        object.__setattr__(self, "mixture", mixture)


@dataclass(frozen=True)
class Example:
    shape_id: str
    label: str
    kind: str
    strategy: str  # "positive" for positives
    regions: tuple
    tags: tuple = ()


def _tags_for(g, label, labels, regions):
    if g.is_terminal(label):
        return ()
    return tuple(g.child_on_path(label, labels[i]) for i in regions)


def extract_positives(g, dataset, label):
    """One example per shape whose ground truth occupies ``label``."""
    g.path_to_root(label)
    out = []
    for item in dataset:
        groups = lifted_groups(g, item.labels)
        if label in groups:
            regions = groups[label]
            out.append(Example(item.id, label, "positive", "positive", regions,
                               _tags_for(g, label, item.labels.labels, regions)))
    return out


# -- perturbations ----------------------------------------------------------------

def bucket_changes(n_regions, changes):
    """Number of regions a schedule bucket changes for an ``n_regions`` shape."""
    if changes is None:
        return n_regions
    if isinstance(changes, float):
        # round half up, at least one change
        return min(n_regions, max(1, math.floor(changes * n_regions + 0.5)))
    return min(n_regions, changes)


def proximity_weights(g, proximity_base=2.0):
    """Row-stochastic replacement weights between terminals (self excluded)."""
    terms = g.terminals
    w = np.array([[0.0 if a == b else proximity_base ** -g.tree_distance(a, b) for b in terms]
                  for a in terms])
    sums = w.sum(axis=1, keepdims=True)
    sums[sums == 0] = 1.0
    return w / sums


def perturb_once(g, labels, n_changes, rng, weights=None):
    terms = g.terminals
    if len(terms) < 2:
        raise DataError("perturbation needs at least two terminal labels")
    if weights is None:
        weights = proximity_weights(g)
    idx = g.terminal_index
    out = list(labels.labels)
    for i in rng.choice(len(out), size=n_changes, replace=False):
        row = weights[idx[out[i]]]
        out[i] = terms[rng.choice(len(terms), p=row)]
    return LabelAssignment(tuple(out))


def perturbation_schedule(g, labels, seed, proximity_base=2.0):
    """The 9999 perturbed copies of ``labels``, bucket by bucket."""
    n = len(labels)
    if n == 0:
        raise DataError("cannot perturb a shape with no regions")
    rng = as_rng(seed)
    weights = proximity_weights(g, proximity_base)
    out = []
    for _, count, changes in SCHEDULE:
        c = bucket_changes(n, changes)
        out.extend(perturb_once(g, labels, c, rng, weights) for _ in range(count))
    return out


def sample_perturbation(g, labels, rng, weights=None):
    """One draw from the schedule's distribution without materialising it."""
    p = np.array([count for _, count, _ in SCHEDULE], dtype=float) / SCHEDULE_TOTAL
    _, _, changes = SCHEDULE[rng.choice(len(SCHEDULE), p=p)]
    return perturb_once(g, labels, bucket_changes(len(labels), changes), rng, weights)


# -- negatives ----------------------------------------------------------------------

def group_unchanged_fraction(shape, pos, neg, kind):
    """Area share of the involved regions whose status is the same in both examples.

    The involved regions are the union of both region sets. A region is
    unchanged when it belongs to both sets and, for layout examples, carries the
    same child tag. Examples drawn from different shapes share nothing.
    """
    if pos.shape_id != neg.shape_id:
        return 0.0
    area = [r.area for r in shape.regions]
    ptag = dict(zip(pos.regions, pos.tags)) if kind == "layout" else {r: None for r in pos.regions}
    ntag = dict(zip(neg.regions, neg.tags)) if kind == "layout" else {r: None for r in neg.regions}
    union = set(ptag) | set(ntag)
    same = [r for r in union if r in ptag and r in ntag and ptag[r] == ntag[r]]
    return math.fsum(area[r] for r in same) / math.fsum(area[r] for r in union)


class NegativeSampler:
    """Draws negatives for (shape, label) pairs of one dataset."""

    def __init__(self, g, dataset, spec):
        self.g = g
        self.spec = spec
        self.dataset = list(dataset)
        self.by_id = {item.id: item for item in self.dataset}
        self.groups = {item.id: lifted_groups(g, item.labels) for item in self.dataset}
        self.weights = proximity_weights(g, spec.proximity_base)

    def positive(self, shape_id, label):
        item = self.by_id[shape_id]
        groups = self.groups[shape_id]
        if label not in groups:
            raise DataError(f"label {label!r} does not occur in shape {shape_id}")
        if self.spec.kind == "layout" and self.g.is_terminal(label):
            raise DataError(f"terminal {label!r} has no layout scorer")
        regions = groups[label]
        tags = _tags_for(self.g, label, item.labels.labels, regions) if self.spec.kind == "layout" else ()
        return Example(shape_id, label, self.spec.kind, "positive", regions, tags)

    def _random_tags(self, label, n, rng):
        if self.spec.kind != "layout":
            return ()
        children = self.g.children[label]
        return tuple(children[j] for j in rng.integers(len(children), size=n))

    def _others(self, label):
        return [item for item in self.dataset if label not in self.groups[item.id]]

    def feasible(self, strategy, pos):
        g, label = self.g, pos.label
        n = len(self.by_id[pos.shape_id].shape)
        outside = n - len(pos.regions)
        if strategy == "perturb":
            return len(g.terminals) > 1
        if strategy in ("add_regions", "other_parts"):
            return outside > 0
        if strategy == "remove_regions":
            return len(pos.regions) > 1
        if strategy == "other_shape":
            return bool(self._others(label))
        if strategy == "child_labels":
            return self.spec.kind == "layout" and len(g.children.get(label, ())) > 1
        raise ValueError(strategy)

    def propose(self, strategy, pos, rng):
        """One candidate negative, before similarity filtering (None if void)."""
        g, label, kind = self.g, pos.label, self.spec.kind
        item = self.by_id[pos.shape_id]
        n = len(item.shape)
        members = set(pos.regions)
        tag_of = dict(zip(pos.regions, pos.tags))

        def build(shape_id, regions, tags):
            order = sorted(range(len(regions)), key=lambda i: regions[i])
            regions = tuple(int(regions[i]) for i in order)
            tags = tuple(tags[i] for i in order) if kind == "layout" else ()
            return Example(shape_id, label, kind, strategy, regions, tags)

        if strategy == "perturb":
            pert = sample_perturbation(g, item.labels, rng, self.weights)
            regions = [i for i, t in enumerate(pert.labels) if label in g.path_to_root(t)]
            if not regions:
                return None
            tags = _tags_for(g, label, pert.labels, regions) if kind == "layout" else ()
            return build(pos.shape_id, regions, tags)
        if strategy in ("add_regions", "other_parts"):
            outside = [i for i in range(n) if i not in members]
            if not outside:
                return None
            count = int(rng.integers(1, len(outside) + 1))
            chosen = [int(i) for i in rng.choice(outside, size=count, replace=False)]
            new_tags = self._random_tags(label, count, rng)
            if strategy == "other_parts":
                return build(pos.shape_id, chosen, new_tags)
            regions = list(pos.regions) + chosen
            tags = list(pos.tags) + list(new_tags) if kind == "layout" else ()
            return build(pos.shape_id, regions, tags)
        if strategy == "remove_regions":
            # removing every region would leave an empty group; at most |group|-1
            count = int(rng.integers(1, len(pos.regions))) if len(pos.regions) > 1 else 0
            dropped = set(rng.choice(pos.regions, size=count, replace=False).tolist()) if count else set()
            regions = [r for r in pos.regions if r not in dropped]
            return build(pos.shape_id, regions, [tag_of.get(r) for r in regions])
        if strategy == "other_shape":
            others = self._others(label)
            if not others:
                return None
            other = others[int(rng.integers(len(others)))]
            m = len(other.shape)
            count = int(rng.integers(1, m + 1))
            chosen = [int(i) for i in rng.choice(m, size=count, replace=False)]
            return build(other.id, chosen, self._random_tags(label, count, rng))
        if strategy == "child_labels":
            if kind != "layout":
                raise DataError("child_labels negatives are only valid for layout scorers")
            children = g.children[label]
            tags = list(pos.tags)
            flipped = False
            for j, tag in enumerate(tags):
                if rng.random() < 0.5:
                    tags[j] = self._flip(children, tag, rng)
                    flipped = True
            if not flipped:
                j = int(rng.integers(len(tags)))
                tags[j] = self._flip(children, tags[j], rng)
            return build(pos.shape_id, list(pos.regions), tags)
        raise ValueError(f"unknown strategy {strategy!r}")

    @staticmethod
    def _flip(children, tag, rng):
        options = [c for c in children if c != tag]
        return options[int(rng.integers(len(options)))]

    def too_similar(self, pos, candidate):
        shape = self.by_id[pos.shape_id].shape
        frac = group_unchanged_fraction(shape, pos, candidate, self.spec.kind)
        return frac > self.spec.similarity_threshold

    def sample(self, shape_id, label, seed):
        """Draw one negative for the positive of ``label`` in ``shape_id``.

        The strategy is drawn from the mixture restricted to strategies that can
        apply to this positive; candidates failing the similarity filter are
        redrawn with the same strategy up to ``max_attempts`` times.
        """
        rng = as_rng(seed)
        pos = self.positive(shape_id, label)
        names = [s for s in STRATEGIES if self.spec.mixture[s] > 0 and self.feasible(s, pos)]
        if not names:
            raise NoNegativeFound(f"no negative strategy applies to {label!r} in {shape_id}")
        p = np.array([self.spec.mixture[s] for s in names])
        strategy = names[int(rng.choice(len(names), p=p / p.sum()))]
        for _ in range(self.spec.max_attempts):
            cand = self.propose(strategy, pos, rng)
            if cand is None or self.too_similar(pos, cand):
                continue
            return cand
        raise NoNegativeFound(
            f"no {strategy} negative for {label!r} in {shape_id} "
            f"within {self.spec.max_attempts} attempts")


def sample_negative(spec, kind, g, dataset, shape, label, seed):
    """Functional wrapper around :class:`NegativeSampler` for a single draw."""
    if spec.kind != kind:
        spec = NegativeSpec(kind, None, spec.similarity_threshold,
                            spec.proximity_base, spec.max_attempts)
    shape_id = shape if isinstance(shape, str) else shape.id
    return NegativeSampler(g, dataset, spec).sample(shape_id, label, seed)


def format_examples(examples):
    lines = []
    for ex in examples:
        tags = ",".join(ex.tags) if ex.tags else "-"
        regions = ",".join(str(r) for r in ex.regions)
        lines.append(f"{ex.shape_id}\t{ex.label}\t{ex.kind}\t{ex.strategy}\t{regions}\t{tags}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_examples(text):
    out = []
    for ln in text.splitlines():
        if not ln.strip():
            continue
        parts = ln.split("\t")
        if len(parts) != 6:
            raise DataError(f"malformed negatives line {ln!r}")
        shape_id, label, kind, strategy, regions, tags = parts
        out.append(Example(shape_id, label, kind, strategy,
                           tuple(int(r) for r in regions.split(",")),
                           () if tags == "-" else tuple(tags.split(","))))
    return out
