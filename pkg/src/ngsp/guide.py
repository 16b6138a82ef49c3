"""Guide distributions and exact k-best enumeration of label assignments.

The guide assigns each region an independent categorical over the terminal
labels, so the probability of a full assignment is a product of per-region
factors. :func:`top_k_assignments` enumerates the ``k`` most probable
assignments exactly, best first.

Search works on per-region label *ranks*. Each region's labels are sorted by
descending log-probability (ties by terminal index) and the cost of demoting a
region from rank 0 to rank r is ``delta(r) = lp(0) - lp(r)``. Regions with
more than one label ("positions") are ordered by ``delta(1)``. A state is a
rank vector; its parent is obtained by undoing the change at its last non-zero
position, which makes the state space a tree in which every child costs at
least as much as its parent. Expanding that tree best-first with a heap yields
assignments in exact order with at most three pushes per pop and no visited
set. Within groups of positions whose ``delta(1)`` values are exactly equal the
position order is arranged so that equal-probability children always compare
lexicographically after their parent, which keeps the documented tie-break
exact.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import GuideError, SearchSpaceTooLarge
from .shapes import LabelAssignment

EPSILON = 1e-9
BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True, eq=False)
class GuideDistribution:
    terminal_order: tuple
    rows: np.ndarray
    epsilon: float = EPSILON

    def __post_init__(self):
        order = tuple(self.terminal_order)
        rows = np.array(self.rows, dtype=np.float64, copy=True)
        if rows.ndim != 2 or rows.shape[0] == 0 or rows.shape[1] == 0:
            raise GuideError("empty guide distribution")
        if rows.shape[1] != len(order):
            raise GuideError(f"rows have {rows.shape[1]} columns, expected {len(order)}")
        if not np.all(np.isfinite(rows)) or np.any(rows < 0):
            raise GuideError("guide probabilities must be finite and non-negative")
        # clamp, then renormalise; a row that already satisfies the floor and
        # sums to one is left untouched so reloading a written guide is exact
        low = rows < self.epsilon * (1 - 1e-6)
        rows[low] = self.epsilon
        sums = rows.sum(axis=1, keepdims=True)
        fix = low.any(axis=1, keepdims=True) | (np.abs(sums - 1.0) > 1e-12)
        rows = np.where(fix, rows / sums, rows)
        rows.setflags(write=False)
        logs = np.log(rows)
        logs.setflags(write=False)
        object.__setattr__(self, "terminal_order", order)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "log_rows", logs)
        object.__setattr__(self, "_index", {t: i for i, t in enumerate(order)})

    @property
    def num_regions(self):
        return self.rows.shape[0]

    def index(self, label):
        try:
            return self._index[label]
        except KeyError:
            raise GuideError(f"label {label!r} not in guide terminal order") from None

    def argmax(self):
        # np.argmax returns the first maximum, i.e. the lowest terminal index
        return LabelAssignment(tuple(self.terminal_order[j] for j in self.rows.argmax(axis=1)))

    @classmethod
    def uniform(cls, terminal_order, n_regions):
        t = len(terminal_order)
        return cls(tuple(terminal_order), np.full((n_regions, t), 1.0 / t))


@dataclass
class ScoredProposal:
    assignment: LabelAssignment
    log_q: float
    log_geom: float = 0.0
    log_layout: float = 0.0
    log_region: float = 0.0
    log_total: float = 0.0
    signature: tuple = ()


def log_guide_prob(d, a):
    if len(a) > d.num_regions:
        raise GuideError(f"guide covers {d.num_regions} regions, assignment has {len(a)}")
    return math.fsum(d.log_rows[i, d.index(label)] for i, label in enumerate(a.labels))


def _proposal(d, sig):
    order = d.terminal_order
    log_q = math.fsum(d.log_rows[i, j] for i, j in enumerate(sig))
    return ScoredProposal(LabelAssignment(tuple(order[j] for j in sig)), log_q, signature=sig)


def brute_force_assignments(d, limit=BRUTE_FORCE_LIMIT):
    """Every assignment, sorted by (-log_q, signature). Testing oracle."""
    n, t = d.rows.shape
    if t ** n > limit:
        raise SearchSpaceTooLarge(f"{t}^{n} assignments exceeds the limit of {limit}")
    logs = d.log_rows.tolist()
    scored = []
    for sig in itertools.product(range(t), repeat=n):
        scored.append((-math.fsum(logs[i][j] for i, j in enumerate(sig)), sig))
    scored.sort()
    return [_proposal(d, sig) for _, sig in scored]


def _position_order(ranked, logs):
    """Order demotable regions by exact delta(1), arranging exact ties."""
    keyed = []
    for region, labels in enumerate(ranked):
        if len(labels) < 2:
            continue
        first, second = labels[0], labels[1]
        delta = Fraction(logs[region][first]) - Fraction(logs[region][second])
        rising = second > first
        # falling positions precede rising ones; falling by ascending region id,
        # rising by descending id
        keyed.append((delta, rising, region if not rising else -region, region))
    keyed.sort()
    return [k[-1] for k in keyed]


def top_k_assignments(d, k):
    """The ``k`` most probable assignments under ``d``, best first.

    Ties in probability are broken by the lexicographic order of the per-region
    terminal indices.
    """
    if k < 1:
        raise GuideError("k must be >= 1")
    n, t = d.rows.shape
    logs = d.log_rows.tolist()
    ranked = [sorted(range(t), key=lambda j, row=row: (-row[j], j)) for row in logs]
    positions = _position_order(ranked, logs)
    npos = len(positions)
    # lp_by_rank[p][r]: log-prob of rank r label at position p
    lp_by_rank = [[logs[reg][j] for j in ranked[reg]] for reg in positions]
    ix_by_rank = [ranked[reg] for reg in positions]
    base = [ranked[reg][0] for reg in range(n)]
    fixed_lp = [logs[reg][base[reg]] for reg in range(n)]

    def entry(ranks, last):
        sig = base[:]
        terms = fixed_lp[:]
        for p, r in enumerate(ranks):
            if r:
                reg = positions[p]
                sig[reg] = ix_by_rank[p][r]
                terms[reg] = lp_by_rank[p][r]
        return (-math.fsum(terms), tuple(sig), last, ranks)

    def expand(last, ranks):
        nxt = last + 1
        if last >= 0 and ranks[last] + 1 < len(lp_by_rank[last]):
            child = list(ranks)
            child[last] += 1
            heapq.heappush(heap, entry(tuple(child), last))
        if nxt < npos:
            child = list(ranks)
            child[nxt] = 1
            heapq.heappush(heap, entry(tuple(child), nxt))
            if last >= 0 and ranks[last] == 1:
                child[last] = 0
                heapq.heappush(heap, entry(tuple(child), nxt))

    found = []
    heap = [entry((0,) * npos, -1)]
    while heap and len(found) < k:
        neg_lq, sig, last, ranks = heapq.heappop(heap)
        found.append((neg_lq, sig))
        expand(last, ranks)
    # Float keys never decrease along the tree, but two log sums that differ
    # only below rounding can surface out of signature order. Drain the tie
    # block at the boundary (bounded; exact ties are already ordered) and sort.
    extra = 0
    while heap and heap[0][0] == found[-1][0] and extra < k:
        neg_lq, sig, last, ranks = heapq.heappop(heap)
        found.append((neg_lq, sig))
        expand(last, ranks)
        extra += 1
    found.sort()
    order = d.terminal_order
    return [
        ScoredProposal(LabelAssignment(tuple(order[j] for j in sig)), -neg_lq, signature=sig)
        for neg_lq, sig in found[:k]
    ]


def stochastic_assignments(d, k, rng):
    """Draw up to ``k`` distinct assignments by repeated per-region sampling.

    Returned best first, like :func:`top_k_assignments`. Draws stop after
    ``50 * k`` attempts so tiny spaces terminate.
    """
    if k < 1:
        raise GuideError("k must be >= 1")
    n, t = d.rows.shape
    space = t ** n if n * math.log(t) < 60 else float("inf")
    target = min(k, space)
    cdf = np.cumsum(d.rows, axis=1)
    seen = set()
    found = [tuple(int(j) for j in d.rows.argmax(axis=1))]
    seen.add(found[0])
    attempts = 0
    while len(found) < target and attempts < 50 * k:
        batch = max(16, 2 * (target - len(found)))
        u = rng.random((batch, n, 1))
        draws = (u > cdf[None, :, :]).sum(axis=2)
        np.minimum(draws, t - 1, out=draws)
        for row in draws:
            sig = tuple(int(j) for j in row)
            attempts += 1
            if sig not in seen:
                seen.add(sig)
                found.append(sig)
                if len(found) >= target:
                    break
    props = [_proposal(d, sig) for sig in found]
    props.sort(key=lambda p: (-p.log_q, p.signature))
    return props


# -- file format ----------------------------------------------------------------

def parse_guide(text, epsilon=EPSILON):
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise GuideError("empty guide file")
    head = lines[0].split()
    if head[0] != "terminals" or len(head) < 2:
        raise GuideError("guide file must start with 'terminals <t1> ...'")
    order = tuple(head[1:])
    rows = {}
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] != "row" or len(parts) != len(order) + 2:
            raise GuideError(f"malformed guide row {ln!r}")
        try:
            rid = int(parts[1])
            vals = [float(v) for v in parts[2:]]
        except ValueError:
            raise GuideError(f"malformed guide row {ln!r}") from None
        if rid in rows:
            raise GuideError(f"duplicate guide row {rid}")
        rows[rid] = vals
    if sorted(rows) != list(range(len(rows))):
        raise GuideError("guide rows must cover region ids 0..n-1")
    return GuideDistribution(order, np.array([rows[i] for i in range(len(rows))]), epsilon)


def format_guide(d):
    out = ["terminals " + " ".join(d.terminal_order)]
    for i, row in enumerate(d.rows.tolist()):
        out.append(f"row {i} " + " ".join(f"{v:.17g}" for v in row))
    return "\n".join(out) + "\n"


def load_guide(path, epsilon=EPSILON):
    with open(path, encoding="utf-8") as f:
        return parse_guide(f.read(), epsilon)


def check_guide(d, g, s=None):
    if set(d.terminal_order) != set(g.terminals) or len(d.terminal_order) != len(g.terminals):
        raise GuideError("guide terminals do not match the grammar's terminal set")
    if s is not None and d.num_regions != len(s):
        raise GuideError(f"guide has {d.num_regions} rows, shape has {len(s)} regions")
    return d
