"""Scoring label assignments and selecting the best guide proposal.

The likelihood of an assignment is the product of three terms, each a
geometric mean so that assignments occupying many labels are not penalised for
having more factors:

* geometry: one factor per occupied non-root label, scored on the regions
  occupying that label;
* layout: one factor per occupied non-terminal label (root included), scored
  on the same regions tagged with the child label each one falls under;
* region groups: for every occupied terminal, the label-head probability that
  the group's majority label is that terminal times the area-head estimate of
  the share of its area that truly carries it.

Everything is evaluated in the log domain with scorer outputs floored at
``epsilon``. A scorer bank is any object with a
``score(shape, queries) -> sequence of floats`` method; queries are
:class:`Query` tuples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

from .errors import ScoreOutOfRange
from .guide import GuideDistribution, stochastic_assignments, top_k_assignments
from .seeding import as_rng

QUERY_KINDS = ("geom", "layout", "region_label", "region_area")


class Query(NamedTuple):
    kind: str
    label: str
    regions: tuple
    tags: tuple = ()


@dataclass(frozen=True)
class LikelihoodConfig:
    use_geom: bool = True
    use_layout: bool = True
    use_region: bool = True
    k: int = 10000
    epsilon: float = 1e-9
    include_guide_term: bool = False
    stochastic: bool = False
    uniform_guide: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.epsilon <= 1e-3:
            raise ValueError("epsilon must lie in (0, 1e-3]")

    def without(self, *terms):
        flags = {f"use_{t}": False for t in terms}
        return replace(self, **flags)


class AssignmentQueries:
    """The scorer queries one assignment needs, grouped by likelihood term."""

    __slots__ = ("geom", "layout", "region")

    def __init__(self, geom, layout, region):
        self.geom = geom
        self.layout = layout
        self.region = region  # list of (label-head query, area-head query)


class QueryPlanner:
    """Precomputed grammar tables for turning assignments into queries."""

    def __init__(self, g):
        self.g = g
        self.paths = {t: g.path_to_root(t) for t in g.terminals}
        self.tag = {
            (anc, t): g.child_on_path(anc, t)
            for t in g.terminals for anc in g.path_to_root(t)[1:]
        }
        self.nonterminal = set(g.nonterminals)

    def plan(self, labels):
        groups = {}
        for i, t in enumerate(labels):
            for label in self.paths[t]:
                groups.setdefault(label, []).append(i)
        root = self.g.root
        geom, layout, region = [], [], []
        for label, regs in groups.items():
            regs = tuple(regs)
            if label != root:
                geom.append(Query("geom", label, regs))
            if label in self.nonterminal:
                tags = tuple(self.tag[label, labels[i]] for i in regs)
                layout.append(Query("layout", label, regs, tags))
            else:
                region.append((Query("region_label", label, regs),
                               Query("region_area", label, regs)))
        return AssignmentQueries(geom, layout, region)


def _check(values, queries):
    for v, q in zip(values, queries):
        if not 0.0 <= v <= 1.0 or v != v:
            raise ScoreOutOfRange(f"ScoreOutOfRange: {q.kind} scorer for {q.label!r} returned {v}")


def _lookup(bank, shape, queries):
    values = [float(v) for v in bank.score(shape, queries)]
    _check(values, queries)
    return dict(zip(queries, values))


def _geo_mean_log(values, eps):
    if not values:
        return 0.0
    return math.fsum(math.log(max(v, eps)) for v in values) / len(values)


def geometry_term(plan, table, eps):
    return _geo_mean_log([table[q] for q in plan.geom], eps)


def layout_term(plan, table, eps):
    return _geo_mean_log([table[q] for q in plan.layout], eps)


def region_term(plan, table, eps):
    if not plan.region:
        return 0.0
    return math.fsum(
        math.log(max(table[ql], eps)) + math.log(max(table[qa], eps)) for ql, qa in plan.region
    ) / len(plan.region)


def _single(bank, g, s, a, which, eps):
    plan = QueryPlanner(g).plan(a.labels)
    queries = {"geom": plan.geom, "layout": plan.layout,
               "region": [q for pair in plan.region for q in pair]}[which]
    table = _lookup(bank, s, queries) if queries else {}
    return {"geom": geometry_term, "layout": layout_term, "region": region_term}[which](plan, table, eps)


def score_geometry(bank, g, s, a, eps=1e-9):
    """log L_G: mean log geometry score over occupied non-root labels."""
    return _single(bank, g, s, a, "geom", eps)


def score_layout(bank, g, s, a, eps=1e-9):
    """log L_L: mean log layout score over occupied non-terminal labels."""
    return _single(bank, g, s, a, "layout", eps)


def score_region_groups(bank, g, s, a, eps=1e-9):
    """log L_R over the region groups of the occupied terminals."""
    return _single(bank, g, s, a, "region", eps)


def combine(cfg, proposal):
    terms = []
    if cfg.use_geom:
        terms.append(proposal.log_geom)
    if cfg.use_layout:
        terms.append(proposal.log_layout)
    if cfg.use_region:
        terms.append(proposal.log_region)
    if cfg.include_guide_term:
        terms.append(proposal.log_q)
    return math.fsum(terms)


def score_proposals(cfg, bank, g, s, proposals, terms=None):
    """Fill the per-term logs and ``log_total`` of every proposal in place.

    All queries of all proposals go to the bank in one batch. ``terms`` picks
    the terms to evaluate (default: the ones ``cfg`` enables).
    """
    if terms is None:
        terms = [t for t in ("geom", "layout", "region") if getattr(cfg, f"use_{t}")]
    planner = QueryPlanner(g)
    plans = [planner.plan(p.assignment.labels) for p in proposals]
    unique = {}
    for plan in plans:
        if "geom" in terms:
            unique.update(dict.fromkeys(plan.geom))
        if "layout" in terms:
            unique.update(dict.fromkeys(plan.layout))
        if "region" in terms:
            for ql, qa in plan.region:
                unique[ql] = None
                unique[qa] = None
    table = _lookup(bank, s, list(unique)) if unique else {}
    eps = cfg.epsilon
    for p, plan in zip(proposals, plans):
        p.log_geom = geometry_term(plan, table, eps) if "geom" in terms else 0.0
        p.log_layout = layout_term(plan, table, eps) if "layout" in terms else 0.0
        p.log_region = region_term(plan, table, eps) if "region" in terms else 0.0
        p.log_total = combine(cfg, p)
    return proposals


def make_proposals(cfg, d):
    if cfg.uniform_guide:
        d = GuideDistribution.uniform(d.terminal_order, d.num_regions)
    if cfg.stochastic:
        return stochastic_assignments(d, cfg.k, as_rng(cfg.seed))
    return top_k_assignments(d, cfg.k)


def select_best(cfg, proposals):
    """Highest combined score; ties to higher log_q, then lower signature.

    Proposals arrive sorted by (-log_q, signature), so the first maximum wins.
    """
    best = None
    for p in proposals:
        score = combine(cfg, p)
        if best is None or score > best[0]:
            best = (score, p)
    return best[1]


def infer(cfg, bank, g, d, s):
    """Best of the guide's top-k proposals under the enabled likelihood terms."""
    proposals = make_proposals(cfg, d)
    if cfg.use_geom or cfg.use_layout or cfg.use_region:
        score_proposals(cfg, bank, g, s, proposals)
    else:
        for p in proposals:
            p.log_total = combine(cfg, p)
    return select_best(cfg, proposals)
