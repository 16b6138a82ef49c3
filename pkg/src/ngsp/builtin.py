"""Built-in scorer bank: small feature-based models trained from labelled shapes.

One binary model per label for geometry (all labels but the root) and layout
(non-terminals), a multinomial region-group label head, one bounded area head
per terminal, and a per-region guide classifier that produces
:class:`~ngsp.guide.GuideDistribution` rows.

Model file layout (all integers and floats little-endian)::

    b"NGSPB1"  uint32 version  uint32 header_bytes  header (UTF-8 JSON)
    float64 payload: every model array, in header order
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelFormatError, NoNegativeFound
from .features import (BASE_DIM, RegionStats, base_features, batch_base_features,
                       batch_layout_features, feature_dim, layout_features)
from .grammar import parse_grammar
from .guide import GuideDistribution
from .models import BoundedLinearModel, Hyper, LogisticModel, SoftmaxModel
from .negatives import NegativeSampler, NegativeSpec, extract_positives, proximity_weights, sample_perturbation
from .seeding import derive_rng

log = logging.getLogger(__name__)

MAGIC = b"NGSPB1"
VERSION = 1
GUIDE_DIM = 7


@dataclass
class TrainConfig:
    hyper: Hyper = field(default_factory=Hyper)
    negatives_per_positive: int = 8
    group_perturbations: int = 20
    seed: int = 0


def guide_features(stats):
    """Per-region descriptors for the guide.

    Only the region's own extents, covariance spectrum and area fraction:
    no position and no context, so contextual evidence is left to the
    likelihood terms.
    """
    rows = []
    for i in range(len(stats)):
        f = base_features(stats, [i])
        rows.append(f[3:10])
    return np.array(rows)


class BuiltinScorerBank:
    backend = "builtin"

    def __init__(self, g, geometry, layout, region_label, region_area, guide):
        self.g = g
        self.geometry = geometry
        self.layout = layout
        self.region_label = region_label
        self.region_area = region_area
        self.guide = guide
        self._stats = None

    # -- scoring -------------------------------------------------------------

    def stats(self, shape):
        if self._stats is None or self._stats[0] is not shape:
            self._stats = (shape, RegionStats(shape))
        return self._stats[1]

    def score(self, shape, queries):
        stats = self.stats(shape)
        g = self.g
        # base features once per distinct region set
        row_of = {}
        for q in queries:
            row_of.setdefault(q.regions, len(row_of))
        base = batch_base_features(stats, list(row_of)) if row_of else np.empty((0, BASE_DIM))

        buckets = {}
        for i, q in enumerate(queries):
            key = (q.kind, q.label) if q.kind != "region_label" else (q.kind, None)
            buckets.setdefault(key, []).append(i)
        out = np.empty(len(queries))
        tindex = g.terminal_index
        for (kind, label), idx in buckets.items():
            X = base[[row_of[queries[i].regions] for i in idx]]
            if kind == "layout":
                X = batch_layout_features(g, stats, label, [queries[i].regions for i in idx],
                                          [queries[i].tags for i in idx], X)
            if kind == "geom":
                out[idx] = self.geometry[label].predict(X)
            elif kind == "layout":
                out[idx] = self.layout[label].predict(X)
            elif kind == "region_area":
                out[idx] = self.region_area[label].predict(X)
            elif kind == "region_label":
                probs = self.region_label.predict(X)
                cols = [tindex[queries[i].label] for i in idx]
                out[idx] = probs[np.arange(len(idx)), cols]
            else:
                raise ValueError(f"unknown query kind {kind!r}")
        return out

    def guide_distribution(self, shape, epsilon=1e-9):
        rows = self.guide.predict(guide_features(self.stats(shape)))
        return GuideDistribution(self.g.terminals, rows, epsilon)

    # -- persistence ---------------------------------------------------------

    def _entries(self):
        for label, m in self.geometry.items():
            yield f"geom/{label}", "logistic", m
        for label, m in self.layout.items():
            yield f"layout/{label}", "logistic", m
        yield "region_label", "softmax", self.region_label
        for label, m in self.region_area.items():
            yield f"region_area/{label}", "bounded", m
        yield "guide", "softmax", self.guide

    def to_bytes(self):
        models, blobs = [], []
        for name, typ, m in self._entries():
            arrays = [np.asarray(a, dtype="<f8") for a in m.arrays()]
            models.append({"name": name, "type": typ, "shapes": [list(a.shape) for a in arrays]})
            blobs.extend(a.tobytes() for a in arrays)
        header = json.dumps({"grammar": self.g.serialize(), "models": models},
                            sort_keys=True, separators=(",", ":")).encode("utf-8")
        return MAGIC + struct.pack("<II", VERSION, len(header)) + header + b"".join(blobs)

    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data):
        if data[:6] != MAGIC:
            raise ModelFormatError("not a builtin scorer model (bad magic)")
        try:
            version, hlen = struct.unpack_from("<II", data, 6)
        except struct.error:
            raise ModelFormatError("truncated model header") from None
        if version != VERSION:
            raise ModelFormatError(f"unsupported model version {version}")
        try:
            header = json.loads(data[14:14 + hlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise ModelFormatError("corrupt model header") from None
        g = parse_grammar(header["grammar"])
        offset = 14 + hlen
        geometry, layout, area = {}, {}, {}
        region_label = guide = None
        kinds = {"logistic": LogisticModel, "softmax": SoftmaxModel, "bounded": BoundedLinearModel}
        for entry in header["models"]:
            arrays = []
            for shp in entry["shapes"]:
                n = int(np.prod(shp)) if shp else 1
                if offset + 8 * n > len(data):
                    raise ModelFormatError("truncated model payload")
                arrays.append(np.frombuffer(data, dtype="<f8", count=n, offset=offset)
                              .astype(np.float64).reshape(shp))
                offset += 8 * n
            model = kinds[entry["type"]].from_arrays(arrays)
            name = entry["name"]
            if name.startswith("geom/"):
                geometry[name[5:]] = model
            elif name.startswith("layout/"):
                layout[name[7:]] = model
            elif name.startswith("region_area/"):
                area[name[12:]] = model
            elif name == "region_label":
                region_label = model
            elif name == "guide":
                guide = model
        if offset != len(data):
            raise ModelFormatError("trailing bytes after model payload")
        return cls(g, geometry, layout, region_label, area, guide)

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())


# -- training --------------------------------------------------------------------

def _binary_examples(g, dataset, stats, kind, cfg):
    """Feature matrices and targets per label for geometry or layout models."""
    sampler = NegativeSampler(g, dataset, NegativeSpec(kind))
    labels = [l for l in g.labels if l != g.root] if kind == "geom" else list(g.nonterminals)
    out = {}
    for label in labels:
        rows, ys = [], []

        def featurize(ex):
            st = stats[ex.shape_id]
            f = base_features(st, ex.regions)
            if kind == "layout":
                f = layout_features(g, st, label, ex.regions, ex.tags, f)
            return f

        for pos in extract_positives(g, dataset, label):
            pos = sampler.positive(pos.shape_id, label)
            rows.append(featurize(pos))
            ys.append(1.0)
            for j in range(cfg.negatives_per_positive):
                rng = derive_rng(cfg.seed, "neg", kind, pos.shape_id, label, j)
                try:
                    neg = sampler.sample(pos.shape_id, label, rng)
                except NoNegativeFound:
                    continue
                rows.append(featurize(neg))
                ys.append(0.0)
        out[label] = (np.array(rows).reshape(-1, feature_dim(kind, g)), np.array(ys))
    return out


def _group_examples(g, dataset, stats, cfg):
    """Region groups from ground truth and perturbed assignments, with targets."""
    tindex = g.terminal_index
    weights = proximity_weights(g)
    X, majority, owner, purity = [], [], [], []
    for item in dataset:
        st = stats[item.id]
        truth = item.labels.labels
        rng = derive_rng(cfg.seed, "groups", item.id)
        seen = set()
        assignments = [item.labels] + [
            sample_perturbation(g, item.labels, rng, weights) for _ in range(cfg.group_perturbations)]
        for a in assignments:
            groups = {}
            for i, t in enumerate(a.labels):
                groups.setdefault(t, []).append(i)
            for t, regs in groups.items():
                key = (t, tuple(regs))
                if key in seen:
                    continue
                seen.add(key)
                area_by_label = {}
                for i in regs:
                    area_by_label[truth[i]] = area_by_label.get(truth[i], 0.0) + st.area[i]
                total = sum(area_by_label.values())
                # majority by area, ties to the earlier terminal
                major = min(area_by_label, key=lambda l: (-area_by_label[l], tindex[l]))
                X.append(base_features(st, regs))
                majority.append(tindex[major])
                owner.append(t)
                purity.append(area_by_label.get(t, 0.0) / total)
    return np.array(X), np.array(majority), owner, np.array(purity)


def train_builtin_scorers(g, dataset, cfg=None):
    """Fit every model of a :class:`BuiltinScorerBank` on ``dataset``.

    ``dataset`` is a sequence of :class:`~ngsp.negatives.LabeledShape`. Labels
    without positive examples keep untrained (constant 0.5) models.
    """
    cfg = cfg or TrainConfig()
    dataset = list(dataset)
    if not dataset:
        raise ValueError("empty training set")
    hyper = cfg.hyper
    stats = {item.id: RegionStats(item.shape) for item in dataset}

    def fit_binary(kind):
        models = {}
        for label, (X, y) in _binary_examples(g, dataset, stats, kind, cfg).items():
            if y.sum() == 0:
                models[label] = LogisticModel.untrained(feature_dim(kind, g))
            else:
                models[label] = LogisticModel.fit(X, y, hyper)
            log.debug("%s/%s: %d examples", kind, label, len(y))
        return models

    geometry = fit_binary("geom")
    layout = fit_binary("layout")

    X, majority, owner, purity = _group_examples(g, dataset, stats, cfg)
    n_terms = len(g.terminals)
    region_label = SoftmaxModel.fit(X, majority, n_terms, hyper)
    region_area = {}
    owner = np.array(owner, dtype=object)
    for t in g.terminals:
        mask = owner == t
        if mask.any():
            region_area[t] = BoundedLinearModel.fit(X[mask], purity[mask], hyper)
        else:
            region_area[t] = BoundedLinearModel.untrained(BASE_DIM)

    gX, gy = [], []
    for item in dataset:
        gX.append(guide_features(stats[item.id]))
        gy.extend(g.terminal_index[t] for t in item.labels.labels)
    guide = SoftmaxModel.fit(np.vstack(gX), np.array(gy), n_terms, hyper)
    return BuiltinScorerBank(g, geometry, layout, region_label, region_area, guide)


def untrained_bank(g):
    """A bank whose every scorer is at its zero-weight initialisation."""
    n = len(g.terminals)
    return BuiltinScorerBank(
        g,
        {l: LogisticModel.untrained(BASE_DIM) for l in g.labels if l != g.root},
        {l: LogisticModel.untrained(feature_dim("layout", g)) for l in g.nonterminals},
        SoftmaxModel.untrained(BASE_DIM, n),
        {t: BoundedLinearModel.untrained(BASE_DIM) for t in g.terminals},
        SoftmaxModel.untrained(GUIDE_DIM, n),
    )
