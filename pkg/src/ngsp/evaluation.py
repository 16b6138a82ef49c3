"""mIoU, label-balanced dataset splits, and ablation sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

from .errors import DataError, SplitError
from .likelihood import make_proposals, score_proposals, select_best


@dataclass
class MIoUReport:
    intersection: dict
    union: dict
    iou: dict
    mean: float  # in percent

    def format(self, g):
        lines = ["label\tintersection\tunion\tiou"]
        for label in g.labels:
            if label in self.union:
                iou = self.iou.get(label)
                iou_s = "nan" if iou is None else f"{iou:.9g}"
                lines.append(f"{label}\t{self.intersection[label]}\t{self.union[label]}\t{iou_s}")
        lines.append(f"mean_miou\t{self.mean:.9g}")
        return "\n".join(lines) + "\n"


def miou(g, items, per_shape=False, terminals_only=False, zero_union="skip"):
    """Mean IoU (in percent) between predicted and ground-truth lifted labels.

    ``items`` is an iterable of ``(shape, truth, prediction)``. Every point
    takes its region's terminal label plus all of its ancestors. By default
    point counts are pooled over all shapes per label before taking the ratio,
    and labels that never occur in truth or prediction are left out of the
    mean (``zero_union="zero"`` scores them 0 instead; with pooling every
    grammar label is then averaged). ``per_shape`` averages per-shape mIoU
    values instead of pooling.
    """
    if zero_union not in ("skip", "zero"):
        raise ValueError(f"zero_union must be 'skip' or 'zero', not {zero_union!r}")
    labels = g.terminals if terminals_only else g.labels
    if per_shape:
        means = [miou(g, [it], False, terminals_only, zero_union).mean for it in items]
        mean = math.fsum(means) / len(means) if means else 0.0
        return MIoUReport({}, {}, {}, mean)
    inter = {l: 0 for l in labels}
    union = {l: 0 for l in labels}
    for shape, truth, pred in items:
        if len(truth) != len(shape) or len(pred) != len(shape):
            raise DataError(f"shape {shape.id}: prediction/ground truth do not cover its regions")
        for r, t, p in zip(shape.regions, truth.labels, pred.labels):
            tp, pp = g.path_to_root(t), g.path_to_root(p)
            n = r.num_points
            for label in labels:
                a, b = label in tp, label in pp
                if a and b:
                    inter[label] += n
                if a or b:
                    union[label] += n
    ratios = {}
    for label in labels:
        if union[label]:
            ratios[label] = Fraction(inter[label], union[label])
        elif zero_union == "zero":
            ratios[label] = Fraction(0)
    iou = {label: float(r) for label, r in ratios.items()}
    # exact rational mean, rounded once
    mean = float(100 * sum(ratios.values()) / len(ratios)) if ratios else 0.0
    return MIoUReport(inter, union, iou, mean)


# -- splits -----------------------------------------------------------------------

def split_sizes(n, max_per_set=400, min_per_set=50):
    if n < 3 * min_per_set:
        raise SplitError(f"dataset of {n} shapes is too small for three sets of {min_per_set}")
    train = min(max_per_set, n - 2 * min_per_set)
    rest = min(max_per_set, (n - train) // 2)
    return train, rest, rest


def build_splits(g, dataset, max_per_set=400, min_per_set=50, seed=0):
    """Greedy label-balanced (train, val, test) lists of shape ids.

    Shapes are visited rarest-terminal first (ties by shape id). Each goes to
    the non-full set whose label counts are furthest below that set's share
    of the terminals the shape carries. ``seed`` is accepted for interface
    symmetry; the procedure is fully determined by the data.
    """
    items = sorted(dataset, key=lambda it: it.id)
    sizes = split_sizes(len(items), max_per_set, min_per_set)
    n = len(items)
    freq = {t: 0 for t in g.terminals}
    carried = {}
    for it in items:
        ts = sorted(set(it.labels.labels), key=g.terminal_index.get)
        carried[it.id] = ts
        for t in ts:
            freq[t] += 1
    rarity = {it.id: min(freq[t] for t in carried[it.id]) for it in items}
    order = sorted(items, key=lambda it: (rarity[it.id], it.id))
    counts = [{t: 0 for t in g.terminals} for _ in range(3)]
    sets = [[], [], []]
    for it in order:
        open_sets = [s for s in range(3) if len(sets[s]) < sizes[s]]
        if not open_sets:
            break

        def deficit(s):
            # relative shortfall against this set's proportional quota
            total = 0.0
            for t in carried[it.id]:
                quota = sizes[s] * freq[t] / n
                total += (quota - counts[s][t]) / (quota * freq[t])
            return total

        best = max(open_sets, key=lambda s: (deficit(s), -s))
        sets[best].append(it.id)
        for t in carried[it.id]:
            counts[best][t] += 1
    return tuple(sorted(s) for s in sets)


# -- ablations ----------------------------------------------------------------------

ABLATIONS = ("full", "no-geom", "no-layout", "no-region", "no-L", "no-guide")


def ablation_configs(base):
    return {
        "full": replace(base, use_geom=True, use_layout=True, use_region=True, uniform_guide=False),
        "no-geom": replace(base, use_geom=False, use_layout=True, use_region=True, uniform_guide=False),
        "no-layout": replace(base, use_geom=True, use_layout=False, use_region=True, uniform_guide=False),
        "no-region": replace(base, use_geom=True, use_layout=True, use_region=False, uniform_guide=False),
        "no-L": replace(base, use_geom=False, use_layout=False, use_region=False, uniform_guide=False),
        "no-guide": replace(base, use_geom=True, use_layout=True, use_region=True, uniform_guide=True),
    }


def sweep_shape(base, bank, g, d, shape, names=ABLATIONS):
    """Predicted assignment per ablation for one shape.

    Guide proposals are scored once under every term and reused by each
    configuration that shares them.
    """
    configs = ablation_configs(base)
    out = {}
    guided = [n for n in names if n != "no-guide"]
    if guided:
        all_terms = replace(base, use_geom=True, use_layout=True, use_region=True, uniform_guide=False)
        props = make_proposals(all_terms, d)
        score_proposals(all_terms, bank, g, shape, props)
        for name in guided:
            cfg = configs[name]
            best = select_best(cfg, props)
            out[name] = best.assignment
    if "no-guide" in names:
        cfg = configs["no-guide"]
        props = make_proposals(cfg, d)
        score_proposals(cfg, bank, g, shape, props)
        out["no-guide"] = select_best(cfg, props).assignment
    return out


def ablation_sweep(base, bank, g, guides, test_set, names=ABLATIONS, progress=None):
    """Mean mIoU per ablation configuration over ``test_set``.

    ``guides`` maps shape id to its guide distribution; ``test_set`` is a list
    of labelled shapes.
    """
    preds = {name: [] for name in names}
    for i, item in enumerate(test_set):
        res = sweep_shape(base, bank, g, guides[item.id], item.shape, names)
        for name in names:
            preds[name].append((item.shape, item.labels, res[name]))
        if progress:
            progress(i + 1, len(test_set))
    return {name: miou(g, preds[name]).mean for name in names}
