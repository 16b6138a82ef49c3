"""Command-line entry point: ``ngsp <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 external scorer error.
Diagnostics go to stderr; results go to files or stdout.
"""

from __future__ import annotations

import argparse
import glob
import hashlib
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

from . import synth
from .builtin import BuiltinScorerBank, TrainConfig, train_builtin_scorers
from .corruption import corrupt_shape, format_provenance
from .errors import DataError, NGSPError, ScorerError
from .evaluation import build_splits, miou
from .external import ExternalScorerBank
from .grammar import load_grammar
from .guide import check_guide, load_guide
from .likelihood import LikelihoodConfig, infer
from .models import Hyper
from .negatives import LabeledShape, NegativeSampler, NegativeSpec, extract_positives, format_examples
from .seeding import derive_rng, derive_seed
from .shapes import LabelAssignment, load_labels, load_shape, parse_labels, save_labels, save_shape

log = logging.getLogger("ngsp")

TERMS = ("geom", "layout", "region")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- file helpers -------------------------------------------------------------

def read_ids(path):
    with open(path, encoding="utf-8") as f:
        return [ln.strip() for ln in f if ln.strip()]


def write_ids(ids, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("".join(i + "\n" for i in ids))


def find_grammar(data_dir, explicit=None):
    if explicit:
        return load_grammar(explicit)
    found = sorted(glob.glob(os.path.join(data_dir, "*.grammar")))
    if len(found) != 1:
        raise DataError(f"expected one .grammar file in {data_dir}, found {len(found)}; pass --grammar")
    return load_grammar(found[0])


def dataset_ids(data_dir, ids_path=None):
    if ids_path:
        return read_ids(ids_path)
    return sorted(os.path.basename(p)[:-5] for p in glob.glob(os.path.join(data_dir, "*.regs")))


def load_item(g, data_dir, shape_id, labelled=True):
    shape = load_shape(os.path.join(data_dir, shape_id + ".regs"))
    if shape.id != shape_id:
        raise DataError(f"{shape_id}.regs declares shape id {shape.id!r}")
    if not labelled:
        return shape
    labels = load_labels(os.path.join(data_dir, shape_id + ".labels")).validate(g, shape)
    return LabeledShape(shape, labels)


def load_dataset(g, data_dir, ids_path=None):
    ids = dataset_ids(data_dir, ids_path)
    if not ids:
        raise DataError(f"no shapes found in {data_dir}")
    return [load_item(g, data_dir, i) for i in ids]


# -- result files ---------------------------------------------------------------

def format_result(k, proposal):
    lines = [f"k {k}"]
    for name in ("log_q", "log_geom", "log_layout", "log_region", "log_total"):
        lines.append(f"{name} {getattr(proposal, name):.9g}")
    lines.extend(f"{i} {label}" for i, label in enumerate(proposal.assignment.labels))
    return "\n".join(lines) + "\n"


def parse_result(text):
    """Header values and the assignment of a ``.result`` file."""
    header, mapping = {}, {}
    for ln in text.splitlines():
        parts = ln.split()
        if not parts:
            continue
        if len(parts) != 2:
            raise DataError(f"malformed result line {ln!r}")
        key, value = parts
        if key.lstrip("-").isdigit():
            mapping[int(key)] = value
        else:
            header[key] = float(value) if key != "k" else int(value)
    return header, LabelAssignment.from_mapping(mapping)


def load_prediction(path):
    with open(path, encoding="utf-8") as f:
        text = f.read()
    if path.endswith(".result"):
        return parse_result(text)[1]
    return parse_labels(text)


# -- colored export --------------------------------------------------------------

def label_color(label, palette_seed=0):
    """Deterministic RGB triple for a label name."""
    h = hashlib.sha256(f"{palette_seed}:{label}".encode("utf-8")).digest()
    # keep colors away from black so points stay visible
    return tuple(64 + b % 192 for b in h[:3])


def format_colored_ply(shape, assignment, palette_seed=0):
    if len(assignment) != len(shape):
        raise DataError("assignment does not cover the shape")
    n = sum(r.num_points for r in shape.regions)
    out = ["ply", "format ascii 1.0", f"comment shape {shape.id}", f"element vertex {n}",
           "property float x", "property float y", "property float z",
           "property uchar red", "property uchar green", "property uchar blue", "end_header"]
    for r, label in zip(shape.regions, assignment.labels):
        rgb = " ".join(str(c) for c in label_color(label, palette_seed))
        out.extend(f"{x:.9g} {y:.9g} {z:.9g} {rgb}" for x, y, z in r.points.tolist())
    return "\n".join(out) + "\n"


# -- scorer construction ------------------------------------------------------------

def make_bank(spec):
    if spec is None:
        raise UsageError("--scorer is required (builtin:<model> or external:<command>)")
    kind, _, arg = spec.partition(":")
    if not arg:
        raise UsageError(f"malformed --scorer {spec!r}")
    if kind == "builtin":
        return BuiltinScorerBank.load(arg)
    if kind == "external":
        return ExternalScorerBank(arg)
    raise UsageError(f"unknown scorer backend {kind!r}")


def likelihood_config(args):
    disabled = set()
    if args.disable:
        for term in args.disable.split(","):
            term = term.strip()
            if term not in TERMS:
                raise UsageError(f"--disable takes a comma list of {','.join(TERMS)}, got {term!r}")
            disabled.add(term)
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    return LikelihoodConfig(
        use_geom="geom" not in disabled,
        use_layout="layout" not in disabled,
        use_region="region" not in disabled,
        k=args.k,
        include_guide_term=args.include_guide_term,
        stochastic=args.stochastic,
        uniform_guide=args.no_guide,
        seed=args.seed,
    )


# -- subcommands -----------------------------------------------------------------

def cmd_parse_grammar(args):
    g = load_grammar(args.grammar)
    sys.stdout.write(g.serialize())
    return 0


def cmd_synth(args):
    # here --grammar names a bundled toy grammar rather than a file
    args.grammar = args.grammar or "toychair"
    if args.describe:
        print(synth.describe(args.grammar))
        return 0
    if not args.out:
        raise UsageError("synth needs --out unless --describe is given")
    g = synth.grammar_for(args.grammar)
    items = synth.generate_dataset(args.grammar, args.count, args.seed)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, f"{args.grammar}.grammar"), "w", encoding="utf-8", newline="\n") as f:
        f.write(g.serialize())
    for item in items:
        save_shape(item.shape, os.path.join(args.out, item.id + ".regs"))
        save_labels(item.labels, os.path.join(args.out, item.id + ".labels"))
    log.info("wrote %d shapes to %s", len(items), args.out)
    return 0


def cmd_split(args):
    g = find_grammar(args.data, args.grammar)
    dataset = load_dataset(g, args.data)
    splits = build_splits(g, dataset, args.max_per_set, args.min_per_set, args.seed)
    os.makedirs(args.out, exist_ok=True)
    for name, ids in zip(("train", "val", "test"), splits):
        write_ids(ids, os.path.join(args.out, name + ".txt"))
        log.info("%s: %d shapes", name, len(ids))
    return 0


def cmd_train(args):
    g = find_grammar(args.data, args.grammar)
    dataset = load_dataset(g, args.data, args.ids)
    cfg = TrainConfig(Hyper(args.lr, args.epochs, args.l2), args.negatives_per_positive,
                      args.group_perturbations, args.seed)
    bank = train_builtin_scorers(g, dataset, cfg)
    bank.save(args.out)
    log.info("trained on %d shapes; model written to %s", len(dataset), args.out)
    return 0


def cmd_make_negatives(args):
    g = find_grammar(args.data, args.grammar)
    dataset = load_dataset(g, args.data, args.ids)
    sampler = NegativeSampler(g, dataset, NegativeSpec(args.kind))
    if args.label:
        labels = [args.label]
        g.path_to_root(args.label)
    elif args.kind == "geom":
        labels = [l for l in g.labels if l != g.root]
    else:
        labels = list(g.nonterminals)
    examples = []
    for label in labels:
        for pos in extract_positives(g, dataset, label):
            pos = sampler.positive(pos.shape_id, label)
            examples.append(pos)
            for j in range(args.per_positive):
                rng = derive_rng(args.seed, "neg", args.kind, pos.shape_id, label, j)
                try:
                    examples.append(sampler.sample(pos.shape_id, label, rng))
                except DataError as e:
                    log.warning("%s", e)
    text = format_examples(examples)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _infer_one(job):
    cfg, bank, g, shape, guide_path = job
    if guide_path:
        d = check_guide(load_guide(guide_path), g, shape)
    elif isinstance(bank, BuiltinScorerBank):
        d = bank.guide_distribution(shape)
    else:
        raise DataError(f"no guide for {shape.id}: pass --guide-dir with an external scorer")
    if cfg.stochastic:
        cfg = replace(cfg, seed=derive_seed(cfg.seed, shape.id))
    best = infer(cfg, bank, g, d, shape)
    return shape.id, format_result(cfg.k, best)


def cmd_infer(args):
    cfg = likelihood_config(args)
    bank = make_bank(args.scorer)
    if args.shape:
        shapes = [load_shape(args.shape)]
        g = load_grammar(args.grammar) if args.grammar else getattr(bank, "g", None)
        if g is None:
            raise UsageError("--grammar is required with an external scorer")
    else:
        if not args.data:
            raise UsageError("infer needs --shape or --data")
        g = find_grammar(args.data, args.grammar)
        shapes = [load_item(g, args.data, i, labelled=False) for i in dataset_ids(args.data, args.ids)]
    jobs = []
    for s in shapes:
        guide = os.path.join(args.guide_dir, s.id + ".guide") if args.guide_dir else None
        jobs.append((cfg, bank, g, s, guide))
    workers = args.jobs or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_infer_one, jobs))
    else:
        results = [_infer_one(j) for j in jobs]
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for shape_id, text in results:
            with open(os.path.join(args.out, shape_id + ".result"), "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
    else:
        for _, text in results:
            sys.stdout.write(text)
    return 0


def cmd_evaluate(args):
    g = find_grammar(args.data, args.grammar)
    items = []
    for shape_id in dataset_ids(args.data, args.ids):
        truth = load_item(g, args.data, shape_id)
        path = os.path.join(args.pred, shape_id + ".result")
        if not os.path.exists(path):
            path = os.path.join(args.pred, shape_id + ".labels")
        pred = load_prediction(path).validate(g, truth.shape)
        items.append((truth.shape, truth.labels, pred))
    report = miou(g, items, per_shape=args.per_shape, terminals_only=args.terminals_only,
                  zero_union=args.zero_union)
    text = report.format(g)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    sys.stdout.write(text)
    return 0


def cmd_corrupt(args):
    g = find_grammar(args.data, args.grammar)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "grammar.grammar"), "w", encoding="utf-8", newline="\n") as f:
        f.write(g.serialize())
    for shape_id in dataset_ids(args.data, args.ids):
        shape = load_shape(os.path.join(args.data, shape_id + ".regs"))
        lpath = os.path.join(args.data, shape_id + ".labels")
        labels = load_labels(lpath).validate(g, shape) if os.path.exists(lpath) else None
        new_shape, new_labels, prov = corrupt_shape(shape, labels, args.level, args.seed)
        save_shape(new_shape, os.path.join(args.out, shape_id + ".regs"))
        if new_labels is not None:
            save_labels(new_labels, os.path.join(args.out, shape_id + ".labels"))
        with open(os.path.join(args.out, shape_id + ".prov"), "w", encoding="utf-8", newline="\n") as f:
            f.write(format_provenance(prov))
        log.info("%s: %d -> %d regions", shape_id, len(shape), len(new_shape))
    return 0


def cmd_export_colored(args):
    shape = load_shape(args.shape)
    a = load_prediction(args.labels)
    text = format_colored_ply(shape, a, args.palette_seed)
    with open(args.out, "w", encoding="ascii", newline="\n") as f:
        f.write(text)
    return 0


# -- parser -------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--k", type=int, default=10000, help="number of guide proposals")
    common.add_argument("--disable", default="", help="comma list of geom,layout,region")
    common.add_argument("--no-guide", action="store_true", help="proposals from a uniform prior")
    common.add_argument("--stochastic", action="store_true", help="sample proposals instead of enumerating")
    common.add_argument("--scorer", help="builtin:<model path> or external:<command>")
    common.add_argument("--include-guide-term", action="store_true")
    common.add_argument("--grammar", help="grammar file (default: the one .grammar in --data)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="ngsp", description="Grammar-constrained part labelling of region-decomposed shapes.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("parse-grammar", parents=[common], help="validate and print a grammar")
    s.add_argument("grammar_file")
    s.set_defaults(func=lambda a: cmd_parse_grammar(argparse.Namespace(grammar=a.grammar_file)))

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--out")
    s.add_argument("--describe", action="store_true", help="print the generator parameter table")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("split", parents=[common], help="label-balanced train/val/test split")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--max-per-set", type=int, default=400)
    s.add_argument("--min-per-set", type=int, default=50)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", parents=[common], help="train the builtin scorer bank")
    s.add_argument("--data", required=True)
    s.add_argument("--ids", help="file of shape ids to train on (default: all)")
    s.add_argument("--out", required=True)
    s.add_argument("--lr", type=float, default=1e-2)
    s.add_argument("--epochs", type=int, default=200)
    s.add_argument("--l2", type=float, default=1e-4)
    s.add_argument("--negatives-per-positive", type=int, default=8)
    s.add_argument("--group-perturbations", type=int, default=20)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("make-negatives", parents=[common], help="write positives and sampled negatives")
    s.add_argument("--data", required=True)
    s.add_argument("--ids")
    s.add_argument("--kind", choices=("geom", "layout"), default="geom")
    s.add_argument("--label")
    s.add_argument("--per-positive", type=int, default=8)
    s.add_argument("--out")
    s.set_defaults(func=cmd_make_negatives)

    s = sub.add_parser("infer", parents=[common], help="label shapes")
    s.add_argument("--shape", help="a single .regs file")
    s.add_argument("--data")
    s.add_argument("--ids")
    s.add_argument("--guide-dir", help="directory of <shape_id>.guide files")
    s.add_argument("--out", help="directory for .result files (default: stdout)")
    s.add_argument("--jobs", type=int, default=0, help="worker processes (default: logical cores)")
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("evaluate", parents=[common], help="mIoU of predictions against ground truth")
    s.add_argument("--data", required=True)
    s.add_argument("--ids")
    s.add_argument("--pred", required=True, help="directory of .result or .labels files")
    s.add_argument("--per-shape", action="store_true")
    s.add_argument("--terminals-only", action="store_true")
    s.add_argument("--zero-union", choices=("skip", "zero"), default="skip")
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("corrupt", parents=[common], help="split regions 2X or 4X")
    s.add_argument("--data", required=True)
    s.add_argument("--ids")
    s.add_argument("--level", type=int, choices=(1, 2, 4), default=2)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_corrupt)

    s = sub.add_parser("export-colored", parents=[common], help="ASCII PLY colored by label")
    s.add_argument("--shape", required=True)
    s.add_argument("--labels", required=True, help=".labels or .result file")
    s.add_argument("--palette-seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export_colored)
    return p


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("ngsp: a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s: %(message)s", stream=sys.stderr)
        return args.func(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except ScorerError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (DataError, NGSPError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
