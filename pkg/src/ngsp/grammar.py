"""Semantic label grammars with a unique path from the root to every label.

A grammar file looks like::

    # comments start with '#'
    root: chair
    chair -> back ; base ; seat
    back -> back_frame ; back_surface

Labels are case-sensitive. Labels that never appear on a left-hand side are
terminals. The canonical label order is a depth-first preorder walk from the
root that follows the child order of each production; every probability row
and histogram in the package is laid out in this order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

from .errors import (
    DuplicateLabel,
    GrammarCycle,
    GrammarError,
    InvalidLabelName,
    MissingRoot,
    MultipleParents,
    NotAnAncestor,
    UnknownLabel,
    UnreachableLabel,
)

_ARROW = re.compile(r"[ \t]*->[ \t]*")
_SEP = re.compile(r"[ \t]*;[ \t]*")
_ROOT = re.compile(r"^root[ \t]*:[ \t]*(\S+)[ \t]*$")


def _check_name(name):
    if not name or any(c.isspace() for c in name) or ";" in name or "->" in name:
        raise InvalidLabelName(f"invalid label name {name!r}")


@dataclass(frozen=True)
class Grammar:
    """Immutable label tree ``(labels, root, productions)``.

    ``productions`` is a tuple of ``(parent, children)`` pairs; build instances
    through :meth:`from_productions` or :func:`parse_grammar`, both of which
    validate the unique-path property.
    """

    root: str
    productions: tuple

    def __post_init__(self):
        self._validate()
        # canonical production order: nonterminals in preorder
        rules = dict(self.productions)
        order = []
        stack = [self.root]
        while stack:
            label = stack.pop()
            if label in rules:
                order.append((label, tuple(rules[label])))
                stack.extend(reversed(rules[label]))
        object.__setattr__(self, "productions", tuple(order))

    @classmethod
    def from_productions(cls, root, productions):
        if isinstance(productions, dict):
            productions = productions.items()
        return cls(root, tuple((p, tuple(cs)) for p, cs in productions))

    def _validate(self):
        _check_name(self.root)
        seen_lhs = set()
        parent = {}
        for lhs, children in self.productions:
            _check_name(lhs)
            if lhs in seen_lhs:
                raise DuplicateLabel(lhs)
            seen_lhs.add(lhs)
            if not children:
                raise GrammarError(f"production for {lhs!r} has no children")
            in_rule = set()
            for c in children:
                _check_name(c)
                if c in in_rule:
                    raise DuplicateLabel(c)
                in_rule.add(c)
                if c in parent:
                    raise MultipleParents(c)
                parent[c] = lhs
        if self.root in parent:
            raise GrammarCycle(self.root)
        # every label with a parent chain that never reaches the root is either
        # on a cycle or hangs off an undeclared subtree
        everything = seen_lhs | set(parent) | {self.root}
        for label in sorted(everything):
            chain = {label}
            cur = label
            while cur in parent:
                cur = parent[cur]
                if cur in chain:
                    raise GrammarCycle(label)
                chain.add(cur)
            if cur != self.root:
                raise UnreachableLabel(label)

    # -- derived views -----------------------------------------------------

    @cached_property
    def children(self):
        return {p: cs for p, cs in self.productions}

    @cached_property
    def parent(self):
        return {c: p for p, cs in self.productions for c in cs}

    @cached_property
    def labels(self):
        order = []
        stack = [self.root]
        while stack:
            label = stack.pop()
            order.append(label)
            stack.extend(reversed(self.children.get(label, ())))
        return tuple(order)

    @cached_property
    def terminals(self):
        return tuple(l for l in self.labels if l not in self.children)

    @cached_property
    def nonterminals(self):
        return tuple(l for l in self.labels if l in self.children)

    @cached_property
    def label_index(self):
        return {l: i for i, l in enumerate(self.labels)}

    @cached_property
    def terminal_index(self):
        return {l: i for i, l in enumerate(self.terminals)}

    @cached_property
    def max_fanout(self):
        return max((len(cs) for cs in self.children.values()), default=0)

    @cached_property
    def _paths(self):
        paths = {}
        for label in self.labels:
            path = [label]
            while path[-1] != self.root:
                path.append(self.parent[path[-1]])
            paths[label] = tuple(path)
        return paths

    def is_terminal(self, label):
        self._require(label)
        return label not in self.children

    def _require(self, label):
        if label not in self.label_index:
            raise UnknownLabel(label)

    def path_to_root(self, label):
        self._require(label)
        return self._paths[label]

    def child_on_path(self, ancestor, label):
        path = self.path_to_root(label)
        self._require(ancestor)
        try:
            i = path.index(ancestor)
        except ValueError:
            i = 0
        if i == 0:
            raise NotAnAncestor(f"{ancestor!r} is not a strict ancestor of {label!r}")
        return path[i - 1]

    def tree_distance(self, a, b):
        pa, pb = self.path_to_root(a), self.path_to_root(b)
        # both paths end at the root; strip the shared suffix
        i = 0
        while i < min(len(pa), len(pb)) and pa[-1 - i] == pb[-1 - i]:
            i += 1
        return (len(pa) - i) + (len(pb) - i)

    def serialize(self):
        lines = [f"root: {self.root}"]
        for label in self.nonterminals:
            lines.append(f"{label} -> " + " ; ".join(self.children[label]))
        return "\n".join(lines) + "\n"


def parse_grammar(text):
    """Parse a ``.grammar`` document into a validated :class:`Grammar`."""
    root = None
    productions = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if root is None:
            m = _ROOT.match(line)
            if not m:
                raise MissingRoot(f"MissingRoot: line {lineno} must declare 'root: <label>'")
            root = m.group(1)
            continue
        parts = _ARROW.split(line)
        if len(parts) != 2:
            raise GrammarError(f"line {lineno}: expected '<parent> -> <child> ; ...'")
        lhs = parts[0].strip()
        children = [c.strip() for c in _SEP.split(parts[1].strip())]
        productions.append((lhs, tuple(children)))
    if root is None:
        raise MissingRoot()
    return Grammar(root, tuple(productions))


def load_grammar(path):
    with open(path, encoding="utf-8") as f:
        return parse_grammar(f.read())


def path_to_root(g, label):
    return list(g.path_to_root(label))


def child_on_path(g, ancestor, terminal):
    return g.child_on_path(ancestor, terminal)


def tree_distance(g, a, b):
    return g.tree_distance(a, b)
