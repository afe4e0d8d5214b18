"""SRL frames <-> latent dependency forests.

A frame's forest T_p is the set of projective trees in which the predicate
is the only child of the root, every argument span is the exact yield of a
single subtree whose root attaches to the predicate, non-argument tokens
hang off the predicate in any projective way that stays inside their
segment, and no arc crosses a segment boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from .core import (ARG, NONARG, PRED, NULL_LABEL, PRD_LABEL, DepTree,
                   MalformedTree, PredicateFrame, Argument, SpanPartition,
                   TooLarge, TreeSrlError)

# single-root realization variants
LATENT = "latent"
FIRST = "first"
LAST = "last"
FLAT = "flat"
VARIANTS = (LATENT, FIRST, LAST, FLAT)


@dataclass(frozen=True)
class ForestConstraints:
    partition: SpanPartition
    variant: str = LATENT

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise TreeSrlError(f"unknown variant {self.variant!r}")

    @property
    def predicate(self) -> int:
        return self.partition.predicate


def is_valid_tree(tree: DepTree, c: ForestConstraints) -> bool:
    """Membership test for T_p. The tree is assumed to be a projective
    tree rooted at 0 (DepTree invariants); everything else is checked."""
    part = c.partition
    p = part.predicate
    n = tree.n
    if n != part.n:
        return False
    if tree.heads[p] != 0:
        return False
    if any(tree.heads[m] == 0 for m in range(1, n + 1) if m != p):
        return False

    seg_of = {}
    for seg in part.segments:
        for m in range(seg.start, seg.end + 1):
            seg_of[m] = seg

    # arcs from anything but the root or the predicate stay inside a segment
    for m in range(1, n + 1):
        h = tree.heads[m]
        if h in (0, p):
            continue
        if seg_of[h] is not seg_of[m]:
            return False

    pred_children = tree.children(p)
    for seg in part.segments:
        roots = [m for m in pred_children if seg.start <= m <= seg.end]
        if seg.kind == ARG:
            if len(roots) != 1:
                return False
            if tree.subtree_span(roots[0]) != (seg.start, seg.end):
                return False
            if c.variant == FIRST and roots[0] != seg.start:
                return False
            if c.variant == LAST and roots[0] != seg.end:
                return False
        if c.variant == FLAT and seg.kind != PRED:
            if roots != [seg.start]:
                return False
            if any(tree.heads[m] != seg.start
                   for m in range(seg.start + 1, seg.end + 1)):
                return False
    return True


def _forest_structs(lo, hi):
    """All ways to cover [lo, hi] with a sequence of projective subtrees.
    Yields (heads_dict, roots_tuple); roots are left dangling for the
    caller to attach."""
    if lo > hi:
        return [({}, ())]
    out = []
    for mid in range(lo, hi + 1):  # first subtree covers [lo, mid]
        for r in range(lo, mid + 1):
            for sub in _subtree_structs(lo, mid, r):
                for rest, roots in _forest_structs(mid + 1, hi):
                    d = dict(sub)
                    d.update(rest)
                    out.append((d, (r,) + roots))
    return out


def _subtree_structs(lo, hi, root):
    """All projective subtrees rooted at root whose yield is exactly [lo, hi]."""
    out = []
    for left, lroots in _forest_structs(lo, root - 1):
        for right, rroots in _forest_structs(root + 1, hi):
            d = dict(left)
            d.update(right)
            for r in lroots + rroots:
                d[r] = root
            out.append(d)
    return out


def _segment_options(seg, p, variant):
    """Possible (heads_dict, labels_dict) realizations of one segment,
    with the segment's attachment(s) to p included."""
    if seg.kind == PRED:
        return [({}, {})]
    a, b = seg.start, seg.end
    if variant == FLAT:
        d = {m: a for m in range(a + 1, b + 1)}
        d[a] = p
        lab = seg.role if seg.kind == ARG else NULL_LABEL
        return [(d, {a: lab})]
    if seg.kind == ARG:
        if variant == FIRST:
            roots = [a]
        elif variant == LAST:
            roots = [b]
        else:
            roots = range(a, b + 1)
        out = []
        for h in roots:
            for sub in _subtree_structs(a, b, h):
                d = dict(sub)
                d[h] = p
                out.append((d, {h: seg.role}))
        return out
    # NONARG: any projective forest, every dangling root attaches to p
    out = []
    for d, roots in _forest_structs(a, b):
        d = dict(d)
        labels = {}
        for r in roots:
            d[r] = p
            labels[r] = NULL_LABEL
        out.append((d, labels))
    return out


def enumerate_forest(c: ForestConstraints, limit: int = 10) -> list[DepTree]:
    """All trees of T_p, labeled (role on argument roots, NULL on
    non-argument roots, PRD on the predicate). Exhaustive; guarded by
    limit on the sentence length."""
    part = c.partition
    n = part.n
    if n > limit:
        raise TooLarge(f"n={n} exceeds enumeration limit {limit}")
    p = part.predicate
    per_segment = [_segment_options(seg, p, c.variant) for seg in part.segments]
    trees = []
    for combo in product(*per_segment):
        heads = [0] * (n + 1)
        heads[0] = -1
        labels: list[str | None] = [None] * (n + 1)
        heads[p] = 0
        labels[p] = PRD_LABEL
        for d, lab in combo:
            for m, h in d.items():
                heads[m] = h
            for m, l in lab.items():
                labels[m] = l
        trees.append(DepTree(tuple(heads), tuple(labels)))
    return trees


def recover_frame(tree: DepTree, p: int) -> PredicateFrame:
    """Read a frame back off a labeled tree: each non-NULL-labeled child
    of p contributes its subtree yield as an argument span."""
    n = tree.n
    if not 1 <= p <= n:
        raise MalformedTree(f"predicate {p} outside [1, {n}]")
    tree.validate()
    if tree.heads[p] != 0:
        raise MalformedTree(f"predicate {p} is not attached to the root")
    root_children = tree.children(0)
    if root_children != [p]:
        raise MalformedTree(f"root has children {root_children}, expected [{p}]")
    if tree.labels is None:
        raise MalformedTree("tree carries no labels")
    args = []
    for h in sorted(tree.children(p)):
        label = tree.labels[h]
        if label is None:
            raise MalformedTree(f"arc {p}->{h} is unlabeled")
        if label == NULL_LABEL:
            continue
        lo, hi = tree.subtree_span(h)
        if hi - lo != len(tree.descendants(h)):
            raise MalformedTree(f"subtree of {h} is not contiguous")
        args.append(Argument(lo, hi, label))
    return PredicateFrame(predicate=p, arguments=tuple(args))


def headword_dependencies(tree: DepTree, p: int) -> list[tuple[int, int, str]]:
    """(predicate, headword, role) triples for the frame's arguments.
    Self-loops are never emitted."""
    out = []
    if tree.labels is None:
        raise MalformedTree("tree carries no labels")
    for h in sorted(tree.children(p)):
        label = tree.labels[h]
        if label is not None and label != NULL_LABEL and h != p:
            out.append((p, h, label))
    return out


def flat_tree(c: ForestConstraints) -> DepTree:
    """The canonical FLAT member of T_p (by nesting also a member under
    FIRST and LATENT)."""
    part = c.partition
    n = part.n
    p = part.predicate
    heads = [0] * (n + 1)
    heads[0] = -1
    labels: list[str | None] = [None] * (n + 1)
    heads[p] = 0
    labels[p] = PRD_LABEL
    for seg in part.segments:
        if seg.kind == PRED:
            continue
        heads[seg.start] = p
        labels[seg.start] = seg.role if seg.kind == ARG else NULL_LABEL
        for m in range(seg.start + 1, seg.end + 1):
            heads[m] = seg.start
    return DepTree(tuple(heads), tuple(labels))
