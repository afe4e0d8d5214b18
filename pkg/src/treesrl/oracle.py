"""Brute-force reference implementations for small sentences.

Everything here enumerates trees explicitly and scores them with its own
arithmetic, deliberately sharing no code with the chart recursions it is
used to check. Enumerations are cached per sentence length; scoring is
vectorized over the cached head matrix so 200-instance sweeps stay cheap.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import DepTree, NULL_LABEL, PRD_LABEL, TooLarge
from .convert import ForestConstraints, enumerate_forest
from .chart import ScoreTables

MAX_N = 10


def _forests(lo, hi):
    """Sequences of adjacent projective subtrees covering [lo, hi]:
    (heads_dict, dangling_roots)."""
    if lo > hi:
        return [({}, ())]
    out = []
    for mid in range(lo, hi + 1):
        for r in range(lo, mid + 1):
            for sub in _subtrees(lo, mid, r):
                for rest, roots in _forests(mid + 1, hi):
                    d = dict(sub)
                    d.update(rest)
                    out.append((d, (r,) + roots))
    return out


def _subtrees(lo, hi, root):
    out = []
    for left, lroots in _forests(lo, root - 1):
        for right, rroots in _forests(root + 1, hi):
            d = dict(left)
            d.update(right)
            for r in lroots + rroots:
                d[r] = root
            out.append(d)
    return out


def enumerate_trees(n: int, root: int | None = None, limit: int = MAX_N):
    """All projective trees over 1..n in which 0 has exactly one child
    (the given root, or any position)."""
    if n > limit:
        raise TooLarge(f"n={n} exceeds enumeration limit {limit}")
    trees = []
    roots = [root] if root is not None else range(1, n + 1)
    for r in roots:
        for sub in _subtrees(1, n, r):
            heads = [0] * (n + 1)
            heads[0] = -1
            heads[r] = 0
            for m, h in sub.items():
                heads[m] = h
            trees.append(DepTree(tuple(heads)))
    return trees


@lru_cache(maxsize=None)
def count_projective(n: int) -> int:
    """Independent count of single-root projective trees, via a size
    recursion that never builds trees."""

    @lru_cache(maxsize=None)
    def forests(m: int) -> int:
        if m == 0:
            return 1
        total = 0
        for s in range(1, m + 1):  # first subtree size
            total += sum(tree(r - 1, s - r) for r in range(1, s + 1)) \
                * forests(m - s)
        return total

    def tree(left: int, right: int) -> int:
        return forests(left) * forests(right)

    return sum(tree(r - 1, n - r) for r in range(1, n + 1))


def _tree_sibs(heads) -> list[tuple[int, int, int]]:
    n = len(heads) - 1
    out = []
    for h in range(1, n + 1):
        left = sorted((m for m in range(1, n + 1) if heads[m] == h and m < h),
                      reverse=True)
        right = sorted(m for m in range(1, n + 1) if heads[m] == h and m > h)
        for a, b in zip(left, left[1:]):
            out.append((h, a, b))
        for a, b in zip(right, right[1:]):
            out.append((h, a, b))
    return out


@dataclass
class _TreeSet:
    heads: np.ndarray      # (T, n+1) int16, column 0 is the -1 sentinel
    sib_tree: np.ndarray   # (K,) tree index of each sibling triple
    sib_hsm: np.ndarray    # (K, 3)
    labeled: list | None = None  # labeled DepTrees (constrained sets only)


@lru_cache(maxsize=None)
def _cached_trees(n: int) -> _TreeSet:
    trees = enumerate_trees(n)
    return _pack([t.heads for t in trees])


def _pack(head_tuples) -> _TreeSet:
    heads = np.array(head_tuples, dtype=np.int16)
    sib_tree, sib_hsm = [], []
    for ti, hv in enumerate(head_tuples):
        for hsm in _tree_sibs(hv):
            sib_tree.append(ti)
            sib_hsm.append(hsm)
    return _TreeSet(
        heads=heads,
        sib_tree=np.array(sib_tree, dtype=np.int64),
        sib_hsm=np.array(sib_hsm, dtype=np.int64).reshape(-1, 3),
    )


def _forest_set(cons: ForestConstraints, limit: int) -> _TreeSet:
    trees = enumerate_forest(cons, limit=limit)
    ts = _pack([t.heads for t in trees])
    ts.labeled = trees
    return ts


def _tree_scores(ts: _TreeSet, tables: ScoreTables, order: int,
                 labeled=None) -> np.ndarray:
    T, width = ts.heads.shape
    n = width - 1
    mods = np.arange(1, n + 1)
    scores = tables.arc[ts.heads[:, 1:].astype(np.int64), mods[None, :]].sum(axis=1)
    if order == 2 and len(ts.sib_tree):
        if tables.sib is None:
            raise ValueError("sibling table required for order 2")
        vals = tables.sib[ts.sib_hsm[:, 0], ts.sib_hsm[:, 1], ts.sib_hsm[:, 2]]
        np.add.at(scores, ts.sib_tree, vals)
    if labeled is not None and tables.label_logp is not None:
        lp = tables.label_logp
        for ti, tree in enumerate(labeled):
            for m in range(1, n + 1):
                lab = tree.labels[m]
                if lab is not None:
                    scores[ti] += lp[tree.heads[m], m, tables.labels.index(lab)]
    return scores


def _instance(tables: ScoreTables, order: int,
              constraints: ForestConstraints | None, root: int | None,
              limit: int):
    if constraints is not None:
        ts = _forest_set(constraints, limit)
        return ts, _tree_scores(ts, tables, order, labeled=ts.labeled)
    n = tables.n
    ts = _cached_trees(n)
    scores = _tree_scores(ts, tables, order)
    if root is not None:
        keep = ts.heads[:, 1:].astype(np.int64) == 0
        root_of = np.argmax(keep, axis=1) + 1
        scores = np.where(root_of == root, scores, float("-inf"))
    return ts, scores


def brute_logZ(tables: ScoreTables, order: int = 1,
               constraints: ForestConstraints | None = None,
               root: int | None = None, limit: int = MAX_N) -> float:
    if tables.n > limit:
        raise TooLarge(f"n={tables.n} exceeds limit {limit}")
    _, scores = _instance(tables, order, constraints, root, limit)
    m = scores.max()
    if not np.isfinite(m):
        return float("-inf")
    return float(m + np.log(np.exp(scores - m).sum()))


def brute_best(tables: ScoreTables, order: int = 1,
               constraints: ForestConstraints | None = None,
               root: int | None = None, limit: int = MAX_N):
    """(tree, score) maximizing the unlabeled (or label-folded, under
    constraints) score; ties resolved to the lexicographically smallest
    head vector."""
    if tables.n > limit:
        raise TooLarge(f"n={tables.n} exceeds limit {limit}")
    ts, scores = _instance(tables, order, constraints, root, limit)
    best = scores.max()
    if not np.isfinite(best):
        raise ValueError("no finite-score tree")
    cand = np.nonzero(scores == best)[0]
    hv = min(tuple(ts.heads[i, 1:].tolist()) for i in cand)
    return DepTree((-1,) + hv), float(best)


def brute_marginals(tables: ScoreTables, order: int = 1,
                    constraints: ForestConstraints | None = None,
                    root: int | None = None, limit: int = MAX_N):
    """Posterior expectations of arc / sibling indicators."""
    if tables.n > limit:
        raise TooLarge(f"n={tables.n} exceeds limit {limit}")
    ts, scores = _instance(tables, order, constraints, root, limit)
    n = tables.n
    m = scores.max()
    if not np.isfinite(m):
        raise ValueError("no finite-score tree")
    w = np.exp(scores - m)
    w /= w.sum()
    arc = np.zeros((n + 1, n + 1))
    mods = np.arange(1, n + 1)
    for ti in range(ts.heads.shape[0]):
        if w[ti]:
            arc[ts.heads[ti, 1:].astype(np.int64), mods] += w[ti]
    sib = None
    if order == 2:
        sib = np.zeros((n + 1, n + 1, n + 1))
        for j in range(len(ts.sib_tree)):
            h, s, mm = ts.sib_hsm[j]
            sib[h, s, mm] += w[ts.sib_tree[j]]
    return arc, sib
