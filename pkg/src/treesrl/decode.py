"""Argmax decoding, predicate prediction, and label assignment.

Decoding reuses the inside recursions in the max semiring. Tie handling
is exact: every chart cell memoizes the lexicographically smallest head
vector among its max-scoring derivations (smallest head index at the
leftmost differing modifier), and because each cell's derivations
concatenate child position ranges in order, the lex-min of a combination
is the combination of lex-mins. Test-time trees are unconstrained; span
constraints exist only inside the training objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (DepTree, NULL_LABEL, PRD_LABEL, OutOfBounds, SrlAnnotation,
                   Sentence, TreeSrlError)
from .convert import recover_frame
from .chart import ScoreTables, _forward, _max0, _require_sib, score_tree

PREDICT = "predict"


class Infeasible(TreeSrlError):
    """No finite-score tree under the requested root."""


@dataclass(frozen=True)
class DecodeConfig:
    order: int = 1
    predicates: str | tuple[int, ...] = PREDICT
    tie_break: str = "lexmin"

    def __post_init__(self):
        if self.order not in (1, 2):
            raise TreeSrlError(f"order must be 1 or 2, got {self.order}")
        if self.tie_break != "lexmin":
            raise TreeSrlError(f"unknown tie_break rule {self.tie_break!r}")
        if self.predicates != PREDICT:
            preds = tuple(self.predicates)
            if len(set(preds)) != len(preds):
                raise TreeSrlError(f"duplicate gold predicates: {preds}")
            object.__setattr__(self, "predicates", preds)


def predict_predicates(tables: ScoreTables) -> list[int]:
    """Positions whose root arc prefers PRD over NULL; ties go to NULL."""
    if tables.label_logp is None:
        raise TreeSrlError("predicate prediction needs label log-probs")
    lp = tables.label_logp
    prd = tables.label_index(PRD_LABEL)
    null = tables.label_index(NULL_LABEL)
    return [j for j in range(1, tables.n + 1) if lp[0, j, prd] > lp[0, j, null]]


def _merge(a, b):
    # both parts are sorted by position and a's positions all precede b's
    return a + b


def _reconstruct(st, kind, i, j, memo):
    """Lex-min head vector, as a position-sorted tuple of (modifier, head)
    pairs, among max-scoring derivations of one chart item."""
    if i == j:
        return ()
    key = (kind, i, j)
    got = memo.get(key)
    if got is not None:
        return got
    w = j - i
    pos = i - 1
    rec = st.saved[w]
    arrs = {"CR": st.CR, "CL": st.CL, "IR": st.IR, "IL": st.IL, "SS": st.SS}
    cell = arrs[kind][i, j]
    cands = []
    if kind == "CR":
        u = rec["U"]
        for k in range(1, w + 1):
            if u[k - 1, pos] == cell:
                cands.append(_merge(_reconstruct(st, "IR", i, i + k, memo),
                                    _reconstruct(st, "CR", i + k, j, memo)))
    elif kind == "CL":
        v = rec["V"]
        for k in range(w):
            if v[k, pos] == cell:
                cands.append(_merge(_reconstruct(st, "CL", i, i + k, memo),
                                    _reconstruct(st, "IL", i + k, j, memo)))
    elif kind == "SS":
        t = rec["T"]
        for k in range(w):
            if t[k, pos] == cell:
                cands.append(_merge(_reconstruct(st, "CR", i, i + k, memo),
                                    _reconstruct(st, "CL", i + k + 1, j, memo)))
    elif kind == "IR":
        target = rec["base"][pos] if st.order == 1 else rec["uR"][pos]
        if st.order == 1:
            t = rec["T"]
            for k in range(w):
                if t[k, pos] == target:
                    cands.append(_merge(
                        _reconstruct(st, "CR", i, i + k, memo),
                        _reconstruct(st, "CL", i + k + 1, j, memo)) + ((j, i),))
        else:
            br = rec["BR"]
            if br[0, pos] == target:
                cands.append(_reconstruct(st, "CL", i + 1, j, memo) + ((j, i),))
            for k in range(1, w):
                if br[k, pos] == target:
                    cands.append(_merge(
                        _reconstruct(st, "IR", i, i + k, memo),
                        _reconstruct(st, "SS", i + k, j, memo)) + ((j, i),))
    elif kind == "IL":
        target = rec["base"][pos] if st.order == 1 else rec["uL"][pos]
        if st.order == 1:
            t = rec["T"]
            for k in range(w):
                if t[k, pos] == target:
                    cands.append(((i, j),) + _merge(
                        _reconstruct(st, "CR", i, i + k, memo),
                        _reconstruct(st, "CL", i + k + 1, j, memo)))
        else:
            bl = rec["BL"]
            if bl[0, pos] == target:
                cands.append(((i, j),) + _reconstruct(st, "CR", i, j - 1, memo))
            for k in range(1, w):
                if bl[k, pos] == target:
                    cands.append(((i, j),) + _merge(
                        _reconstruct(st, "SS", i, i + k, memo),
                        _reconstruct(st, "IL", i + k, j, memo)))
    if not cands:
        raise TreeSrlError(f"no derivation for {kind}[{i},{j}]")  # pragma: no cover
    best = min(cands)
    memo[key] = best
    return best


def eisner_decode(tables: ScoreTables, predicate: int | None = None,
                  order: int = 1) -> tuple[DepTree, float]:
    """Highest-scoring tree in Y(x), optionally with the root's child
    fixed to `predicate`. The returned score is recomputed from the tree
    so it matches a direct sum over its parts exactly."""
    n = tables.n
    if predicate is not None and not 1 <= predicate <= n:
        raise OutOfBounds(f"predicate {predicate} outside [1, {n}]")
    sib = _require_sib(tables) if order == 2 else None
    st = _forward(tables.arc, sib, n, order, _max0, root=predicate)
    terms = st.root_terms
    if predicate is not None:
        roots = [predicate] if np.isfinite(terms[predicate - 1]) else []
    else:
        best = terms.max()
        roots = [] if not np.isfinite(best) else \
            [r for r in range(1, n + 1) if terms[r - 1] == best]
    if not roots:
        raise Infeasible("no finite-score tree under the requested root")
    memo: dict = {}
    cands = []
    for r in roots:
        vec = _reconstruct(st, "CL", 1, r, memo) + ((r, 0),) \
            + _reconstruct(st, "CR", r, n, memo)
        cands.append(tuple(sorted(vec)))
    pairs = min(cands)
    heads = [0] * (n + 1)
    heads[0] = -1
    for m, h in pairs:
        heads[m] = h
    tree = DepTree(tuple(heads))
    return tree, score_tree(tree.heads, tables, order)


def assign_labels(tree: DepTree, tables: ScoreTables, predicate: int) -> DepTree:
    """Label the root arc PRD and each arc out of the predicate with its
    argmax over roles plus NULL (first index wins ties); all other arcs
    stay unlabeled."""
    if tables.label_logp is None or tables.labels is None:
        raise TreeSrlError("label assignment needs label log-probs")
    lp = tables.label_logp
    prd = tables.label_index(PRD_LABEL)
    allowed = [k for k in range(len(tables.labels)) if k != prd]
    labels: list[str | None] = [None] * (tree.n + 1)
    labels[predicate] = PRD_LABEL
    for m in tree.children(predicate):
        row = lp[predicate, m, allowed]
        labels[m] = tables.labels[allowed[int(np.argmax(row))]]
    return DepTree(tree.heads, tuple(labels))


def parse(sentence: Sentence, tables: ScoreTables,
          config: DecodeConfig = DecodeConfig()) -> SrlAnnotation:
    """Full pipeline for one sentence: choose predicates (gold list or
    prediction), decode one tree per predicate, label, read frames off."""
    n = sentence.n
    if tables.n != n:
        raise TreeSrlError(f"tables for n={tables.n}, sentence has n={n}")
    if config.predicates == PREDICT:
        preds = predict_predicates(tables)
    else:
        preds = sorted(config.predicates)
        for p in preds:
            if not 1 <= p <= n:
                raise OutOfBounds(f"gold predicate {p} outside [1, {n}]")
    frames = []
    for p in preds:
        tree, _ = eisner_decode(tables, predicate=p, order=config.order)
        labeled = assign_labels(tree, tables, p)
        frames.append(recover_frame(labeled, p))
    return SrlAnnotation(sentence=sentence, frames=tuple(frames))
