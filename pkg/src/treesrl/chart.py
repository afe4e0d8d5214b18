"""Projective dependency chart algorithms in the log semiring.

Items follow the classic head-automaton decomposition: complete spans
(CR right-facing, CL left-facing), incomplete spans (IR for arcs i->j,
IL for arcs j->i), and, at second order, sibling spans SS covering two
adjacent same-side children. The tree space Y(x) is the set of projective
trees over 1..n in which position 0 has exactly one child; the root arc
is folded in by a final combine over logsumexp_r(arc[0,r] + CL[1,r] +
CR[r,n]).

Charts are stored as dense (n+1, n+1) arrays and filled one span width at
a time with vectorized gathers, which keeps the Python overhead at
O(n^2) calls for the O(n^3) recursion.

The span-constrained variants restrict the chart to the frame's forest
T_p by masking arcs that cross segment boundaries, restricting where
predicate-headed complete spans may close (argument subtrees must cover
their span exactly), and, at second order, forbidding sibling pairs of
the predicate that fall inside one argument segment. Role log-probs are
folded additively onto the predicate's and root's arcs, so constrained
inside values are the labeled numerators of the TreeCRF.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (ARG, NONARG, NULL_LABEL, PRD_LABEL, TreeSrlError)
from .convert import FIRST, FLAT, LAST, LATENT, ForestConstraints

NEG = float("-inf")


class AllMasked(TreeSrlError):
    """The (unconstrained) tree space has no finite-score tree."""


class EmptyForest(TreeSrlError):
    """The constraints admit no tree; cannot happen for a valid frame
    with finite in-forest scores."""


@dataclass
class ScoreTables:
    """Dense score tables for one sentence.

    arc[h, m] = s(h -> m) for h in [0, n], m in [1, n]; column 0 and the
    diagonal are never read. sib[h, s, m] scores adjacent same-side
    children s (inner) and m (outer) of h; only strictly-between triples
    are read. label_logp[h, m, l] holds log P(label l | arc h -> m) over
    the inventory order `labels` (NULL first, PRD second, then roles).
    """

    arc: np.ndarray
    sib: np.ndarray | None = None
    label_logp: np.ndarray | None = None
    labels: tuple[str, ...] | None = None

    @property
    def n(self) -> int:
        return self.arc.shape[0] - 1

    def label_index(self, label: str) -> int:
        if self.labels is None:
            raise TreeSrlError("tables carry no label inventory")
        return self.labels.index(label)


@dataclass
class ChartResult:
    log_z: float
    arc_marginals: np.ndarray
    sib_marginals: np.ndarray | None = None


def arc_legal_mask(n: int) -> np.ndarray:
    """Boolean (n+1, n+1) mask of structurally legal arcs h -> m."""
    ok = np.ones((n + 1, n + 1), dtype=bool)
    ok[:, 0] = False
    np.fill_diagonal(ok, False)
    return ok


def sib_legal_mask(n: int) -> np.ndarray:
    """Valid adjacent-sibling triples: s strictly between h and m."""
    h, s, m = np.indices((n + 1, n + 1, n + 1), sparse=True)
    return ((h < s) & (s < m)) | ((m < s) & (s < h) & (m >= 1))


def label_allowed_mask(n: int, n_labels: int) -> np.ndarray:
    """Allowed label classes per arc row: {PRD, NULL} out of the root,
    everything except PRD elsewhere (modifier column 0 is never read and
    gets NULL only so that its softmax row stays well defined)."""
    allowed = np.ones((n + 1, n + 1, n_labels), dtype=bool)
    allowed[0, :, :] = False
    allowed[0, :, 0] = True   # NULL
    allowed[0, :, 1] = True   # PRD
    allowed[1:, :, 1] = False
    allowed[:, 0, :] = False
    allowed[:, 0, 0] = True
    return allowed


def _lse0(t: np.ndarray) -> np.ndarray:
    """logsumexp over axis 0, -inf rows handled without warnings."""
    m = t.max(axis=0)
    finite = np.isfinite(m)
    safe = np.where(finite, m, 0.0)
    s = np.exp(t - safe[None, :]).sum(axis=0)
    with np.errstate(divide="ignore"):
        out = np.where(finite, safe + np.log(s), NEG)
    return out


def _max0(t: np.ndarray) -> np.ndarray:
    return t.max(axis=0)


def _weights(t: np.ndarray, v: np.ndarray) -> np.ndarray:
    """exp(t - v) with non-finite results (masked or -inf cells) zeroed."""
    with np.errstate(invalid="ignore", over="ignore"):
        w = np.exp(t - v[None, :])
    w[~np.isfinite(w)] = 0.0
    return w


@dataclass
class _ForestMasks:
    p: int
    variant: str
    seg_id: np.ndarray     # (n+1,) segment index per position
    arg_flag: np.ndarray   # (n+1,) True in ARG segments
    rclose_ok: np.ndarray  # (n+1,) CR[p, j] may close at j
    lclose_ok: np.ndarray  # (n+1,) CL[i, p] may close at i


def _forest_arc(tables: ScoreTables, cons: ForestConstraints):
    """Effective arc table (masks + label folds) and the chart masks."""
    part = cons.partition
    n = part.n
    if tables.n != n:
        raise TreeSrlError(f"tables built for n={tables.n}, partition has n={n}")
    p = part.predicate
    variant = cons.variant

    seg_id = np.zeros(n + 1, dtype=np.int64)
    seg_start = np.zeros(n + 1, dtype=np.int64)
    seg_end = np.zeros(n + 1, dtype=np.int64)
    arg_flag = np.zeros(n + 1, dtype=bool)
    roles: list[str | None] = [None] * (n + 1)
    for si, seg in enumerate(part.segments):
        for m in range(seg.start, seg.end + 1):
            seg_id[m] = si
            seg_start[m] = seg.start
            seg_end[m] = seg.end
            arg_flag[m] = seg.kind == ARG
            roles[m] = seg.role

    pos = np.arange(n + 1)
    same_seg = seg_id[:, None] == seg_id[None, :]
    allow = same_seg.copy()
    allow[:, 0] = False
    allow[0, :] = False
    np.fill_diagonal(allow, False)
    if variant == FLAT:
        allow &= (pos == seg_start)[:, None]
    # attachments to the predicate
    child_ok = np.zeros(n + 1, dtype=bool)
    for m in range(1, n + 1):
        if m == p:
            continue
        if arg_flag[m]:
            if variant == FIRST or variant == FLAT:
                child_ok[m] = m == seg_start[m]
            elif variant == LAST:
                child_ok[m] = m == seg_end[m]
            else:
                child_ok[m] = True
        else:
            child_ok[m] = m != p and (variant != FLAT or m == seg_start[m])
    allow[p, :] = child_ok
    allow[:, p] = False  # nothing heads the predicate but the root
    root_row = np.zeros(n + 1, dtype=bool)
    root_row[p] = True
    allow[0, :] = root_row

    fold = np.zeros((n + 1, n + 1))
    if tables.label_logp is not None:
        if tables.labels is None:
            raise TreeSrlError("label_logp given without a label inventory")
        lp = tables.label_logp
        null_id = tables.labels.index(NULL_LABEL)
        prd_id = tables.labels.index(PRD_LABEL)
        fold[0, p] = lp[0, p, prd_id]
        for m in range(1, n + 1):
            if m == p:
                continue
            lid = tables.labels.index(roles[m]) if arg_flag[m] else null_id
            fold[p, m] = lp[p, m, lid]

    with np.errstate(invalid="ignore"):
        arc_eff = np.where(allow, tables.arc + fold, NEG)

    # where may predicate-headed complete spans close
    rclose_ok = np.ones(n + 1, dtype=bool)
    lclose_ok = np.ones(n + 1, dtype=bool)
    for j in range(p + 1, n + 1):
        if arg_flag[j] or variant == FLAT:
            rclose_ok[j] = j == seg_end[j]
    for i in range(1, p):
        if arg_flag[i] or variant == FLAT:
            lclose_ok[i] = i == seg_start[i]

    masks = _ForestMasks(p=p, variant=variant, seg_id=seg_id,
                         arg_flag=arg_flag, rclose_ok=rclose_ok,
                         lclose_ok=lclose_ok)
    return arc_eff, masks


@dataclass
class _ChartState:
    n: int
    order: int
    arc: np.ndarray
    sib: np.ndarray | None
    masks: _ForestMasks | None
    CR: np.ndarray
    CL: np.ndarray
    IR: np.ndarray
    IL: np.ndarray
    SS: np.ndarray | None
    saved: dict
    root_terms: np.ndarray
    root: int | None
    log_z: float


def _forward(arc, sib, n, order, reduce, masks=None, root=None) -> _ChartState:
    CR = np.full((n + 1, n + 1), NEG)
    CL = np.full((n + 1, n + 1), NEG)
    IR = np.full((n + 1, n + 1), NEG)
    IL = np.full((n + 1, n + 1), NEG)
    SS = np.full((n + 1, n + 1), NEG) if order == 2 else None
    idx = np.arange(1, n + 1)
    CR[idx, idx] = 0.0
    CL[idx, idx] = 0.0
    saved = {}
    p = masks.p if masks is not None else None

    for w in range(1, n):
        I = np.arange(1, n - w + 1)
        J = I + w
        t = np.empty((w, len(I)))
        for k in range(w):
            t[k] = CR[I, I + k] + CL[I + k + 1, J]
        rec = {"T": t}
        if order == 1:
            base = reduce(t)
            rec["base"] = base
            v_ir = base + arc[I, J]
            v_il = base + arc[J, I]
        else:
            SS[I, J] = reduce(t)
            br = np.empty((w, len(I)))
            bl = np.empty((w, len(I)))
            br[0] = t[0]
            bl[0] = t[w - 1]
            for k in range(1, w):
                br[k] = IR[I, I + k] + SS[I + k, J] + sib[I, I + k, J]
                bl[k] = IL[I + k, J] + SS[I, I + k] + sib[J, I + k, I]
            if masks is not None and w >= 2:
                ks = np.arange(1, w)
                # two children of the predicate may not share an ARG segment
                if 1 <= p <= n - w:
                    bad = (masks.seg_id[p + ks] == masks.seg_id[p + w]) \
                        & masks.arg_flag[p + ks]
                    br[ks[bad], p - 1] = NEG
                if p - w >= 1:
                    i0 = p - w
                    bad = (masks.seg_id[i0 + ks] == masks.seg_id[i0]) \
                        & masks.arg_flag[i0]
                    bl[ks[bad], i0 - 1] = NEG
            u_r = reduce(br)
            u_l = reduce(bl)
            rec["BR"], rec["BL"] = br, bl
            rec["uR"], rec["uL"] = u_r, u_l
            v_ir = u_r + arc[I, J]
            v_il = u_l + arc[J, I]
        IR[I, J] = v_ir
        IL[I, J] = v_il
        u = np.empty((w, len(I)))
        for k in range(1, w + 1):
            u[k - 1] = IR[I, I + k] + CR[I + k, J]
        CR[I, J] = reduce(u)
        v = np.empty((w, len(I)))
        for k in range(w):
            v[k] = CL[I, I + k] + IL[I + k, J]
        CL[I, J] = reduce(v)
        rec["U"], rec["V"] = u, v
        if masks is not None:
            if 1 <= p <= n - w and not masks.rclose_ok[p + w]:
                CR[p, p + w] = NEG
            if p - w >= 1 and not masks.lclose_ok[p - w]:
                CL[p - w, p] = NEG
        saved[w] = rec

    root_terms = arc[0, 1:n + 1] + CL[1, 1:n + 1] + CR[idx, n]
    if root is None:
        log_z = float(_lse0(root_terms[:, None])[0]) if reduce is _lse0 \
            else float(root_terms.max())
    else:
        log_z = float(root_terms[root - 1])
    return _ChartState(n=n, order=order, arc=arc, sib=sib, masks=masks,
                       CR=CR, CL=CL, IR=IR, IL=IL, SS=SS, saved=saved,
                       root_terms=root_terms, root=root, log_z=log_z)


def _backward(st: _ChartState):
    """d log_z / d arc and d log_z / d sib by distributing softmax weights
    back through the saved recursion, widths descending."""
    n, order = st.n, st.order
    g_arc = np.zeros_like(st.arc)
    g_sib = np.zeros_like(st.sib) if order == 2 else None
    gCR = np.zeros((n + 1, n + 1))
    gCL = np.zeros((n + 1, n + 1))
    gIR = np.zeros((n + 1, n + 1))
    gIL = np.zeros((n + 1, n + 1))
    gSS = np.zeros((n + 1, n + 1)) if order == 2 else None

    idx = np.arange(1, n + 1)
    if st.root is None:
        wr = _weights(st.root_terms[None, :], np.array([st.log_z]))[0]
    else:
        wr = np.zeros(n)
        if np.isfinite(st.root_terms[st.root - 1]):
            wr[st.root - 1] = 1.0
    g_arc[0, 1:n + 1] += wr
    gCL[1, 1:n + 1] += wr
    gCR[idx, n] += wr

    for w in range(n - 1, 0, -1):
        I = np.arange(1, n - w + 1)
        J = I + w
        rec = st.saved[w]
        t, u, v = rec["T"], rec["U"], rec["V"]

        g = gCR[I, J]
        if g.any():
            wt = _weights(u, st.CR[I, J]) * g[None, :]
            for k in range(1, w + 1):
                gIR[I, I + k] += wt[k - 1]
                gCR[I + k, J] += wt[k - 1]
        g = gCL[I, J]
        if g.any():
            wt = _weights(v, st.CL[I, J]) * g[None, :]
            for k in range(w):
                gCL[I, I + k] += wt[k]
                gIL[I + k, J] += wt[k]

        g_r = gIR[I, J]
        g_l = gIL[I, J]
        g_arc[I, J] += g_r
        g_arc[J, I] += g_l
        if order == 1:
            if g_r.any() or g_l.any():
                wt = _weights(t, rec["base"]) * (g_r + g_l)[None, :]
                for k in range(w):
                    gCR[I, I + k] += wt[k]
                    gCL[I + k + 1, J] += wt[k]
        else:
            if g_r.any():
                wt = _weights(rec["BR"], rec["uR"]) * g_r[None, :]
                gCR[I, I] += wt[0]
                gCL[I + 1, J] += wt[0]
                for k in range(1, w):
                    gIR[I, I + k] += wt[k]
                    gSS[I + k, J] += wt[k]
                    g_sib[I, I + k, J] += wt[k]
            if g_l.any():
                wt = _weights(rec["BL"], rec["uL"]) * g_l[None, :]
                gCR[I, J - 1] += wt[0]
                gCL[J, J] += wt[0]
                for k in range(1, w):
                    gIL[I + k, J] += wt[k]
                    gSS[I, I + k] += wt[k]
                    g_sib[J, I + k, I] += wt[k]
            g = gSS[I, J]
            if g.any():
                wt = _weights(t, st.SS[I, J]) * g[None, :]
                for k in range(w):
                    gCR[I, I + k] += wt[k]
                    gCL[I + k + 1, J] += wt[k]
    return g_arc, g_sib


def _require_sib(tables: ScoreTables) -> np.ndarray:
    if tables.sib is None:
        raise TreeSrlError("second-order chart needs a sibling table")
    return tables.sib


def inside1(tables: ScoreTables, root: int | None = None) -> float:
    """log Z over Y(x) with first-order (arc-factored) scores. A return
    of -inf means every tree is masked out (the AllMasked condition)."""
    st = _forward(tables.arc, None, tables.n, 1, _lse0, root=root)
    return st.log_z


def inside2(tables: ScoreTables, root: int | None = None) -> float:
    """log Z with arc + adjacent-sibling scores."""
    st = _forward(tables.arc, _require_sib(tables), tables.n, 2, _lse0,
                  root=root)
    return st.log_z


def inside1_constrained(tables: ScoreTables, cons: ForestConstraints) -> float:
    """Labeled log-numerator: logsumexp over T_p of tree score plus role
    log-probs on the predicate's and root's arcs."""
    arc_eff, masks = _forest_arc(tables, cons)
    st = _forward(arc_eff, None, tables.n, 1, _lse0, masks=masks,
                  root=cons.predicate)
    if not np.isfinite(st.log_z):
        raise EmptyForest(f"constraints admit no tree (p={cons.predicate})")
    return st.log_z


def inside2_constrained(tables: ScoreTables, cons: ForestConstraints) -> float:
    arc_eff, masks = _forest_arc(tables, cons)
    st = _forward(arc_eff, _require_sib(tables), tables.n, 2, _lse0,
                  masks=masks, root=cons.predicate)
    if not np.isfinite(st.log_z):
        raise EmptyForest(f"constraints admit no tree (p={cons.predicate})")
    return st.log_z


def marginals(tables: ScoreTables, order: int = 1,
              constraints: ForestConstraints | None = None,
              root: int | None = None) -> ChartResult:
    """Posterior arc (and sibling) marginals, equal to d log_z / d score.

    With constraints, marginals are over T_p and arc_marginals[0, p] = 1.
    Gradients with respect to masked scores are 0.
    """
    sib = _require_sib(tables) if order == 2 else None
    if constraints is not None:
        arc_eff, masks = _forest_arc(tables, constraints)
        st = _forward(arc_eff, sib, tables.n, order, _lse0, masks=masks,
                      root=constraints.predicate)
        if not np.isfinite(st.log_z):
            raise EmptyForest("constraints admit no tree")
    else:
        st = _forward(tables.arc, sib, tables.n, order, _lse0, root=root)
        if not np.isfinite(st.log_z):
            raise AllMasked("no finite-score tree")
    g_arc, g_sib = _backward(st)
    return ChartResult(log_z=st.log_z, arc_marginals=g_arc, sib_marginals=g_sib)


def tree_sib_triples(heads) -> list[tuple[int, int, int]]:
    """Adjacent same-side sibling triples (h, s, m) of a head vector,
    s the inner sibling, m the outer."""
    n = len(heads) - 1
    kids: list[list[int]] = [[] for _ in range(n + 1)]
    for m in range(1, n + 1):
        if heads[m] >= 0:
            kids[heads[m]].append(m)
    out = []
    for h in range(n + 1):
        left = sorted((c for c in kids[h] if c < h), reverse=True)
        right = sorted(c for c in kids[h] if c > h)
        for a, b in zip(left, left[1:]):
            out.append((h, a, b))
        for a, b in zip(right, right[1:]):
            out.append((h, a, b))
    return out


def score_tree(heads, tables: ScoreTables, order: int = 1) -> float:
    """Unlabeled score of a head vector under the tables."""
    n = len(heads) - 1
    total = 0.0
    for m in range(1, n + 1):
        total += tables.arc[heads[m], m]
    if order == 2:
        sib = _require_sib(tables)
        for h, s, m in tree_sib_triples(heads):
            if h >= 1:  # position 0 has a single child, no sibling pairs
                total += sib[h, s, m]
    return float(total)
