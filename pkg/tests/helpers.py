"""Shared builders for the test suite: the running 6-token example
("They want to do more .", predicate at 2, A0=[1,1], A1=[3,5]),
random score tables, and random valid frames."""

import numpy as np

from treesrl.core import (Argument, PredicateFrame, Sentence, SrlAnnotation,
                          partition)
from treesrl.convert import ForestConstraints, LATENT
from treesrl.chart import (ScoreTables, arc_legal_mask, label_allowed_mask,
                           sib_legal_mask)

NEG = float("-inf")

RUNNING_TOKENS = ("They", "want", "to", "do", "more", ".")


def running_frame() -> PredicateFrame:
    return PredicateFrame(predicate=2, arguments=(
        Argument(start=1, end=1, role="A0"),
        Argument(start=3, end=5, role="A1")))


def running_annotation() -> SrlAnnotation:
    return SrlAnnotation(sentence=Sentence(tokens=RUNNING_TOKENS),
                         frames=(running_frame(),))


def running_constraints(variant: str = LATENT) -> ForestConstraints:
    ann = running_annotation()
    return ForestConstraints(partition(ann.sentence, ann.frames[0]), variant)


def normalize_logits(logits: np.ndarray) -> np.ndarray:
    mx = logits.max(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore"):
        out = logits - (mx + np.log(np.exp(logits - mx).sum(-1,
                                                            keepdims=True)))
    return np.where(np.isnan(out), NEG, out)


def random_tables(n: int, labels=("NULL", "PRD", "A0", "A1", "A2"), seed: int = 0,
                  arc_scale: float = 2.0) -> ScoreTables:
    """Dense random tables with every illegal cell masked. `labels` must
    start with NULL, PRD (the inventory layout)."""
    rng = np.random.default_rng(seed)
    L = len(labels)
    arc = np.where(arc_legal_mask(n),
                   rng.uniform(-arc_scale, arc_scale, (n + 1, n + 1)), NEG)
    sib = np.where(sib_legal_mask(n),
                   rng.uniform(-1.0, 1.0, (n + 1,) * 3), NEG)
    logits = np.where(label_allowed_mask(n, L),
                      rng.uniform(-1.0, 1.0, (n + 1, n + 1, L)), NEG)
    return ScoreTables(arc=arc, sib=sib, label_logp=normalize_logits(logits),
                       labels=tuple(labels))


def zero_tables(n: int, labels=("NULL", "PRD", "A0", "A1", "A2"),
                zero_labels: bool = True) -> ScoreTables:
    """Legal arcs and siblings scored 0. With `zero_labels` the label table
    is all-zero on allowed cells (deliberately unnormalized, for counting
    trees); otherwise it is the uniform distribution."""
    L = len(labels)
    arc = np.where(arc_legal_mask(n), 0.0, NEG)
    sib = np.where(sib_legal_mask(n), 0.0, NEG)
    allowed = label_allowed_mask(n, L)
    if zero_labels:
        logp = np.where(allowed, 0.0, NEG)
    else:
        logp = normalize_logits(np.where(allowed, 0.0, NEG))
    return ScoreTables(arc=arc, sib=sib, label_logp=logp, labels=tuple(labels))


def random_frame(n: int, rng, roles=("A0", "A1", "A2")) -> PredicateFrame:
    """A uniformly scattered valid frame: pick p, then greedily place
    0..3 disjoint spans avoiding p."""
    p = int(rng.integers(1, n + 1))
    free = [i for i in range(1, n + 1) if i != p]
    rng.shuffle(free)
    spans = []
    used = {p}
    for start in free:
        if len(spans) == 3 or start in used:
            continue
        end = start
        while end + 1 <= n and end + 1 not in used and rng.random() < 0.5:
            end += 1
        spans.append(Argument(start=start, end=end,
                              role=str(rng.choice(roles))))
        used.update(range(start, end + 1))
        if rng.random() < 0.4:
            break
    args = tuple(sorted(spans, key=lambda a: a.start))
    return PredicateFrame(predicate=p, arguments=args)
