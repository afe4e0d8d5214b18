"""Span-constrained TreeCRF training.

The per-frame objective is the negative log-probability of the frame's
constrained forest under the full tree distribution,

    loss(p) = log Z(x) - log N(x, p),

where N sums over trees compatible with the frame's span partition and
carries role log-probabilities folded onto the predicate's and root's
arcs. Z is label-free: labels are locally normalized per arc, so
summing them out contributes exactly zero to the denominator.

Since root arcs of non-predicate positions never appear in any
constrained numerator, frames alone provide no NULL supervision for
them; an auxiliary cross-entropy over root-arc labels (PRD at
predicates, NULL elsewhere) closes that gap. Its weight is a knob;
0 disables it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .core import (ARG, NULL_LABEL, PRD_LABEL, PredicateFrame, Sentence,
                   SpanPartition, TreeSrlError, partition)
from .convert import LATENT, VARIANTS, ForestConstraints
from .chart import (AllMasked, ScoreTables, inside1, inside2,
                    inside1_constrained, inside2_constrained, marginals)
from .data import EvalReport, evaluate
from .decode import PREDICT, DecodeConfig, parse
from .scoring import FeatureConfig, FeatureScorer, NeuralConfig, NeuralScorer


class NonFiniteLoss(TreeSrlError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    order: int = 1
    variant: str = LATENT
    scorer: str = "loglinear"
    lr: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.9
    eps: float = 1e-8
    epochs: int = 20
    patience: int = 3
    seed: int = 0
    aux_weight: float = 1.0
    batch_tokens: int = 64

    def __post_init__(self):
        if self.lr <= 0:
            raise TreeSrlError("learning rate must be positive")
        if self.epochs <= 0:
            raise TreeSrlError("epochs must be positive")
        if self.order not in (1, 2):
            raise TreeSrlError(f"order must be 1 or 2, got {self.order}")
        if self.variant not in VARIANTS:
            raise TreeSrlError(f"unknown variant {self.variant!r}")
        if self.scorer not in ("loglinear", "neural"):
            raise TreeSrlError(f"unknown scorer {self.scorer!r}")
        if self.patience < 0:
            raise TreeSrlError("patience must be >= 0")
        if self.batch_tokens < 1:
            raise TreeSrlError("batch_tokens must be >= 1")


def frame_loss(sentence: Sentence, frame: PredicateFrame, tables: ScoreTables,
               order: int = 1, variant: str = LATENT,
               log_z: float | None = None) -> float:
    """-log P(T_p | x): full log-partition minus the labeled constrained
    numerator. Pass a precomputed log_z to share it across frames."""
    cons = ForestConstraints(partition(sentence, frame), variant)
    if log_z is None:
        log_z = inside1(tables) if order == 1 else inside2(tables)
    num = (inside1_constrained if order == 1 else inside2_constrained)(
        tables, cons)
    return log_z - num


def _aux_targets(n: int, predicates, labels) -> np.ndarray:
    """Root-arc label target per position (1..n)."""
    t = np.full(n + 1, labels.index(NULL_LABEL), dtype=np.int64)
    prd = labels.index(PRD_LABEL)
    for p in predicates:
        t[p] = prd
    return t


def sentence_loss(annotation, tables: ScoreTables, config: TrainConfig) -> float:
    """Sum of frame losses plus the auxiliary root-label cross-entropy."""
    sent = annotation.sentence
    total = 0.0
    if annotation.frames:
        log_z = inside1(tables) if config.order == 1 else inside2(tables)
        for f in annotation.frames:
            total += frame_loss(sent, f, tables, order=config.order,
                                variant=config.variant, log_z=log_z)
    if config.aux_weight:
        t = _aux_targets(sent.n, (f.predicate for f in annotation.frames),
                         tables.labels)
        cols = np.arange(1, sent.n + 1)
        total -= config.aux_weight * tables.label_logp[0, cols, t[cols]].sum()
    return total


def _fold_label_ids(part: SpanPartition, labels) -> np.ndarray:
    """Label id folded onto the predicate's arc to each position."""
    lids = np.full(part.n + 1, labels.index(NULL_LABEL), dtype=np.int64)
    for seg in part.segments:
        if seg.kind == ARG:
            lids[seg.start:seg.end + 1] = labels.index(seg.role)
    return lids


def sentence_gradients(annotation, tables: ScoreTables, config: TrainConfig):
    """Loss plus its gradient with respect to every table cell.

    The gradient of each frame term is (full marginals) - (constrained
    marginals); constrained arc marginals double as the gradient of the
    label log-probs folded onto those arcs.
    """
    sent = annotation.sentence
    n = sent.n
    L = len(tables.labels)
    d_arc = np.zeros((n + 1, n + 1))
    d_sib = np.zeros((n + 1, n + 1, n + 1)) if config.order == 2 else None
    d_label = np.zeros((n + 1, n + 1, L))
    loss = 0.0
    if annotation.frames:
        full = marginals(tables, order=config.order)
        prd_id = tables.labels.index(PRD_LABEL)
        for frame in annotation.frames:
            part = partition(sent, frame)
            cons = ForestConstraints(part, config.variant)
            con = marginals(tables, order=config.order, constraints=cons)
            loss += full.log_z - con.log_z
            d_arc += full.arc_marginals - con.arc_marginals
            if d_sib is not None:
                d_sib += full.sib_marginals - con.sib_marginals
            p = frame.predicate
            d_label[0, p, prd_id] -= con.arc_marginals[0, p]
            lids = _fold_label_ids(part, tables.labels)
            cols = np.arange(1, n + 1)
            cols = cols[cols != p]
            d_label[p, cols, lids[cols]] -= con.arc_marginals[p, cols]
    if config.aux_weight:
        t = _aux_targets(n, (f.predicate for f in annotation.frames),
                         tables.labels)
        cols = np.arange(1, n + 1)
        loss -= config.aux_weight * tables.label_logp[0, cols, t[cols]].sum()
        d_label[0, cols, t[cols]] -= config.aux_weight
    return loss, d_arc, d_sib, d_label


class Adam:
    """Adaptive moment estimation with bias correction."""

    def __init__(self, params: dict, lr: float, beta1: float = 0.9,
                 beta2: float = 0.9, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            m, v = self.m[k], self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def build_scorer(corpus, config: TrainConfig):
    if config.scorer == "neural":
        return NeuralScorer.build(corpus, NeuralConfig(seed=config.seed))
    return FeatureScorer.build(corpus, FeatureConfig(seed=config.seed))


def predict_corpus(scorer, corpus, order: int = 1,
                   gold_predicates: bool = False):
    """Parse every sentence end to end, returning SrlAnnotations."""
    need_sib = order == 2
    out = []
    for ann in corpus:
        tables = scorer.forward(ann.sentence, need_sib=need_sib).tables
        preds = (tuple(f.predicate for f in ann.frames)
                 if gold_predicates else PREDICT)
        out.append(parse(ann.sentence, tables,
                         DecodeConfig(order=order, predicates=preds)))
    return out


def _token_batches(corpus, indices, budget):
    batches, cur, cur_tokens = [], [], 0
    for i in indices:
        k = corpus[i].sentence.n
        if cur and cur_tokens + k > budget:
            batches.append(cur)
            cur, cur_tokens = [], 0
        cur.append(i)
        cur_tokens += k
    if cur:
        batches.append(cur)
    return batches


@dataclass
class TrainResult:
    scorer: object
    history: list
    best_epoch: int
    best_dev_f1: float
    config: TrainConfig


def train(train_corpus, dev_corpus, config: TrainConfig,
          scorer=None, on_epoch=None) -> TrainResult:
    """Minimize mean sentence loss with Adam; after each epoch measure
    end-to-end dev F1, keep the best parameters, and stop once
    `patience` epochs pass without improvement. `on_epoch`, if given,
    receives each history entry as it is produced."""
    train_corpus, dev_corpus = list(train_corpus), list(dev_corpus)
    if not train_corpus or not dev_corpus:
        raise TreeSrlError("training and dev corpora must be non-empty")
    if scorer is None:
        scorer = build_scorer(train_corpus, config)
    opt = Adam(scorer.param_arrays(), lr=config.lr, beta1=config.beta1,
               beta2=config.beta2, eps=config.eps)
    rng = np.random.default_rng(config.seed)
    need_sib = config.order == 2

    best = {k: v.copy() for k, v in scorer.param_arrays().items()}
    best_f1, best_epoch = -1.0, 0
    history = []
    for epoch in range(1, config.epochs + 1):
        order_idx = rng.permutation(len(train_corpus))
        epoch_loss, n_sents = 0.0, 0
        for batch in _token_batches(train_corpus, order_idx,
                                    config.batch_tokens):
            scorer.zero_grad()
            scale = 1.0 / len(batch)
            for i in batch:
                ann = train_corpus[i]
                fwd = scorer.forward(ann.sentence, need_sib=need_sib)
                try:
                    loss, d_arc, d_sib, d_label = sentence_gradients(
                        ann, fwd.tables, config)
                except AllMasked as exc:
                    # diverged parameters surface as NaN/inf score tables
                    raise NonFiniteLoss(
                        f"epoch {epoch}, sentence {i}: {exc}") from exc
                if not math.isfinite(loss):
                    raise NonFiniteLoss(
                        f"epoch {epoch}, sentence {i}: loss {loss!r}")
                fwd.backward(d_arc * scale,
                             None if d_sib is None else d_sib * scale,
                             d_label * scale)
                epoch_loss += loss
                n_sents += 1
            opt.step(scorer.param_arrays(), scorer.grad_arrays())
        dev_pred = predict_corpus(scorer, dev_corpus, order=config.order)
        report = evaluate(dev_corpus, dev_pred)
        history.append({"epoch": epoch, "train_loss": epoch_loss / n_sents,
                        "dev_f1": report.f1, "dev_cm": report.cm})
        if on_epoch is not None:
            on_epoch(history[-1])
        if report.f1 > best_f1:
            best_f1, best_epoch = report.f1, epoch
            best = {k: v.copy() for k, v in scorer.param_arrays().items()}
        if epoch - best_epoch >= config.patience:
            break
    for k, v in scorer.param_arrays().items():
        v[...] = best[k]
    return TrainResult(scorer=scorer, history=history, best_epoch=best_epoch,
                       best_dev_f1=best_f1, config=config)


def checkpoint_meta(result: TrainResult) -> dict:
    # keyed "train_config" so it cannot shadow the scorer's own "config"
    return {"train_config": asdict(result.config), "seed": result.config.seed,
            "epoch": result.best_epoch, "dev_f1": result.best_dev_f1,
            "order": result.config.order, "variant": result.config.variant}
