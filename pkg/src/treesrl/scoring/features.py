"""Log-linear scorer over hashed sparse features.

Scores are plain dot products of a weight vector with hashed indicator
features of (head, modifier), (head, sibling, modifier), and
(head, modifier, label) tuples, so the gradient of any table cell is an
exact scatter of the incoming cell gradient onto that cell's feature
indices. No autodiff involved.

Feature hashing is FNV-1a over the template id and the template's
integer parts, masked to a power-of-two table. Collisions are accepted;
they act like weight tying.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from ..core import RoleInventory, Sentence
from ..chart import (ScoreTables, arc_legal_mask, label_allowed_mask,
                     sib_legal_mask)
from .base import NEG, ScorerForward, sanitize_grad
from .serialize import write_container

UNK_ID = 0
ROOT_ID = 1
N_SPECIALS = 2

_FNV_OFFSET = np.uint64(0xcbf29ce484222325)
_FNV_PRIME = np.uint64(0x100000001b3)

N_ARC_TEMPLATES = 4
N_SIB_TEMPLATES = 3
N_LABEL_TEMPLATES = 4


@dataclass(frozen=True)
class FeatureConfig:
    bits: int = 18
    seed: int = 0


def _bucket(delta):
    """Distance bucket: |delta| clipped to [1, 6]."""
    return np.clip(np.abs(delta), 1, 6)


class FeatureScorer:
    kind = "loglinear"

    def __init__(self, vocab_tokens, roles: RoleInventory,
                 config: FeatureConfig = FeatureConfig()):
        self.vocab_tokens = list(vocab_tokens)
        self.vocab = {tok: i + N_SPECIALS for i, tok in enumerate(self.vocab_tokens)}
        self.roles = roles
        self.config = config
        rng = np.random.default_rng(config.seed)
        size = 1 << config.bits
        self.weights = rng.uniform(-0.1, 0.1, size=size)
        self.grad = np.zeros(size)

    @classmethod
    def build(cls, corpus, config: FeatureConfig = FeatureConfig()):
        """Vocab and role inventory from a corpus of SrlAnnotations."""
        tokens = sorted({t for ann in corpus for t in ann.sentence.tokens})
        roles = RoleInventory(tuple(sorted(
            {a.role for ann in corpus for f in ann.frames for a in f.arguments})))
        return cls(tokens, roles, config)

    def word_ids(self, sentence: Sentence) -> np.ndarray:
        ids = [ROOT_ID] + [self.vocab.get(t, UNK_ID) for t in sentence.tokens]
        return np.asarray(ids, dtype=np.uint64)

    def _mix(self, *parts) -> np.ndarray:
        """FNV-1a over integer parts, masked to the table size."""
        h = np.asarray(_FNV_OFFSET)
        with np.errstate(over="ignore"):
            for p in parts:
                h = (h ^ np.asarray(p, dtype=np.uint64)) * _FNV_PRIME
        return (h & np.uint64((1 << self.config.bits) - 1)).astype(np.int64)

    def _arc_indices(self, W: np.ndarray) -> np.ndarray:
        wh, wm = W[:, None], W[None, :]
        pos = np.arange(len(W))
        dirn = (pos[:, None] < pos[None, :]).astype(np.uint64)
        dist = _bucket(pos[:, None] - pos[None, :]).astype(np.uint64)
        return np.stack([
            self._mix(1, wh, wm, dirn),
            self._mix(2, wh, dirn, dist),
            self._mix(3, wm, dirn, dist),
            self._mix(4, dirn, dist),
        ], axis=-1)

    def _sib_indices(self, W: np.ndarray) -> np.ndarray:
        k = len(W)
        wh, ws, wm = W[:, None, None], W[None, :, None], W[None, None, :]
        pos = np.arange(k)
        dhs = _bucket(pos[:, None, None] - pos[None, :, None]).astype(np.uint64)
        dsm = _bucket(pos[None, :, None] - pos[None, None, :]).astype(np.uint64)
        dirn = (pos[:, None, None] < pos[None, None, :]).astype(np.uint64)
        full = (k, k, k)
        terms = [self._mix(5, wh, ws, wm), self._mix(6, ws, wm),
                 self._mix(7, dhs, dsm, dirn)]
        return np.stack([np.broadcast_to(t, full) for t in terms], axis=-1)

    def _label_indices(self, W: np.ndarray) -> np.ndarray:
        k, L = len(W), self.roles.size
        wh, wm = W[:, None, None], W[None, :, None]
        lab = np.arange(L, dtype=np.uint64)[None, None, :]
        pos = np.arange(k)
        dirn = (pos[:, None] < pos[None, :]).astype(np.uint64)[:, :, None]
        dist = _bucket(pos[:, None] - pos[None, :]).astype(np.uint64)[:, :, None]
        full = (k, k, L)
        terms = [self._mix(8, wm, lab), self._mix(9, wh, wm, lab),
                 self._mix(10, lab, dirn, dist), self._mix(11, wh, lab)]
        return np.stack([np.broadcast_to(t, full) for t in terms], axis=-1)

    def _tables(self, sentence: Sentence, need_sib: bool):
        n = sentence.n
        W = self.word_ids(sentence)

        arc_idx = self._arc_indices(W)
        arc = np.where(arc_legal_mask(n), self.weights[arc_idx].sum(-1), NEG)

        lab_idx = self._label_indices(W)
        logits = self.weights[lab_idx].sum(-1)
        logits = np.where(label_allowed_mask(n, self.roles.size), logits, NEG)
        mx = logits.max(axis=-1, keepdims=True)
        logp = logits - (mx + np.log(np.exp(logits - mx).sum(-1, keepdims=True)))

        sib_idx = sib = None
        if need_sib:
            sib_idx = self._sib_indices(W)
            sib = np.where(sib_legal_mask(n), self.weights[sib_idx].sum(-1), NEG)

        tables = ScoreTables(arc=arc, sib=sib, label_logp=logp,
                             labels=self.roles.labels)
        return tables, (arc_idx, sib_idx, lab_idx)

    def loglinear_score(self, sentence: Sentence,
                        need_sib: bool = False) -> ScoreTables:
        return self._tables(sentence, need_sib)[0]

    def forward(self, sentence: Sentence, need_sib: bool = False) -> ScorerForward:
        tables, (arc_idx, sib_idx, lab_idx) = self._tables(sentence, need_sib)

        def scatter(idx, d):
            k = idx.shape[-1]
            np.add.at(self.grad, idx.reshape(-1), np.repeat(d.reshape(-1), k))

        def backward(d_arc, d_sib, d_label):
            scatter(arc_idx, sanitize_grad(d_arc, tables.arc))
            if d_label is not None:
                g = sanitize_grad(d_label, tables.label_logp)
                # chain rule through the row log-softmax
                dlogits = g - np.exp(tables.label_logp) * g.sum(-1, keepdims=True)
                scatter(lab_idx, dlogits)
            if d_sib is not None and sib_idx is not None:
                scatter(sib_idx, sanitize_grad(d_sib, tables.sib))

        return ScorerForward(tables=tables, _backward=backward)

    # parameter plumbing shared with the optimizer

    def param_arrays(self):
        return {"weights": self.weights}

    def grad_arrays(self):
        return {"weights": self.grad}

    def zero_grad(self):
        self.grad.fill(0.0)

    def save(self, path, extra_meta=None):
        meta = {"kind": self.kind, "config": asdict(self.config),
                "vocab": self.vocab_tokens, "roles": list(self.roles.roles)}
        meta.update(extra_meta or {})
        write_container(path, self.param_arrays(), meta)

    @classmethod
    def from_arrays(cls, arrays, meta):
        scorer = cls(meta["vocab"], RoleInventory(tuple(meta["roles"])),
                     FeatureConfig(**meta["config"]))
        if arrays["weights"].shape != scorer.weights.shape:
            raise ValueError("checkpoint weight table has the wrong size")
        scorer.weights = arrays["weights"]
        scorer.grad = np.zeros_like(scorer.weights)
        return scorer
