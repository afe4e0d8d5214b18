"""Neural scorer: windowed feed-forward encoder with biaffine arc,
triaffine sibling, and per-label biaffine heads.

Representations are position-wise: each position sees the embeddings of
a width-3 token window through one tanh layer. Position 0 carries a
learned root embedding; out-of-vocabulary tokens share the UNK row and
window positions off either end share the PAD row.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from ..core import RoleInventory, Sentence
from ..chart import (ScoreTables, arc_legal_mask, label_allowed_mask,
                     sib_legal_mask)
from . import autodiff as ad
from .base import NEG, ScorerForward, sanitize_grad
from .serialize import write_container

UNK_ID = 0
ROOT_ID = 1
PAD_ID = 2
N_SPECIALS = 3


@dataclass(frozen=True)
class NeuralConfig:
    dim_embed: int = 32
    dim_hidden: int = 64
    dim_arc: int = 64
    dim_label: int = 64
    dim_sib: int = 32
    seed: int = 0


class NeuralScorer:
    kind = "neural"

    def __init__(self, vocab_tokens, roles: RoleInventory,
                 config: NeuralConfig = NeuralConfig()):
        self.vocab_tokens = list(vocab_tokens)
        self.vocab = {tok: i + N_SPECIALS for i, tok in enumerate(self.vocab_tokens)}
        self.roles = roles
        self.config = config
        rng = np.random.default_rng(config.seed)
        de, dh = config.dim_embed, config.dim_hidden
        da, dl, ds = config.dim_arc, config.dim_label, config.dim_sib
        L = roles.size

        def u(*shape):
            return ad.param(rng.uniform(-0.1, 0.1, size=shape))

        self.params = {
            "emb": u(len(self.vocab_tokens) + N_SPECIALS, de),
            "enc_w": u(3 * de, dh), "enc_b": u(dh),
            "arc_head_w": u(dh, da), "arc_head_b": u(da),
            "arc_mod_w": u(dh, da), "arc_mod_b": u(da),
            "arc_biaf": u(da + 1, da + 1),
            "sib_head_w": u(dh, ds), "sib_head_b": u(ds),
            "sib_sib_w": u(dh, ds), "sib_sib_b": u(ds),
            "sib_mod_w": u(dh, ds), "sib_mod_b": u(ds),
            "sib_triaf": u(ds + 1, ds + 1, ds + 1),
            "lab_head_w": u(dh, dl), "lab_head_b": u(dl),
            "lab_mod_w": u(dh, dl), "lab_mod_b": u(dl),
            "lab_biaf": u(L, dl + 1, dl + 1),
        }

    @classmethod
    def build(cls, corpus, config: NeuralConfig = NeuralConfig()):
        """Vocab and role inventory from a corpus of SrlAnnotations."""
        tokens = sorted({t for ann in corpus for t in ann.sentence.tokens})
        roles = RoleInventory(tuple(sorted(
            {a.role for ann in corpus for f in ann.frames for a in f.arguments})))
        return cls(tokens, roles, config)

    def token_ids(self, sentence: Sentence) -> np.ndarray:
        ids = [ROOT_ID] + [self.vocab.get(t, UNK_ID) for t in sentence.tokens]
        return np.asarray(ids, dtype=np.int64)

    def _mlp(self, h, prefix):
        w, b = self.params[prefix + "_w"], self.params[prefix + "_b"]
        return ad.tanh(ad.add(ad.matmul(h, w), b))

    @staticmethod
    def _augment(r):
        ones = ad.const(np.ones((r.shape[0], 1)))
        return ad.concat([r, ones], axis=1)

    def encode(self, sentence: Sentence):
        """(n+1, dim_hidden) contextual representations, position 0 = root."""
        ids = self.token_ids(sentence)
        left = np.concatenate([[PAD_ID], ids[:-1]])
        right = np.concatenate([ids[1:], [PAD_ID]])
        emb = self.params["emb"]
        x = ad.concat([ad.gather_rows(emb, left), ad.gather_rows(emb, ids),
                       ad.gather_rows(emb, right)], axis=1)
        return ad.tanh(ad.add(ad.matmul(x, self.params["enc_w"]),
                              self.params["enc_b"]))

    def score_arcs(self, h):
        rh = self._augment(self._mlp(h, "arc_head"))
        rm = self._augment(self._mlp(h, "arc_mod"))
        return ad.matmul(ad.matmul(rh, self.params["arc_biaf"]), ad.transpose(rm))

    def score_siblings(self, h):
        rh = self._augment(self._mlp(h, "sib_head"))
        rs = self._augment(self._mlp(h, "sib_sib"))
        rm = self._augment(self._mlp(h, "sib_mod"))
        return ad.trilinear(rh, rs, rm, self.params["sib_triaf"])

    def score_labels(self, h, n: int):
        rh = self._augment(self._mlp(h, "lab_head"))
        rm = self._augment(self._mlp(h, "lab_mod"))
        logits = ad.label_bilinear(rh, rm, self.params["lab_biaf"])
        mask = np.where(label_allowed_mask(n, self.roles.size), 0.0, NEG)
        return ad.log_softmax(ad.add(logits, ad.const(mask)))

    def forward(self, sentence: Sentence, need_sib: bool = False) -> ScorerForward:
        n = sentence.n
        h = self.encode(sentence)
        arc_t = self.score_arcs(h)
        lab_t = self.score_labels(h, n)
        sib_t = self.score_siblings(h) if need_sib else None

        arc = np.where(arc_legal_mask(n), arc_t.data, NEG)
        sib = np.where(sib_legal_mask(n), sib_t.data, NEG) if need_sib else None
        tables = ScoreTables(arc=arc, sib=sib, label_logp=lab_t.data.copy(),
                             labels=self.roles.labels)

        def backward(d_arc, d_sib, d_label):
            terms = [ad.inject(arc_t, sanitize_grad(d_arc, arc))]
            if d_label is not None:
                terms.append(ad.inject(
                    lab_t, sanitize_grad(d_label, tables.label_logp)))
            if d_sib is not None and sib_t is not None:
                terms.append(ad.inject(sib_t, sanitize_grad(d_sib, sib)))
            total = terms[0]
            for t in terms[1:]:
                total = ad.add(total, t)
            total.backward(np.float64(1.0))

        return ScorerForward(tables=tables, _backward=backward)

    # parameter plumbing shared with the optimizer

    def param_arrays(self):
        return {k: t.data for k, t in self.params.items()}

    def grad_arrays(self):
        return {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for k, t in self.params.items()}

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def save(self, path, extra_meta=None):
        meta = {"kind": self.kind, "config": asdict(self.config),
                "vocab": self.vocab_tokens, "roles": list(self.roles.roles)}
        meta.update(extra_meta or {})
        write_container(path, self.param_arrays(), meta)

    @classmethod
    def from_arrays(cls, arrays, meta):
        scorer = cls(meta["vocab"], RoleInventory(tuple(meta["roles"])),
                     NeuralConfig(**meta["config"]))
        for k, t in scorer.params.items():
            if k not in arrays or arrays[k].shape != t.data.shape:
                raise ValueError(f"checkpoint array {k} missing or misshaped")
            t.data = arrays[k]
        return scorer
