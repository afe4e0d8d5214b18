"""1-best decoding against the brute-force maximum, predicate prediction,
label assignment, and the parse composition."""

import numpy as np
import pytest

from treesrl.chart import ScoreTables, arc_legal_mask, score_tree
from treesrl.core import Sentence
from treesrl.decode import (DecodeConfig, Infeasible, PREDICT, assign_labels,
                            eisner_decode, parse, predict_predicates)
from treesrl import oracle

from helpers import (NEG, running_annotation, normalize_logits, random_tables,
                     zero_tables)

TOL = 1e-9


class TestEisnerDecode:
    def test_single_token(self):
        t = random_tables(1, seed=1)
        tree, score = eisner_decode(t, predicate=1)
        assert tree.heads == (-1, 0)
        assert score == pytest.approx(t.arc[0, 1], abs=TOL)

    def test_crafted_scores_recover_the_drawn_tree(self):
        # reward exactly the arcs of the running example's tree
        n = 6
        arc = np.where(arc_legal_mask(n), 0.0, NEG)
        for h, m in ((0, 2), (2, 1), (2, 4), (4, 3), (4, 5), (2, 6)):
            arc[h, m] = 5.0
        t = ScoreTables(arc=arc, sib=None, label_logp=None, labels=None)
        tree, score = eisner_decode(t, predicate=2)
        assert tree.heads == (-1, 2, 0, 4, 2, 4, 2)
        assert score == pytest.approx(30.0, abs=TOL)

    def test_matches_brute_force_both_orders(self):
        rng = np.random.default_rng(2)
        for trial in range(40):
            n = int(rng.integers(1, 8))
            t = random_tables(n, seed=trial)
            p = int(rng.integers(1, n + 1))
            for order in (1, 2):
                for root in (None, p):
                    tree, score = eisner_decode(t, predicate=root,
                                                order=order)
                    bt, bs = oracle.brute_best(t, order=order, root=root)
                    assert score == pytest.approx(bs, abs=TOL)
                    assert tree.heads == bt.heads
                    assert score == pytest.approx(
                        score_tree(tree.heads, t, order=order), abs=TOL)

    def test_score_is_recomputable_from_tree(self):
        t = random_tables(6, seed=7)
        tree, score = eisner_decode(t, predicate=3, order=2)
        assert score == pytest.approx(score_tree(tree.heads, t, order=2),
                                      abs=TOL)

    def test_root_restriction_is_respected(self):
        t = random_tables(5, seed=8)
        for p in range(1, 6):
            tree, _ = eisner_decode(t, predicate=p)
            assert tree.heads[p] == 0
            assert sum(h == 0 for h in tree.heads[1:]) == 1

    def test_masked_root_arc_is_infeasible(self):
        t = zero_tables(3)
        arc = t.arc.copy()
        arc[0, 2] = NEG
        dead = ScoreTables(arc=arc, sib=t.sib, label_logp=t.label_logp,
                           labels=t.labels)
        with pytest.raises(Infeasible):
            eisner_decode(dead, predicate=2)

    def test_shift_invariance_of_argmax(self):
        rng = np.random.default_rng(9)
        for trial in range(10):
            n = int(rng.integers(2, 7))
            t = random_tables(n, seed=50 + trial)
            shifted = ScoreTables(
                arc=np.where(np.isfinite(t.arc), t.arc + 3.17, NEG),
                sib=t.sib, label_logp=t.label_logp, labels=t.labels)
            t0, _ = eisner_decode(t, predicate=1)
            t1, _ = eisner_decode(shifted, predicate=1)
            assert t0.heads == t1.heads

    def test_ties_break_deterministically_to_smaller_heads(self):
        # all-zero scores leave every tree tied; lexicographically smallest
        # head vector must win
        t = zero_tables(4)
        tree, _ = eisner_decode(t, predicate=1)
        trees = [bt for bt in oracle.enumerate_trees(4, root=1)]
        best = min(bt.heads for bt in trees)
        assert tree.heads == best


class TestPredicatePrediction:
    def _tables(self, n, prd_rows):
        # build root-label log-probs preferring PRD exactly on prd_rows
        labels = ("NULL", "PRD", "A0")
        logits = np.full((n + 1, n + 1, 3), NEG)
        logits[0, 1:, 0] = 0.0
        logits[0, 1:, 1] = -1.0
        for j in prd_rows:
            logits[0, j, 0] = -1.0
            logits[0, j, 1] = 0.0
        arc = np.where(arc_legal_mask(n), 0.0, NEG)
        return ScoreTables(arc=arc, sib=None,
                           label_logp=normalize_logits(logits), labels=labels)

    def test_prd_preferring_rows_are_returned(self):
        assert predict_predicates(self._tables(6, [2])) == [2]
        assert predict_predicates(self._tables(6, [2, 5])) == [2, 5]

    def test_all_null_yields_empty(self):
        assert predict_predicates(self._tables(4, [])) == []

    def test_exact_tie_resolves_to_null(self):
        n = 3
        labels = ("NULL", "PRD")
        logits = np.full((n + 1, n + 1, 2), NEG)
        logits[0, 1:, :] = 0.0  # exact tie everywhere
        arc = np.where(arc_legal_mask(n), 0.0, NEG)
        t = ScoreTables(arc=arc, sib=None,
                        label_logp=normalize_logits(logits), labels=labels)
        assert predict_predicates(t) == []


class TestAssignLabels:
    def test_gold_favoring_labels_on_drawn_tree(self):
        n = 6
        labels = ("NULL", "PRD", "A0", "A1")
        logits = np.full((n + 1, n + 1, 4), 0.0)
        logits[0, 2, 1] = 4.0   # PRD at the predicate
        logits[2, 1, 2] = 4.0   # A0 on They
        logits[2, 4, 3] = 4.0   # A1 on do
        logits[2, 6, 0] = 4.0   # NULL on .
        arc = np.where(arc_legal_mask(n), 0.0, NEG)
        t = ScoreTables(arc=arc, sib=None,
                        label_logp=normalize_logits(logits), labels=labels)
        tree, _ = eisner_decode(
            ScoreTables(arc=_favor_running_arcs(), sib=None, label_logp=None,
                        labels=None), predicate=2)
        labeled = assign_labels(tree, t, predicate=2)
        assert labeled.labels[2] == "PRD"
        assert labeled.labels[1] == "A0"
        assert labeled.labels[4] == "A1"
        assert labeled.labels[6] == "NULL"
        assert labeled.labels[3] is None and labeled.labels[5] is None

    def test_uniform_scores_pick_first_index(self):
        n = 2
        labels = ("NULL", "PRD", "A0", "A1")
        logits = np.zeros((n + 1, n + 1, 4))
        arc = np.where(arc_legal_mask(n), 0.0, NEG)
        t = ScoreTables(arc=arc, sib=None,
                        label_logp=normalize_logits(logits), labels=labels)
        tree, _ = eisner_decode(t, predicate=1)
        labeled = assign_labels(tree, t, predicate=1)
        # position 2 hangs off the predicate; tie goes to the first label
        assert labeled.labels[2] == "NULL"


class TestParse:
    def test_gold_predicates_on_running_example(self):
        ann = running_annotation()
        t = random_tables(6, seed=13)
        out = parse(ann.sentence, t,
                    DecodeConfig(order=1, predicates=(2,)))
        assert len(out.frames) == 1
        assert out.frames[0].predicate == 2

    def test_predict_mode_all_null_gives_empty_annotation(self):
        s = Sentence(tokens=("a", "b", "c"))
        n = 3
        labels = ("NULL", "PRD")
        logits = np.full((n + 1, n + 1, 2), NEG)
        logits[0, 1:, 0] = 0.0
        logits[0, 1:, 1] = -2.0
        logits[1:, :, :] = 0.0
        arc = np.where(arc_legal_mask(n), 0.0, NEG)
        t = ScoreTables(arc=arc, sib=None,
                        label_logp=normalize_logits(logits), labels=labels)
        out = parse(s, t, DecodeConfig(order=1, predicates=PREDICT))
        assert out.frames == ()

    def test_two_predicates_decode_independently(self):
        s = Sentence(tokens=tuple("abcdef"))
        t = random_tables(6, seed=14)
        out = parse(s, t, DecodeConfig(order=1, predicates=(2, 5)))
        assert [f.predicate for f in out.frames] == [2, 5]

    def test_recovered_frames_are_valid(self):
        rng = np.random.default_rng(15)
        for trial in range(15):
            n = int(rng.integers(2, 8))
            s = Sentence(tokens=tuple(f"w{i}" for i in range(1, n + 1)))
            t = random_tables(n, seed=60 + trial)
            p = int(rng.integers(1, n + 1))
            out = parse(s, t, DecodeConfig(order=1, predicates=(p,)))
            # construction already validates; spans must tile inside [1, n]
            for f in out.frames:
                for a in f.arguments:
                    assert 1 <= a.start <= a.end <= n


def _favor_running_arcs():
    arc = np.where(arc_legal_mask(6), 0.0, NEG)
    for h, m in ((0, 2), (2, 1), (2, 4), (4, 3), (4, 5), (2, 6)):
        arc[h, m] = 5.0
    return arc
