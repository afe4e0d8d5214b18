"""The enumeration oracle itself: tree counts, projectivity, limits."""

import numpy as np
import pytest

from treesrl.core import DepTree, TooLarge
from treesrl.oracle import (MAX_N, brute_best, brute_logZ, count_projective,
                            enumerate_trees)

from helpers import random_tables

# single-root projective trees over n tokens: OEIS A005043-adjacent series
# starting 1, 2, 7, 30, 143 (each tree has exactly one child of position 0)
EXPECTED_COUNTS = {1: 1, 2: 2, 3: 7, 4: 30, 5: 143}


class TestEnumerateTrees:
    def test_known_counts(self):
        for n, want in EXPECTED_COUNTS.items():
            assert len(list(enumerate_trees(n))) == want

    def test_count_projective_agrees_with_enumeration(self):
        for n in range(1, 7):
            assert count_projective(n) == len(list(enumerate_trees(n)))

    def test_every_tree_validates(self):
        for t in enumerate_trees(4):
            t.validate()
            assert sum(h == 0 for h in t.heads[1:]) == 1

    def test_no_duplicates(self):
        trees = [t.heads for t in enumerate_trees(5)]
        assert len(trees) == len(set(trees))

    def test_root_filter_partitions_the_space(self):
        for n in range(1, 6):
            total = sum(len(list(enumerate_trees(n, root=p)))
                        for p in range(1, n + 1))
            assert total == EXPECTED_COUNTS.get(n, count_projective(n))
            for p in range(1, n + 1):
                for t in enumerate_trees(n, root=p):
                    assert t.heads[p] == 0

    def test_limit_guard(self):
        with pytest.raises(TooLarge):
            list(enumerate_trees(MAX_N + 1))
        with pytest.raises(TooLarge):
            brute_logZ(random_tables(3, seed=0), limit=2)


class TestBruteScores:
    def test_logZ_permutation_invariance(self):
        # relabeling token scores consistently permutes trees, not the sum
        t = random_tables(4, seed=3)
        rev = t.arc.copy()
        idx = [0, 4, 3, 2, 1]
        rev = rev[np.ix_(idx, idx)]
        from treesrl.chart import ScoreTables
        mirrored = ScoreTables(arc=rev, sib=None, label_logp=None,
                               labels=None)
        plain = ScoreTables(arc=t.arc, sib=None, label_logp=None,
                            labels=None)
        assert brute_logZ(mirrored, order=1) == pytest.approx(
            brute_logZ(plain, order=1), abs=1e-9)

    def test_best_ties_break_lexicographically(self):
        from helpers import zero_tables
        t = zero_tables(4)
        tree, score = brute_best(t, order=1)
        all_heads = sorted(bt.heads for bt in enumerate_trees(4))
        assert tree.heads == all_heads[0]
        assert score == pytest.approx(0.0, abs=1e-12)
