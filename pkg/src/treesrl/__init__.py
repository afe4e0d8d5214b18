"""Span-style semantic role labeling as latent-tree dependency parsing."""

from .core import (ARG, NONARG, NULL_LABEL, PRD_LABEL, PRED, Argument,
                   DepTree, OutOfBounds, OverlappingArguments,
                   PredicateFrame, PredicateInsideArgument, RoleInventory,
                   Segment, Sentence, SpanPartition, SrlAnnotation, TooLarge,
                   TreeSrlError, partition, validate_frame)
from .convert import (FIRST, FLAT, LAST, LATENT, ForestConstraints,
                      enumerate_forest, flat_tree, headword_dependencies,
                      is_valid_tree, recover_frame)
from .chart import (AllMasked, ChartResult, EmptyForest, ScoreTables,
                    inside1, inside1_constrained, inside2,
                    inside2_constrained, marginals, score_tree)

__version__ = "0.1.0"
