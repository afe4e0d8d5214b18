"""Scorers that turn sentences into ScoreTables, plus checkpoint IO."""

from .base import ScorerForward
from .heads import NeuralConfig, NeuralScorer
from .features import FeatureConfig, FeatureScorer
from .serialize import CheckpointError, read_container, write_container

SCORER_KINDS = {
    NeuralScorer.kind: NeuralScorer,
    FeatureScorer.kind: FeatureScorer,
}


def save_scorer(scorer, path, extra_meta=None):
    scorer.save(path, extra_meta)


def load_scorer(path):
    """Reconstruct a scorer from a checkpoint, returning (scorer, meta)."""
    arrays, meta = read_container(path)
    kind = meta.get("kind")
    if kind not in SCORER_KINDS:
        raise CheckpointError(f"unknown scorer kind {kind!r}")
    return SCORER_KINDS[kind].from_arrays(arrays, meta), meta


__all__ = [
    "ScorerForward", "NeuralConfig", "NeuralScorer", "FeatureConfig",
    "FeatureScorer", "CheckpointError", "read_container", "write_container",
    "SCORER_KINDS", "save_scorer", "load_scorer",
]
