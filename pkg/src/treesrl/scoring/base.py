"""Shared scorer-side plumbing."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..chart import ScoreTables

NEG = float("-inf")


@dataclass
class ScorerForward:
    """One sentence's score tables plus the hook to push table-level
    gradients back into the scorer parameters.

    ``backward`` takes gradients of the loss with respect to the arc,
    sibling, and label tables (any may be None) and accumulates into the
    scorer's parameter gradient buffers. Entries at masked (-inf) cells
    are ignored.
    """

    tables: ScoreTables
    _backward: Optional[Callable] = field(repr=False, default=None)

    def backward(self, d_arc, d_sib=None, d_label=None):
        self._backward(d_arc, d_sib, d_label)


def sanitize_grad(d, ref):
    """Zero gradient entries wherever the reference table is -inf."""
    if d is None:
        return None
    return np.where(np.isfinite(ref), d, 0.0)
