"""Core domain types: sentences, frames, span partitions, dependency trees.

Positions are 1-based everywhere in the public API; position 0 is the
artificial root of dependency trees. Spans are inclusive on both ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field

NULL_LABEL = "NULL"  # non-argument attachment (the empty role)
PRD_LABEL = "PRD"    # label of the root -> predicate arc

# segment kinds of a span partition
ARG = "arg"
NONARG = "nonarg"
PRED = "pred"


class TreeSrlError(Exception):
    """Base class for all library errors."""


class OutOfBounds(TreeSrlError):
    pass


class OverlappingArguments(TreeSrlError):
    pass


class PredicateInsideArgument(TreeSrlError):
    pass


class MalformedTree(TreeSrlError):
    pass


class TooLarge(TreeSrlError):
    """Raised by exhaustive enumeration guards on oversized inputs."""


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]
    lemmas: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.lemmas is not None:
            object.__setattr__(self, "lemmas", tuple(self.lemmas))
        if len(self.tokens) == 0:
            raise OutOfBounds("sentence must contain at least one token")
        if self.lemmas is not None and len(self.lemmas) != len(self.tokens):
            raise OutOfBounds("lemmas length differs from tokens length")

    @property
    def n(self) -> int:
        return len(self.tokens)

    def token(self, pos: int) -> str:
        """Token at 1-based position pos."""
        if not 1 <= pos <= self.n:
            raise OutOfBounds(f"position {pos} outside [1, {self.n}]")
        return self.tokens[pos - 1]


@dataclass(frozen=True)
class Argument:
    start: int
    end: int
    role: str


@dataclass(frozen=True)
class PredicateFrame:
    predicate: int
    arguments: tuple[Argument, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "arguments", tuple(self.arguments))


@dataclass(frozen=True)
class SrlAnnotation:
    sentence: Sentence
    frames: tuple[PredicateFrame, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        preds = [f.predicate for f in self.frames]
        if len(set(preds)) != len(preds):
            raise OverlappingArguments(f"duplicate predicate positions: {preds}")


@dataclass(frozen=True)
class Segment:
    start: int
    end: int
    kind: str  # ARG | NONARG | PRED
    role: str | None = None


@dataclass(frozen=True)
class SpanPartition:
    """Tiling of [1, n] into PRED / ARG / NONARG segments for one frame."""

    predicate: int
    segments: tuple[Segment, ...]

    @property
    def n(self) -> int:
        return self.segments[-1].end

    def segment_of(self, pos: int) -> Segment:
        for seg in self.segments:
            if seg.start <= pos <= seg.end:
                return seg
        raise OutOfBounds(f"position {pos} not covered by partition")


@dataclass(frozen=True)
class RoleInventory:
    """Role label space. Full label order is [NULL, PRD, *roles]."""

    roles: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "roles", tuple(self.roles))
        if len(set(self.roles)) != len(self.roles):
            raise TreeSrlError(f"duplicate roles: {self.roles}")
        if NULL_LABEL in self.roles or PRD_LABEL in self.roles:
            raise TreeSrlError("NULL and PRD are reserved labels")

    @property
    def labels(self) -> tuple[str, ...]:
        return (NULL_LABEL, PRD_LABEL) + self.roles

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise TreeSrlError(f"unknown label {label!r}") from None

    @property
    def size(self) -> int:
        return len(self.roles) + 2


@dataclass(frozen=True)
class DepTree:
    """Dependency tree over positions 1..n with artificial root 0.

    heads has length n+1 with heads[0] = -1 as a sentinel; labels, when
    present, has length n+1 with labels[0] = None and labels[m] naming the
    arc heads[m] -> m (None means unlabeled). Construction does not
    validate; call validate() where structure is untrusted.
    """

    heads: tuple[int, ...]
    labels: tuple[str | None, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "heads", tuple(self.heads))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def n(self) -> int:
        return len(self.heads) - 1

    def children(self, h: int) -> list[int]:
        return [m for m in range(1, self.n + 1) if self.heads[m] == h]

    def descendants(self, h: int) -> list[int]:
        """All positions in the subtree rooted at h, excluding h itself."""
        out, stack = [], [h]
        kids = [[] for _ in range(self.n + 1)]
        for m in range(1, self.n + 1):
            hm = self.heads[m]
            if 0 <= hm <= self.n:
                kids[hm].append(m)
        while stack:
            x = stack.pop()
            for c in kids[x]:
                out.append(c)
                stack.append(c)
        return out

    def subtree_span(self, h: int) -> tuple[int, int]:
        """Smallest interval containing h and its descendants."""
        desc = self.descendants(h)
        lo = min([h] + desc)
        hi = max([h] + desc)
        return lo, hi

    def validate(self) -> None:
        """Raise MalformedTree unless this is a projective tree rooted at 0."""
        n = self.n
        if n < 1 or self.heads[0] != -1:
            raise MalformedTree("heads[0] must be the -1 sentinel")
        for m in range(1, n + 1):
            if not 0 <= self.heads[m] <= n:
                raise MalformedTree(f"head of {m} out of range: {self.heads[m]}")
            if self.heads[m] == m:
                raise MalformedTree(f"self-loop at {m}")
        # acyclic and connected to 0
        for m in range(1, n + 1):
            seen = set()
            x = m
            while x != 0:
                if x in seen:
                    raise MalformedTree(f"cycle through {m}")
                seen.add(x)
                x = self.heads[x]
        # projective: every position strictly between h and m descends from h
        for m in range(1, n + 1):
            h = self.heads[m]
            lo, hi = (h, m) if h < m else (m, h)
            for x in range(lo + 1, hi):
                y = x
                while y != 0 and y != h:
                    y = self.heads[y]
                if y != h:
                    raise MalformedTree(f"arc {h}->{m} crosses {x}")

    def is_projective_tree(self) -> bool:
        try:
            self.validate()
        except MalformedTree:
            return False
        return True


def validate_frame(sentence: Sentence, frame: PredicateFrame) -> None:
    """Check bounds, pairwise span disjointness, and predicate placement."""
    n = sentence.n
    p = frame.predicate
    if not 1 <= p <= n:
        raise OutOfBounds(f"predicate {p} outside [1, {n}]")
    for a in frame.arguments:
        if not (1 <= a.start <= a.end <= n):
            raise OutOfBounds(f"span [{a.start}, {a.end}] outside [1, {n}]")
        if a.start <= p <= a.end:
            raise PredicateInsideArgument(
                f"predicate {p} inside argument [{a.start}, {a.end}] {a.role}")
    args = sorted(frame.arguments, key=lambda a: (a.start, a.end))
    for prev, cur in zip(args, args[1:]):
        if cur.start <= prev.end:
            raise OverlappingArguments(
                f"[{prev.start}, {prev.end}] overlaps [{cur.start}, {cur.end}]")


def partition(sentence: Sentence, frame: PredicateFrame) -> SpanPartition:
    """Tile [1, n] into the frame's ARG spans, the PRED singleton, and
    maximal NONARG runs in between."""
    validate_frame(sentence, frame)
    n = sentence.n
    p = frame.predicate
    blocks = [(a.start, a.end, ARG, a.role) for a in frame.arguments]
    blocks.append((p, p, PRED, None))
    blocks.sort()
    segments = []
    pos = 1
    for start, end, kind, role in blocks:
        if pos < start:
            segments.append(Segment(pos, start - 1, NONARG))
        segments.append(Segment(start, end, kind, role))
        pos = end + 1
    if pos <= n:
        segments.append(Segment(pos, n, NONARG))
    return SpanPartition(predicate=p, segments=tuple(segments))
