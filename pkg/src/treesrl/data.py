"""Corpus IO (JSON-lines and CoNLL-05-style props columns) and argument
evaluation.

All span indices are 1-based inclusive on the wire, matching the core
types. JSONL is the canonical format; props exists for interop with
bracket-style column files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .core import (Argument, PredicateFrame, Sentence, SrlAnnotation,
                   TreeSrlError, validate_frame)


class SchemaError(TreeSrlError):
    pass


class AlignmentError(TreeSrlError):
    pass


class UnbalancedBrackets(TreeSrlError):
    pass


class ColumnCountMismatch(TreeSrlError):
    pass


# ---------------------------------------------------------------------------
# JSONL

def _frame_to_obj(frame: PredicateFrame) -> dict:
    return {"predicate": frame.predicate,
            "args": [{"start": a.start, "end": a.end, "role": a.role}
                     for a in frame.arguments]}


def annotation_to_obj(ann: SrlAnnotation) -> dict:
    obj = {"tokens": list(ann.sentence.tokens)}
    if ann.sentence.lemmas is not None:
        obj["lemmas"] = list(ann.sentence.lemmas)
    obj["frames"] = [_frame_to_obj(f) for f in ann.frames]
    return obj


def annotation_from_obj(obj: dict) -> SrlAnnotation:
    if not isinstance(obj, dict):
        raise SchemaError("record is not an object")
    tokens = obj.get("tokens")
    if (not isinstance(tokens, list) or not tokens
            or not all(isinstance(t, str) for t in tokens)):
        raise SchemaError("'tokens' must be a non-empty list of strings")
    lemmas = obj.get("lemmas")
    if lemmas is not None:
        if (not isinstance(lemmas, list) or len(lemmas) != len(tokens)
                or not all(isinstance(t, str) for t in lemmas)):
            raise SchemaError("'lemmas' must be a string list aligned with 'tokens'")
        lemmas = tuple(lemmas)
    sentence = Sentence(tokens=tuple(tokens), lemmas=lemmas)
    frames = []
    for fobj in obj.get("frames", []):
        if not isinstance(fobj, dict) or not isinstance(fobj.get("predicate"), int):
            raise SchemaError("frame must be an object with an int 'predicate'")
        args = []
        for aobj in fobj.get("args", []):
            try:
                args.append(Argument(start=aobj["start"], end=aobj["end"],
                                     role=aobj["role"]))
            except (TypeError, KeyError) as exc:
                raise SchemaError(f"malformed argument {aobj!r}") from exc
        frame = PredicateFrame(predicate=fobj["predicate"], arguments=tuple(args))
        try:
            validate_frame(sentence, frame)
        except TreeSrlError as exc:
            raise SchemaError(str(exc)) from exc
        frames.append(frame)
    try:
        return SrlAnnotation(sentence=sentence, frames=tuple(frames))
    except TreeSrlError as exc:
        raise SchemaError(str(exc)) from exc


def read_jsonl(source):
    """Yield SrlAnnotations from a path or text file object."""
    close = False
    if isinstance(source, (str, bytes)):
        source = open(source, "r", encoding="utf-8")
        close = True
    try:
        for lineno, line in enumerate(source, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"line {lineno}: invalid JSON: {exc}") from exc
            try:
                yield annotation_from_obj(obj)
            except SchemaError as exc:
                raise SchemaError(f"line {lineno}: {exc}") from None
    finally:
        if close:
            source.close()


def write_jsonl(dest, annotations):
    close = False
    if isinstance(dest, (str, bytes)):
        dest = open(dest, "w", encoding="utf-8")
        close = True
    try:
        for ann in annotations:
            dest.write(json.dumps(annotation_to_obj(ann), ensure_ascii=False))
            dest.write("\n")
    finally:
        if close:
            dest.close()


# ---------------------------------------------------------------------------
# props (CoNLL-05 bracket columns)

def _parse_bracket_column(cells, block_no):
    """One frame column -> (predicate, arguments)."""
    predicate = None
    args = []
    open_role = open_start = None
    for i, cell in enumerate(cells):
        row = i + 1
        rest = cell
        while rest.startswith("("):
            end = rest.find("*")
            if end <= 1:
                raise UnbalancedBrackets(
                    f"block {block_no} row {row}: bad opening in {cell!r}")
            role = rest[1:end]
            rest = rest[end + 1:]
            if role == "V":
                if predicate is not None:
                    raise UnbalancedBrackets(
                        f"block {block_no}: two (V*) markers in one column")
                if not rest.startswith(")"):
                    raise UnbalancedBrackets(
                        f"block {block_no} row {row}: predicate must be (V*)")
                rest = rest[1:]
                predicate = row
                continue
            if open_role is not None:
                raise UnbalancedBrackets(
                    f"block {block_no} row {row}: nested span opening")
            open_role, open_start = role, row
            if rest.startswith(")"):
                rest = rest[1:]
                args.append(Argument(start=open_start, end=row, role=open_role))
                open_role = open_start = None
        if rest.startswith("*"):
            rest = rest[1:]
        elif cell.startswith("*") is False and cell.startswith("(") is False:
            raise UnbalancedBrackets(
                f"block {block_no} row {row}: unrecognized cell {cell!r}")
        if rest == ")":
            if open_role is None:
                raise UnbalancedBrackets(
                    f"block {block_no} row {row}: close without open")
            args.append(Argument(start=open_start, end=row, role=open_role))
            open_role = open_start = None
        elif rest:
            raise UnbalancedBrackets(
                f"block {block_no} row {row}: trailing text {rest!r} in {cell!r}")
    if open_role is not None:
        raise UnbalancedBrackets(f"block {block_no}: span never closed")
    if predicate is None:
        raise UnbalancedBrackets(f"block {block_no}: column has no (V*)")
    return predicate, tuple(args)


def _block_to_annotation(rows, block_no) -> SrlAnnotation:
    width = len(rows[0])
    if width < 2:
        raise ColumnCountMismatch(
            f"block {block_no}: need at least token and lemma columns")
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ColumnCountMismatch(
                f"block {block_no} row {i + 1}: {len(row)} columns, expected {width}")
    tokens = tuple(r[0] for r in rows)
    lemma_col = [r[1] for r in rows]
    frames = []
    for c in range(2, width):
        predicate, args = _parse_bracket_column([r[c] for r in rows], block_no)
        frames.append(PredicateFrame(predicate=predicate, arguments=args))
    frames.sort(key=lambda f: f.predicate)
    lemmas = None
    if any(x != "-" for x in lemma_col):
        lemmas = tuple(x if x != "-" else tokens[i]
                       for i, x in enumerate(lemma_col))
    sentence = Sentence(tokens=tokens, lemmas=lemmas)
    for f in frames:
        validate_frame(sentence, f)
    return SrlAnnotation(sentence=sentence, frames=tuple(frames))


def read_props(source):
    """Yield SrlAnnotations from a props-format path or file object."""
    close = False
    if isinstance(source, (str, bytes)):
        source = open(source, "r", encoding="utf-8")
        close = True
    try:
        rows, block_no = [], 0
        for line in source:
            line = line.rstrip("\n")
            if line.strip():
                rows.append(line.split())
            elif rows:
                block_no += 1
                yield _block_to_annotation(rows, block_no)
                rows = []
        if rows:
            yield _block_to_annotation(rows, block_no + 1)
    finally:
        if close:
            source.close()


def _frame_column(frame: PredicateFrame, n: int) -> list[str]:
    cells = ["*"] * n
    cells[frame.predicate - 1] = "(V*)"
    for a in frame.arguments:
        if a.start == a.end:
            cells[a.start - 1] = f"({a.role}*)"
        else:
            cells[a.start - 1] = f"({a.role}*"
            cells[a.end - 1] = "*)"
    return cells


def write_props(dest, annotations):
    """Write column-aligned props blocks: every column is padded to its
    widest cell and columns are joined by two spaces."""
    close = False
    if isinstance(dest, (str, bytes)):
        dest = open(dest, "w", encoding="utf-8")
        close = True
    try:
        for ann in annotations:
            sent = ann.sentence
            n = sent.n
            lemma_col = ["-"] * n
            for f in ann.frames:
                lemma_col[f.predicate - 1] = (
                    sent.lemmas[f.predicate - 1] if sent.lemmas
                    else sent.tokens[f.predicate - 1])
            cols = [list(sent.tokens), lemma_col]
            for f in sorted(ann.frames, key=lambda f: f.predicate):
                cols.append(_frame_column(f, n))
            widths = [max(len(c) for c in col) for col in cols]
            for i in range(n):
                line = "  ".join(col[i].ljust(w) for col, w in zip(cols, widths))
                dest.write(line.rstrip() + "\n")
            dest.write("\n")
    finally:
        if close:
            dest.close()


# ---------------------------------------------------------------------------
# evaluation

@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    cm: float
    matched: int
    predicted: int
    gold: int

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall,
                "f1": self.f1, "cm": self.cm, "matched": self.matched,
                "predicted": self.predicted, "gold": self.gold}


def _ratio(num: float, den: float) -> float:
    return 100.0 * num / den if den else 0.0


def evaluate(gold_corpus, pred_corpus) -> EvalReport:
    """Micro-averaged argument P/R/F1 over exact (predicate, span, role)
    tuples, plus the percentage of gold predicates whose predicted
    argument set is exactly correct (CM).

    A predicted frame whose predicate is absent from gold counts itself
    and all its arguments toward the predicted total only; a gold frame
    with no predicted counterpart counts itself toward the gold total.
    """
    gold_corpus, pred_corpus = list(gold_corpus), list(pred_corpus)
    if len(gold_corpus) != len(pred_corpus):
        raise AlignmentError(f"{len(gold_corpus)} gold vs "
                             f"{len(pred_corpus)} predicted sentences")
    matched = predicted = gold = 0
    cm_hits = cm_total = 0
    for idx, (g, p) in enumerate(zip(gold_corpus, pred_corpus)):
        if g.sentence.tokens != p.sentence.tokens:
            raise AlignmentError(f"sentence {idx + 1}: token mismatch")
        g_frames = {f.predicate: f for f in g.frames}
        p_frames = {f.predicate: f for f in p.frames}
        for pos, gf in g_frames.items():
            g_args = {(pos, a.start, a.end, a.role) for a in gf.arguments}
            gold += len(g_args)
            cm_total += 1
            pf = p_frames.get(pos)
            if pf is None:
                gold += 1  # frame itself was missed
                cm_hits += not g_args
                continue
            p_args = {(pos, a.start, a.end, a.role) for a in pf.arguments}
            predicted += len(p_args)
            matched += len(g_args & p_args)
            cm_hits += g_args == p_args
        for pos, pf in p_frames.items():
            if pos not in g_frames:
                predicted += len(pf.arguments) + 1  # frame itself is spurious
    precision = _ratio(matched, predicted)
    recall = _ratio(matched, gold)
    f1 = (2 * precision * recall / (precision + recall)
          if precision + recall else 0.0)
    return EvalReport(precision=precision, recall=recall, f1=f1,
                      cm=_ratio(cm_hits, cm_total), matched=matched,
                      predicted=predicted, gold=gold)
