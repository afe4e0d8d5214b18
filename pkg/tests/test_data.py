"""JSONL and props round trips, golden files, and the evaluation metric."""

import io
import os

import pytest

from treesrl.core import (Argument, PredicateFrame, Sentence, SrlAnnotation,
                          TreeSrlError)
from treesrl.data import (AlignmentError, ColumnCountMismatch, EvalReport,
                          SchemaError, UnbalancedBrackets, annotation_from_obj,
                          annotation_to_obj, evaluate, read_jsonl, read_props,
                          write_jsonl, write_props)

from helpers import running_annotation

import synthdata

FIX = os.path.join(os.path.dirname(__file__), "fixtures")


def ann_of(tokens, *frames):
    return SrlAnnotation(
        sentence=Sentence(tokens=tuple(tokens)),
        frames=tuple(PredicateFrame(
            predicate=p, arguments=tuple(
                Argument(start=s, end=e, role=r) for s, e, r in args))
            for p, args in frames))


class TestJsonl:
    def test_round_trip_is_identity(self):
        corpus = synthdata.synth_corpus(25, seed=1)
        buf = io.StringIO()
        write_jsonl(buf, corpus)
        buf.seek(0)
        back = list(read_jsonl(buf))
        assert back == corpus

    def test_golden_file_read(self):
        anns = list(read_jsonl(os.path.join(FIX, "running.jsonl")))
        assert len(anns) == 1
        want = running_annotation()
        assert anns[0].sentence.tokens == want.sentence.tokens
        assert anns[0].frames == want.frames

    def test_golden_file_write_is_byte_exact(self, tmp_path):
        anns = list(read_jsonl(os.path.join(FIX, "running.jsonl")))
        out = tmp_path / "out.jsonl"
        with open(out, "w") as fh:
            write_jsonl(fh, anns)
        assert out.read_bytes() == \
            open(os.path.join(FIX, "running.jsonl"), "rb").read()

    def test_object_mapping_key_order(self):
        obj = annotation_to_obj(running_annotation())
        assert list(obj) == ["tokens", "frames"]
        back = annotation_from_obj(obj)
        assert back == running_annotation()

    def test_schema_errors_carry_line_numbers(self):
        buf = io.StringIO('{"tokens": ["a"], "frames": []}\n{"tokens": 3}\n')
        with pytest.raises(SchemaError) as exc:
            list(read_jsonl(buf))
        assert "line 2" in str(exc.value)

    def test_invalid_frame_rejected_at_parse(self):
        buf = io.StringIO(
            '{"tokens": ["a", "b"], "frames": '
            '[{"predicate": 1, "args": '
            '[{"start": 1, "end": 2, "role": "A0"}]}]}\n')
        with pytest.raises(SchemaError):
            list(read_jsonl(buf))


class TestProps:
    def test_round_trip_is_identity(self, tmp_path):
        corpus = synthdata.synth_corpus(25, seed=2)
        path = tmp_path / "c.props"
        write_props(str(path), corpus)
        back = list(read_props(str(path)))
        for a, b in zip(corpus, back):
            assert a.sentence.tokens == b.sentence.tokens
            assert a.frames == b.frames
        # and a second write reproduces the same bytes
        path2 = tmp_path / "c2.props"
        write_props(str(path2), back)
        assert path.read_bytes() == path2.read_bytes()

    def test_golden_block_parses_to_running_example(self):
        anns = list(read_props(os.path.join(FIX, "running.props")))
        want = running_annotation()
        assert anns[0].frames == want.frames
        assert anns[0].sentence.tokens == want.sentence.tokens

    def test_golden_write_matches_fixture(self, tmp_path):
        anns = list(read_props(os.path.join(FIX, "running.props")))
        out = tmp_path / "w.props"
        write_props(str(out), anns)
        assert out.read_bytes() == \
            open(os.path.join(FIX, "running.props"), "rb").read()

    def test_close_binds_to_its_own_row(self):
        # a block whose A1 bracket closes on the final row yields [3, 6]:
        # the closing row is inside the span
        anns = list(read_props(
            os.path.join(FIX, "running_close_on_period.props")))
        a1 = [a for a in anns[0].frames[0].arguments if a.role == "A1"]
        assert a1[0].start == 3 and a1[0].end == 6

    def test_two_frame_block(self):
        anns = list(read_props(os.path.join(FIX, "pair.props")))
        assert len(anns) == 2
        assert [f.predicate for f in anns[1].frames] == [2, 5]

    def test_frames_sorted_by_predicate_on_read(self, tmp_path):
        # writer emits one column per frame ordered by predicate; a frame
        # list arriving unsorted still round-trips into sorted order
        ann = ann_of("abcdef",
                     (5, [(6, 6, "A1")]),
                     (2, [(1, 1, "A0")]))
        path = tmp_path / "s.props"
        write_props(str(path), [ann])
        back = list(read_props(str(path)))[0]
        assert [f.predicate for f in back.frames] == [2, 5]

    def test_unbalanced_brackets_rejected(self, tmp_path):
        path = tmp_path / "bad.props"
        path.write_text("a  -  (A0*\nb  b  (V*)\n\n")
        with pytest.raises(UnbalancedBrackets):
            list(read_props(str(path)))

    def test_column_count_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.props"
        path.write_text("a  -  (A0*)\nb  b\n\n")
        with pytest.raises(ColumnCountMismatch):
            list(read_props(str(path)))

    def test_missing_predicate_rejected(self, tmp_path):
        path = tmp_path / "bad.props"
        path.write_text("a  -  (A0*)\nb  -  *\n\n")
        with pytest.raises(TreeSrlError):
            list(read_props(str(path)))

    def test_two_predicates_in_one_column_rejected(self, tmp_path):
        path = tmp_path / "bad.props"
        path.write_text("a  a  (V*)\nb  b  (V*)\n\n")
        with pytest.raises(TreeSrlError):
            list(read_props(str(path)))


class TestEvaluate:
    def g(self):
        return [ann_of("abcdef", (2, [(1, 1, "A0"), (3, 5, "A1")]))]

    def test_perfect_match(self):
        r = evaluate(self.g(), self.g())
        assert (r.precision, r.recall, r.f1, r.cm) == (100.0,) * 4

    def test_half_recall(self):
        pred = [ann_of("abcdef", (2, [(1, 1, "A0")]))]
        r = evaluate(self.g(), pred)
        assert r.precision == pytest.approx(100.0)
        assert r.recall == pytest.approx(50.0)
        assert r.f1 == pytest.approx(200.0 / 3.0)
        assert r.cm == 0.0

    def test_wrong_role_counts_both_ways(self):
        pred = [ann_of("abcdef", (2, [(1, 1, "A2"), (3, 5, "A1")]))]
        r = evaluate(self.g(), pred)
        assert r.matched == 1
        assert r.predicted == 2 and r.gold == 2

    def test_wrong_span_counts_both_ways(self):
        pred = [ann_of("abcdef", (2, [(1, 2, "A0"), (3, 5, "A1")]))]
        r = evaluate(self.g(), pred)
        assert r.matched == 1

    def test_spurious_predicate_penalizes_itself_and_args(self):
        pred = [ann_of("abcdef", (2, [(1, 1, "A0"), (3, 5, "A1")]),
                       (6, [(1, 2, "A0")]))]
        r = evaluate(self.g(), pred)
        # spurious frame adds 1 (the predicate) + 1 (its argument)
        assert r.predicted == 4 and r.gold == 2 and r.matched == 2
        assert r.cm == 100.0  # the one gold predicate is matched exactly

    def test_missed_predicate_penalizes_recall(self):
        gold = [ann_of("abcdef", (2, [(1, 1, "A0")]), (6, []))]
        pred = [ann_of("abcdef", (2, [(1, 1, "A0")]))]
        r = evaluate(gold, pred)
        assert r.gold == 2 and r.predicted == 1 and r.matched == 1
        # an absent frame counts as an empty argument set, so the zero-arg
        # gold frame still matches completely
        assert r.cm == 100.0

    def test_missed_predicate_with_arguments_breaks_cm(self):
        gold = [ann_of("abcdef", (2, [(1, 1, "A0")]), (6, [(1, 1, "A1")]))]
        pred = [ann_of("abcdef", (2, [(1, 1, "A0")]))]
        r = evaluate(gold, pred)
        assert r.cm == 50.0

    def test_vacuous_empty_frame_match_counts_for_cm(self):
        gold = [ann_of("abcdef", (2, []))]
        r = evaluate(gold, gold)
        assert r.cm == 100.0
        assert r.gold == 0 and r.predicted == 0
        assert r.f1 == 0.0  # 0/0 convention

    def test_symmetry_swapping_gold_and_pred(self):
        gold = [ann_of("abcdef", (2, [(1, 1, "A0"), (3, 5, "A1")]), (6, []))]
        pred = [ann_of("abcdef", (2, [(1, 1, "A0"), (4, 5, "A1")]),
                       (3, [(1, 2, "A2")]))]
        r1 = evaluate(gold, pred)
        r2 = evaluate(pred, gold)
        assert r1.precision == pytest.approx(r2.recall)
        assert r1.recall == pytest.approx(r2.precision)
        assert r1.f1 == pytest.approx(r2.f1)

    def test_sentence_order_must_align(self):
        gold = self.g()
        pred = [ann_of("abcdefg", (2, []))]
        with pytest.raises(AlignmentError):
            evaluate(gold, pred)

    def test_frame_order_does_not_matter(self):
        gold = [ann_of("abcdef", (2, [(1, 1, "A0")]), (5, [(6, 6, "A1")]))]
        pred = [ann_of("abcdef", (5, [(6, 6, "A1")]), (2, [(1, 1, "A0")]))]
        r = evaluate(gold, pred)
        assert r.f1 == 100.0 and r.cm == 100.0

    def test_report_dict_fields(self):
        r = evaluate(self.g(), self.g())
        d = r.as_dict()
        assert set(d) == {"precision", "recall", "f1", "cm", "matched",
                          "predicted", "gold"}
