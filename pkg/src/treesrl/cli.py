"""Command-line entry point: convert, train, parse, evaluate, induce,
and check subcommands over the library.

Exit codes: 0 success, 1 input or configuration error, 2 verification
failure (check found a chart/oracle mismatch). JSONL streams support
"-" for stdin/stdout; props requires real files. Progress and metrics
go to stderr, data to the output path.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .core import (DepTree, RoleInventory, Sentence, SrlAnnotation,
                   TreeSrlError, partition)
from .convert import ForestConstraints, LATENT, VARIANTS, flat_tree, recover_frame
from .chart import (ScoreTables, arc_legal_mask, label_allowed_mask,
                    sib_legal_mask, inside1, inside2, inside1_constrained,
                    inside2_constrained)
from .decode import PREDICT, DecodeConfig, eisner_decode
from .decode import parse as decode_parse
from .data import (annotation_to_obj, evaluate, read_jsonl, read_props,
                   write_jsonl, write_props, SchemaError)
from .train import TrainConfig, checkpoint_meta, train as run_train
from .scoring import load_scorer
from . import oracle

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISMATCH = 2

NEG = float("-inf")

_DEFAULTS = {
    "order": 1, "variant": LATENT, "scorer": "loglinear", "lr": 0.1,
    "beta1": 0.9, "beta2": 0.9, "eps": 1e-8, "epochs": 20, "patience": 3,
    "seed": 0, "aux_weight": 1.0, "batch_tokens": 64, "threads": 1,
    "limit": 10,
}
_KEY_TYPES = {"order": int, "variant": str, "scorer": str, "lr": float,
              "beta1": float, "beta2": float, "eps": float, "epochs": int,
              "patience": int, "seed": int, "aux_weight": float,
              "batch_tokens": int, "threads": int, "limit": int}


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; our contract reserves 2 for
    verification failures, so remap usage errors to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _read_config_file(path: str) -> dict:
    table = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise TreeSrlError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _KEY_TYPES:
                raise TreeSrlError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                table[key] = _KEY_TYPES[key](value)
            except ValueError as exc:
                raise TreeSrlError(f"{path}:{lineno}: bad value for {key}: "
                                   f"{value!r}") from exc
    return table


class Settings:
    """Resolved option values; precedence flag > config file > default."""

    def __init__(self, args):
        self._args = args
        self._file = (_read_config_file(args.config)
                      if getattr(args, "config", None) else {})

    def __getattr__(self, key):
        value = getattr(self._args, key, None)
        if value is not None:
            return value
        if key in self._file:
            return self._file[key]
        if key in _DEFAULTS:
            return _DEFAULTS[key]
        raise AttributeError(key)

    def train_config(self) -> TrainConfig:
        return TrainConfig(order=self.order, variant=self.variant,
                           scorer=self.scorer, lr=self.lr, beta1=self.beta1,
                           beta2=self.beta2, eps=self.eps, epochs=self.epochs,
                           patience=self.patience, seed=self.seed,
                           aux_weight=self.aux_weight,
                           batch_tokens=self.batch_tokens)


# ---------------------------------------------------------------------------
# IO helpers

def _open_in(path: str):
    return sys.stdin if path == "-" else open(path, "r", encoding="utf-8")


def _open_out(path: str):
    return sys.stdout if path == "-" else open(path, "w", encoding="utf-8")


def _is_props(path: str, fmt: str) -> bool:
    if fmt == "props":
        return True
    if fmt == "jsonl":
        return False
    return path.endswith(".props")


def _read_corpus(path: str, fmt: str = "auto"):
    if _is_props(path, fmt):
        if path == "-":
            raise TreeSrlError("props format requires a file path")
        return list(read_props(path))
    with _open_in(path) as fh:
        return list(read_jsonl(fh))


def _write_corpus(path: str, anns, fmt: str = "auto"):
    if _is_props(path, fmt):
        if path == "-":
            raise TreeSrlError("props format requires a file path")
        write_props(path, anns)
    else:
        fh = _open_out(path)
        try:
            write_jsonl(fh, anns)
        finally:
            if fh is not sys.stdout:
                fh.close()


# ---------------------------------------------------------------------------
# convert

def _constraints_obj(cons: ForestConstraints) -> dict:
    return {"variant": cons.variant,
            "segments": [{"start": s.start, "end": s.end, "kind": s.kind,
                          "role": s.role} for s in cons.partition.segments]}


def _tree_record(ann: SrlAnnotation, variant: str) -> dict:
    obj = {"tokens": list(ann.sentence.tokens)}
    if ann.sentence.lemmas is not None:
        obj["lemmas"] = list(ann.sentence.lemmas)
    trees = []
    for frame in ann.frames:
        cons = ForestConstraints(partition(ann.sentence, frame), variant)
        tree = flat_tree(cons)
        trees.append({"predicate": frame.predicate,
                      "heads": list(tree.heads[1:]),
                      "labels": list(tree.labels[1:]),
                      "constraints": _constraints_obj(cons)})
    obj["trees"] = trees
    return obj


def _record_to_annotation(obj: dict) -> SrlAnnotation:
    tokens = obj.get("tokens")
    if not isinstance(tokens, list) or not tokens:
        raise SchemaError("'tokens' must be a non-empty list")
    n = len(tokens)
    lemmas = obj.get("lemmas")
    sentence = Sentence(tokens=tuple(tokens),
                        lemmas=tuple(lemmas) if lemmas else None)
    frames = []
    for tobj in obj.get("trees", []):
        heads = tobj.get("heads")
        labels = tobj.get("labels")
        p = tobj.get("predicate")
        if (not isinstance(heads, list) or len(heads) != n
                or not isinstance(labels, list) or len(labels) != n
                or not isinstance(p, int)):
            raise SchemaError("tree record needs predicate plus heads and "
                              "labels lists aligned with tokens")
        tree = DepTree(heads=(-1,) + tuple(heads),
                       labels=(None,) + tuple(labels))
        frames.append(recover_frame(tree, p))
    return SrlAnnotation(sentence=sentence, frames=tuple(frames))


def cmd_convert(args) -> int:
    cfg = Settings(args)
    fin = _open_in(args.input)
    fout = _open_out(args.output)
    try:
        if args.direction == "srl2trees":
            for ann in read_jsonl(fin):
                fout.write(json.dumps(_tree_record(ann, cfg.variant),
                                      ensure_ascii=False) + "\n")
        else:
            for lineno, line in enumerate(fin, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    ann = _record_to_annotation(obj)
                except json.JSONDecodeError as exc:
                    raise SchemaError(f"line {lineno}: invalid JSON: {exc}") from exc
                except TreeSrlError as exc:
                    raise SchemaError(f"line {lineno}: {exc}") from None
                fout.write(json.dumps(annotation_to_obj(ann),
                                      ensure_ascii=False) + "\n")
    finally:
        if fin is not sys.stdin:
            fin.close()
        if fout is not sys.stdout:
            fout.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# train / parse / evaluate

def cmd_train(args) -> int:
    cfg = Settings(args)
    train_corpus = _read_corpus(args.train, args.format)
    dev_corpus = _read_corpus(args.dev, args.format)
    tconf = cfg.train_config()

    def log(h):
        print(f"epoch {h['epoch']}: train_loss {h['train_loss']:.4f} "
              f"dev_f1 {h['dev_f1']:.2f} dev_cm {h['dev_cm']:.2f}",
              file=sys.stderr)

    result = run_train(train_corpus, dev_corpus, tconf, on_epoch=log)
    result.scorer.save(args.model, extra_meta=checkpoint_meta(result))
    print(f"best epoch {result.best_epoch}: dev_f1 {result.best_dev_f1:.2f}; "
          f"saved {args.model}", file=sys.stderr)
    return EXIT_OK


def cmd_parse(args) -> int:
    cfg = Settings(args)
    scorer, meta = load_scorer(args.model)
    order = args.order if args.order is not None else int(meta.get("order", 1))
    gold = bool(args.gold_predicates)
    need_sib = order == 2

    def parse_one(ann):
        tables = scorer.forward(ann.sentence, need_sib=need_sib).tables
        preds = (tuple(f.predicate for f in ann.frames) if gold else PREDICT)
        return decode_parse(ann.sentence, tables,
                            DecodeConfig(order=order, predicates=preds))

    fin = _open_in(args.input)
    fout = _open_out(args.output)
    count = 0
    t0 = time.perf_counter()
    try:
        anns = read_jsonl(fin)
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                results = pool.map(parse_one, anns)
                for parsed in results:
                    fout.write(json.dumps(annotation_to_obj(parsed),
                                          ensure_ascii=False) + "\n")
                    count += 1
        else:
            for ann in anns:
                fout.write(json.dumps(annotation_to_obj(parse_one(ann)),
                                      ensure_ascii=False) + "\n")
                count += 1
    finally:
        if fin is not sys.stdin:
            fin.close()
        if fout is not sys.stdout:
            fout.close()
    dt = time.perf_counter() - t0
    rate = count / dt if dt > 0 else float("inf")
    print(f"parsed {count} sentences in {dt:.2f}s ({rate:.1f} sentences/s)",
          file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    gold = _read_corpus(args.gold, args.format)
    pred = _read_corpus(args.pred, args.format)
    report = evaluate(gold, pred)
    out = {k: (round(v, 2) if isinstance(v, float) else v)
           for k, v in report.as_dict().items()}
    print(json.dumps(out))
    return EXIT_OK


# ---------------------------------------------------------------------------
# induce

def cmd_induce(args) -> int:
    cfg = Settings(args)
    scorer, meta = load_scorer(args.model)
    order = args.order if args.order is not None else int(meta.get("order", 1))
    corpus = _read_corpus(args.input, "jsonl")
    records = []
    for ann in corpus:
        tables = scorer.forward(ann.sentence, need_sib=order == 2).tables
        tree, _ = eisner_decode(tables, predicate=None, order=order)
        records.append({"tokens": list(ann.sentence.tokens),
                        "heads": list(tree.heads[1:])})
    fout = _open_out(args.output)
    try:
        for rec in records:
            fout.write(json.dumps(rec, ensure_ascii=False) + "\n")
    finally:
        if fout is not sys.stdout:
            fout.close()
    if args.reference:
        matched = total = 0
        with _open_in(args.reference) as fh:
            refs = [json.loads(line) for line in fh if line.strip()]
        if len(refs) != len(records):
            raise TreeSrlError(f"reference has {len(refs)} records, "
                               f"output has {len(records)}")
        for rec, ref in zip(records, refs):
            ref_heads = ref.get("heads")
            if not isinstance(ref_heads, list) or len(ref_heads) != len(rec["heads"]):
                raise TreeSrlError("reference heads misaligned with output")
            total += len(ref_heads)
            matched += sum(a == b for a, b in zip(rec["heads"], ref_heads))
        agreement = 100.0 * matched / total if total else 0.0
        print(f"agreement {agreement:.2f} ({matched}/{total} heads)",
              file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# check

def _random_tables(n: int, roles: RoleInventory, rng) -> ScoreTables:
    arc = np.where(arc_legal_mask(n), rng.uniform(-2.0, 2.0, (n + 1, n + 1)), NEG)
    sib = np.where(sib_legal_mask(n), rng.uniform(-1.0, 1.0, (n + 1,) * 3), NEG)
    L = roles.size
    logits = np.where(label_allowed_mask(n, L),
                      rng.uniform(-1.0, 1.0, (n + 1, n + 1, L)), NEG)
    mx = logits.max(axis=-1, keepdims=True)
    logp = logits - (mx + np.log(np.exp(logits - mx).sum(-1, keepdims=True)))
    return ScoreTables(arc=arc, sib=sib, label_logp=logp, labels=roles.labels)


def cmd_check(args) -> int:
    cfg = Settings(args)
    corpus = _read_corpus(args.input, args.format)
    roles = sorted({a.role for ann in corpus for f in ann.frames
                    for a in f.arguments})
    inv = RoleInventory(tuple(roles) if roles else ("A0",))
    tol = 1e-9
    checked = skipped = mismatches = 0
    for i, ann in enumerate(corpus):
        n = ann.sentence.n
        if n > cfg.limit:
            print(f"sentence {i + 1}: n={n} exceeds limit {cfg.limit}, skipped",
                  file=sys.stderr)
            skipped += 1
            continue
        rng = np.random.default_rng(cfg.seed * 1_000_003 + i)
        tables = _random_tables(n, inv, rng)
        want = {"inside1": oracle.brute_logZ(tables, order=1),
                "inside2": oracle.brute_logZ(tables, order=2)}
        best = {}
        for order in (1, 2):
            tree, score = oracle.brute_best(tables, order=order)
            best[order] = (tree.heads, score)
        frames = []
        for f in ann.frames:
            cons = ForestConstraints(partition(ann.sentence, f), cfg.variant)
            frames.append((f.predicate,
                           oracle.brute_logZ(tables, order=1, constraints=cons),
                           oracle.brute_logZ(tables, order=2, constraints=cons),
                           cons))
        if args.inject_fault:
            # negative control: corrupt one chart input after the oracle
            # has read it, so a healthy audit must report a mismatch
            arc = tables.arc.copy()
            legal = np.argwhere(np.isfinite(arc))
            h, m = legal[len(legal) // 2]
            arc[h, m] += 0.5
            tables = ScoreTables(arc=arc, sib=tables.sib,
                                 label_logp=tables.label_logp,
                                 labels=tables.labels)

        def report(name, got, expect):
            nonlocal mismatches
            if isinstance(got, float):
                ok = abs(got - expect) <= tol
            else:
                ok = got == expect
            if not ok:
                mismatches += 1
                print(f"sentence {i + 1}: {name}: chart {got!r} vs "
                      f"oracle {expect!r}", file=sys.stderr)

        report("inside1", inside1(tables), want["inside1"])
        report("inside2", inside2(tables), want["inside2"])
        for order in (1, 2):
            tree, score = eisner_decode(tables, predicate=None, order=order)
            report(f"decode{order} score", score, best[order][1])
            report(f"decode{order} heads", tree.heads, best[order][0])
        for p, num1, num2, cons in frames:
            report(f"inside1_constrained p={p}",
                   inside1_constrained(tables, cons), num1)
            report(f"inside2_constrained p={p}",
                   inside2_constrained(tables, cons), num2)
        checked += 1
    print(f"checked {checked} sentences ({skipped} skipped), "
          f"{mismatches} mismatches", file=sys.stderr)
    return EXIT_OK if mismatches == 0 else EXIT_MISMATCH


# ---------------------------------------------------------------------------
# wiring

def build_parser() -> _Parser:
    parser = _Parser(prog="treesrl",
                     description="Span SRL as latent-tree dependency parsing")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value settings file "
                       "(precedence: flag > file > default)")

    p = sub.add_parser("convert", help="convert between SRL and tree JSONL")
    common(p)
    p.add_argument("--direction", required=True,
                   choices=("srl2trees", "trees2srl"))
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", dest="output", default="-")
    p.add_argument("--variant", choices=VARIANTS)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="train a scorer")
    common(p)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--format", default="auto", choices=("auto", "jsonl", "props"))
    p.add_argument("--order", type=int, choices=(1, 2))
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--scorer", choices=("loglinear", "neural"))
    p.add_argument("--lr", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--aux-weight", dest="aux_weight", type=float)
    p.add_argument("--batch-tokens", dest="batch_tokens", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("parse", help="parse sentences with a trained model")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", dest="output", default="-")
    p.add_argument("--order", type=int, choices=(1, 2))
    p.add_argument("--gold-predicates", action="store_true",
                   help="take predicate positions from the input frames")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("evaluate", help="score predictions against gold")
    common(p)
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--format", default="auto", choices=("auto", "jsonl", "props"))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("induce", help="emit 1-best full trees")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", default="-")
    p.add_argument("--out", dest="output", default="-")
    p.add_argument("--order", type=int, choices=(1, 2))
    p.add_argument("--reference", help="tree JSONL to compute unlabeled "
                   "attachment agreement against")
    p.set_defaults(func=cmd_induce)

    p = sub.add_parser("check", help="audit chart quantities against the "
                       "enumeration oracle on small sentences")
    common(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", default="auto", choices=("auto", "jsonl", "props"))
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--limit", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--inject-fault", action="store_true",
                   help="corrupt one chart input to prove the audit catches it")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TreeSrlError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
