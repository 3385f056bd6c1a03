"""Command-line surface tying the pipeline together.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Set BREAKSCORE_LOG=debug for verbose logging. Outputs are written atomically
(temp file + rename) and each command echoes its resolved configuration to
`<output>.config.yaml`.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import alignment, baseline, corruption, metrics, synth, tasks
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, dump_config, load_config
from .exceptions import BreakscoreError, DataError, NumericError, ParseError
from .ranks import Rank, rank_to_class
from .vocab import Vocabulary, build_vocab, encode

log = logging.getLogger("breakscore")


def _setup_logging():
    level = os.environ.get("BREAKSCORE_LOG", "info").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s %(message)s")


def write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _echo_config(cfg: RunConfig, out_path: str) -> None:
    write_atomic(out_path + ".config.yaml", dump_config(cfg))


def _read_vocab(path: str) -> Vocabulary:
    with open(path) as f:
        return Vocabulary.from_lines(f)


def _read_sequences(path: str) -> list[alignment.TokenSequence]:
    with open(path) as f:
        return alignment.read_sequences(f)


def _apply_overrides(cfg: RunConfig, args) -> None:
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    for flag, section, key in (
        ("epochs", "train", "epochs"),
        ("batch_size", "train", "batch_size"),
        ("lr", "train", "lr"),
        ("n_sentences", "synth", "n_sentences"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            getattr(cfg, section)[key] = value


# -- commands ----------------------------------------------------------------

def cmd_ingest(args) -> int:
    parse = alignment.parse_ctm if args.format == "ctm" else alignment.parse_tsv
    utts = []
    for path in args.inputs:
        with open(path) as f:
            try:
                utts.extend(parse(f))
            except ParseError as e:
                raise ParseError(f"{path}: {e}") from e
    seen = set()
    for u in utts:
        if u.id in seen:
            raise DataError(f"duplicate utterance id across files: {u.id!r}")
        seen.add(u.id)
    lines = [alignment.sequence_to_json(alignment.build_sequence(u)) for u in utts]
    write_atomic(args.out, "\n".join(lines) + ("\n" if lines else ""))
    log.info("ingested %d utterances -> %s", len(utts), args.out)
    return 0


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    scfg = cfg.build("synth")
    os.makedirs(args.out_dir, exist_ok=True)

    native = synth.generate_native(scfg)
    esl = synth.generate_esl(scfg, native)
    vocab = build_vocab(native)
    max_len = cfg.train.get("max_len", 128)
    rated = [synth.encode_rated(s, vocab, max_len=max_len) for s in esl]

    def out(name):
        return os.path.join(args.out_dir, name)

    write_atomic(out("native.jsonl"), "\n".join(alignment.sequence_to_json(s) for s in native) + "\n")
    write_atomic(out("vocab.tsv"), "\n".join(vocab.to_lines()) + "\n")
    write_atomic(out("esl.jsonl"), "\n".join(tasks.rated_to_json(r) for r in rated) + "\n")
    truth_lines = [
        json.dumps(
            {
                "id": s.seq.id,
                "words": list(s.seq.words),
                "breaks": [int(b) for b in s.seq.breaks],
                "overall": int(s.overall),
                "fine": [int(r) for r in s.fine],
                "trace": list(s.trace),
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        for s in esl
    ]
    write_atomic(out("esl_truth.jsonl"), "\n".join(truth_lines) + "\n")
    stats = {"native": synth.corpus_stats(native), "esl": synth.esl_stats(esl)}
    write_atomic(out("stats.json"), json.dumps(stats, indent=2, sort_keys=True) + "\n")
    _echo_config(cfg, out("synth"))
    log.info("synthesized %d native / %d esl utterances in %s", len(native), len(esl), args.out_dir)
    return 0


def cmd_corrupt(args) -> int:
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    ccfg = cfg.build("corruption")
    vocab = _read_vocab(args.vocab)
    seqs = _read_sequences(args.infile)
    max_len = cfg.train.get("max_len", 128)
    corpus = []
    for s in seqs:
        ids, mask = encode(s, vocab, max_len=max_len)
        corpus.append((s.id, ids, mask))
    dataset = corruption.build_pretrain_dataset(corpus, ccfg)
    write_atomic(args.out, "\n".join(corruption.labeled_to_json(s) for s in dataset) + "\n")
    _echo_config(cfg, args.out)
    n_corrupt = sum(s.label == corruption.LABEL_CORRUPTED for s in dataset)
    log.info("wrote %d samples (%d corrupted) -> %s", len(dataset), n_corrupt, args.out)
    return 0


def cmd_pretrain(args) -> int:
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    vocab = _read_vocab(args.vocab)
    with open(args.infile) as f:
        dataset = corruption.read_labeled(f)
    tcfg = cfg.build("train")
    enc_cfg = cfg.build("encoder", vocab_size=vocab.size)
    ckpt, report = tasks.pretrain_rbtd(dataset, tcfg, enc_cfg, vocab)
    save_checkpoint(ckpt, args.out)
    _echo_config(cfg, args.out)
    print(f"Discriminator held-out ({report['held_out']} samples):")
    print(f"  Accuracy {100 * report['accuracy']:.1f}%   F-score {100 * report['f_score']:.1f}%")
    return 0


def cmd_finetune(args) -> int:
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    vocab = _read_vocab(args.vocab)
    with open(args.infile) as f:
        dataset = tasks.read_rated(f)
    tcfg = cfg.build("train")
    init = load_checkpoint(args.init) if args.init else None
    if args.model == "bilstm":
        model_cfg = cfg.build("bilstm", vocab_size=vocab.size)
    else:
        model_cfg = cfg.build("encoder", vocab_size=vocab.size)
    fn = tasks.finetune_overall if args.task == "overall" else tasks.finetune_finegrained
    ckpt = fn(dataset, init, tcfg, model=args.model, model_cfg=model_cfg, vocab=vocab)
    save_checkpoint(ckpt, args.out)
    _echo_config(cfg, args.out)
    log.info("fine-tuned %s (%s) -> %s", args.task, args.model, args.out)
    return 0


def _load_truth(path: str):
    out = {}
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            obj = json.loads(line)
            out[obj["id"]] = obj
    return out


def _against_ref_predictor(task, truth, refs_by_id):
    def predictor(item: tasks.RatedSample):
        obj = truth[item.id]
        test_seq = alignment.TokenSequence(
            id=item.id,
            words=tuple(obj["words"]),
            breaks=tuple(alignment.BreakClass(b) for b in obj["breaks"]),
        )
        ref_id = item.id.removeprefix("esl-")
        refs = refs_by_id.get(ref_id) or refs_by_id.get(item.id)
        if not refs:
            raise DataError(f"no reference sequence for {item.id!r}")
        if task == "overall":
            score = baseline.best_of_references(test_seq, refs)
            pred = baseline.rank_from_similarity(score)
            return [(rank_to_class(item.overall), rank_to_class(pred))]
        pred_ranks = baseline.fine_rank_against_reference(test_seq, refs[0])
        return [
            (rank_to_class(t), rank_to_class(p))
            for t, p in zip(item.fine, pred_ranks, strict=True)
        ]

    return predictor


def make_trained_predictor(task, model, model_cfg, vocab, tcfg, init_ckpt):
    """train_fn for cross_validate over RatedSamples."""

    def train_fn(train_items, fold_seed):
        fold_tcfg = tasks.TrainConfig(
            batch_size=tcfg.batch_size,
            epochs=tcfg.epochs,
            lr=tcfg.lr,
            seed=int(fold_seed),
            max_len=tcfg.max_len,
            class_weighted=tcfg.class_weighted,
        )
        fn = tasks.finetune_overall if task == "overall" else tasks.finetune_finegrained
        ckpt = fn(train_items, init_ckpt, fold_tcfg, model=model, model_cfg=model_cfg, vocab=vocab)

        def predictor(item: tasks.RatedSample):
            if task == "overall":
                pred, _ = tasks.predict_overall(ckpt, item.ids, item.break_mask)
                return [(rank_to_class(item.overall), rank_to_class(pred))]
            preds = tasks.predict_finegrained(ckpt, item.ids, item.break_mask)
            return [
                (rank_to_class(t), rank_to_class(p))
                for t, p in zip(item.fine, preds, strict=True)
            ]

        return predictor

    return train_fn


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    vocab = _read_vocab(args.vocab)
    with open(args.infile) as f:
        dataset = tasks.read_rated(f)
    k = args.k if args.k is not None else cfg.eval.get("k", 5)
    labels = [rank_to_class(s.overall) for s in dataset]

    if args.model == "against-ref":
        if not args.refs or not args.truth:
            raise DataError("--model against-ref needs --refs and --truth")
        truth = _load_truth(args.truth)
        refs_by_id: dict[str, list] = {}
        for seq in _read_sequences(args.refs):
            refs_by_id.setdefault(seq.id, []).append(seq)
        predictor = _against_ref_predictor(args.task, truth, refs_by_id)
        train_fn = lambda items, fold_seed: predictor
        name = "Against-Ref"
    else:
        tcfg = cfg.build("train")
        if args.model == "bilstm":
            model, model_cfg, init = "bilstm", cfg.build("bilstm", vocab_size=vocab.size), None
            name = "Bi-LSTM"
        elif args.model == "scratch":
            model, model_cfg, init = "encoder", cfg.build("encoder", vocab_size=vocab.size), None
            name = "Scratch"
        else:
            init = load_checkpoint(args.model, expect_kind="rbtd")
            model, model_cfg = "encoder", init.model_cfg
            name = "Break-Pretrained"
        train_fn = make_trained_predictor(args.task, model, model_cfg, vocab, tcfg, init)

    report = metrics.cross_validate(dataset, labels, train_fn, k=k, seed=cfg.seed)
    text = metrics.format_report(report, title=f"{name} / {args.task}")
    print(text)
    if args.out:
        write_atomic(args.out, json.dumps(report, indent=2, sort_keys=True) + "\n")
        write_atomic(args.out + ".txt", text + "\n")
        _echo_config(cfg, args.out)
    return 0


def cmd_score(args) -> int:
    overall_ckpt = load_checkpoint(args.overall_ckpt, expect_kind="overall") if args.overall_ckpt else None
    fine_ckpt = load_checkpoint(args.fine_ckpt, expect_kind="fine") if args.fine_ckpt else None
    if overall_ckpt is None and fine_ckpt is None:
        raise DataError("score needs --overall-ckpt and/or --fine-ckpt")
    vocab = (overall_ckpt or fine_ckpt).vocab
    parse = alignment.parse_ctm if args.format == "ctm" else alignment.parse_tsv
    with open(args.align) as f:
        utts = parse(f)
    for utt in utts:
        seq = alignment.build_sequence(utt)
        ids, mask = encode(seq, vocab)
        print(f"utterance {seq.id}:")
        if overall_ckpt is not None:
            rank, probs = tasks.predict_overall(overall_ckpt, ids, mask)
            probs_text = " ".join(
                f"{r.label}={probs[rank_to_class(r)]:.3f}" for r in Rank
            )
            print(f"  overall: {rank.label}  ({probs_text})")
        if fine_ckpt is not None:
            ranks = tasks.predict_finegrained(fine_ckpt, ids, mask)
            for i, r in enumerate(ranks):
                left, right = seq.words[i], seq.words[i + 1]
                print(f"  {left} [{seq.breaks[i].token}] {right}: {r.label}")
    return 0


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="breakscore", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="YAML run configuration")
            sp.add_argument("--seed", type=int, help="override the global seed")

    sp = sub.add_parser("ingest", help="alignment files -> token-sequence JSONL")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--format", choices=("ctm", "tsv"), default="ctm")
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_ingest)

    sp = sub.add_parser("synth", help="generate native + learner corpora")
    common(sp)
    sp.add_argument("--n-sentences", type=int, dest="n_sentences")
    sp.add_argument("--out-dir", required=True)
    sp.set_defaults(fn=cmd_synth)

    sp = sub.add_parser("corrupt", help="token sequences -> pretraining dataset")
    common(sp)
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_corrupt)

    sp = sub.add_parser("pretrain", help="train the break-corruption discriminator")
    common(sp)
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int, dest="batch_size")
    sp.add_argument("--lr", type=float)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_pretrain)

    sp = sub.add_parser("finetune", help="train an assessment head")
    common(sp)
    sp.add_argument("--task", choices=("overall", "fine"), required=True)
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--vocab", required=True)
    sp.add_argument("--init", help="checkpoint to initialize the encoder from")
    sp.add_argument("--model", choices=("encoder", "bilstm"), default="encoder")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int, dest="batch_size")
    sp.add_argument("--lr", type=float)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=cmd_finetune)

    sp = sub.add_parser("eval", help="cross-validated evaluation report")
    common(sp)
    sp.add_argument("--task", choices=("overall", "fine"), required=True)
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--vocab", required=True)
    sp.add_argument(
        "--model",
        required=True,
        help="'scratch', 'bilstm', 'against-ref', or a pretrained checkpoint path",
    )
    sp.add_argument("--refs", help="reference token-sequence JSONL (against-ref)")
    sp.add_argument("--truth", help="ground-truth sidecar JSONL (against-ref)")
    sp.add_argument("--k", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int, dest="batch_size")
    sp.add_argument("--lr", type=float)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_eval)

    sp = sub.add_parser("score", help="score an alignment file with trained models")
    sp.add_argument("--overall-ckpt")
    sp.add_argument("--fine-ckpt")
    sp.add_argument("--align", required=True)
    sp.add_argument("--format", choices=("ctm", "tsv"), default="ctm")
    sp.set_defaults(fn=cmd_score)

    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except NumericError as e:
        log.error("numeric failure: %s", e)
        return 3
    except (ParseError, DataError, BreakscoreError, OSError) as e:
        log.error("%s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
