"""Command line entry point.

Subcommands: gen-data, augment, stats, train, predict, eval, gradcheck.
Results go to stdout, progress and diagnostics to stderr. Exit codes:
0 success, 1 usage error, 2 data/validation error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import (
    boundary_tags,
    conll_io,
    decoder,
    embeddings,
    gradcheck,
    labeler,
    scorer,
    synth_corpus,
)
from .errors import ConfigError, DataError, ParseError, ShapeError, StructureError

USAGE_ERROR = 1
DATA_ERROR = 2


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boundary-srl",
        description="Argument labeling with boundary tags: data tools, training, inference, scoring.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a synthetic corpus")
    gen.add_argument("--out", required=True)
    gen.add_argument("--sentences", type=int, default=50)
    gen.add_argument("--len-min", type=int, default=7)
    gen.add_argument("--len-max", type=int, default=12)
    gen.add_argument("--preds-min", type=int, default=1)
    gen.add_argument("--preds-max", type=int, default=1)
    gen.add_argument("--args-min", type=int, default=1)
    gen.add_argument("--args-max", type=int, default=2)
    gen.add_argument("--window", type=int, default=3)
    gen.add_argument("--word-vocab", type=int, default=40)
    gen.add_argument("--pos-vocab", type=int, default=3)
    gen.add_argument("--labels", default="A0,A1", help="comma-separated label alphabet")
    gen.add_argument("--seed", type=int, default=0)
    gen.set_defaults(func=cmd_gen_data)

    aug = sub.add_parser("augment", help="insert boundary tags into every label column")
    aug.add_argument("--data", required=True)
    aug.add_argument("--out", required=True)
    aug.add_argument("--format", default="simple")
    aug.set_defaults(func=cmd_augment)

    stats = sub.add_parser("stats", help="argument/non-argument label distribution")
    stats.add_argument("--data", required=True)
    stats.add_argument(
        "--scope",
        choices=[boundary_tags.SCOPE_FULL, boundary_tags.SCOPE_WINDOW],
        default=boundary_tags.SCOPE_FULL,
    )
    stats.add_argument("--format", default="simple")
    stats.set_defaults(func=cmd_stats)

    train = sub.add_parser("train", help="fit a model and keep the best dev checkpoint")
    train.add_argument("--data", required=True)
    train.add_argument("--dev", required=True)
    train.add_argument("--out", required=True, help="output directory")
    train.add_argument("--config", help="key=value config file")
    train.add_argument("--format", default="simple")
    train.add_argument("--seed", type=int)
    train.add_argument("--workers", type=int, default=1)
    train.add_argument("--no-aux-tags", action="store_true")
    train.add_argument("--no-self-attention", action="store_true")
    train.add_argument("--loss-window", choices=[boundary_tags.SCOPE_FULL, boundary_tags.SCOPE_WINDOW])
    train.add_argument("--pretrained", help="whitespace-separated word vector file")
    train.add_argument("--external", help="binary per-token vector file")
    train.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config field (repeatable)",
    )
    train.set_defaults(func=cmd_train)

    pred = sub.add_parser("predict", help="label a corpus with a trained checkpoint")
    pred.add_argument("--data", required=True)
    pred.add_argument("--checkpoint", required=True)
    pred.add_argument("--out", required=True)
    pred.add_argument("--format", default="simple")
    pred.add_argument("--external")
    pred.add_argument("--workers", type=int, default=1)
    pred.set_defaults(func=cmd_predict)

    ev = sub.add_parser("eval", help="score predicted arguments against gold")
    ev.add_argument("--data", required=True, help="gold corpus")
    ev.add_argument("--pred", required=True, help="predicted corpus")
    ev.add_argument("--format", default="simple")
    ev.set_defaults(func=cmd_eval)

    gc = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    gc.add_argument("--preset", default="toy")
    gc.add_argument("--seed", type=int, default=0, help="first of five consecutive seeds")
    gc.set_defaults(func=cmd_gradcheck)

    return parser


def cmd_gen_data(args) -> int:
    config = synth_corpus.GenConfig(
        sentences=args.sentences,
        len_min=args.len_min,
        len_max=args.len_max,
        preds_min=args.preds_min,
        preds_max=args.preds_max,
        args_min=args.args_min,
        args_max=args.args_max,
        window=args.window,
        word_vocab=args.word_vocab,
        pos_vocab=args.pos_vocab,
        labels=tuple(lab for lab in args.labels.split(",") if lab),
        seed=args.seed,
    )
    corpus = synth_corpus.generate(config)
    conll_io.write_file(args.out, corpus)
    _log(f"wrote {len(corpus.sentences)} sentences to {args.out}")
    return 0


def cmd_augment(args) -> int:
    fmt = conll_io.FormatConfig.resolve(args.format)
    corpus = conll_io.parse_file(args.data, fmt=fmt)
    conll_io.write_file(args.out, boundary_tags.augment_corpus(corpus), fmt=fmt)
    _log(f"augmented {len(corpus.sentences)} sentences into {args.out}")
    return 0


def cmd_stats(args) -> int:
    fmt = conll_io.FormatConfig.resolve(args.format)
    corpus = conll_io.parse_file(args.data, fmt=fmt)
    instances = conll_io.extract_instances(corpus)
    if args.scope == boundary_tags.SCOPE_WINDOW:
        instances = [
            inst
            if any(l in (boundary_tags.BEGIN_TAG, boundary_tags.END_TAG) for l in inst.gold_labels)
            else boundary_tags.augment_labels(inst)
            for inst in instances
        ]
    stats = boundary_tags.compute_label_stats(instances, args.scope)
    print(f"{'scope':16} {'args%':>8} {'nonargs%':>9} {'ratio':>8}")
    print(
        f"{stats.scope:16} {100 * stats.arg_fraction:8.2f} "
        f"{100 * stats.nonarg_fraction:9.2f} {stats.ratio_string:>8}"
    )
    print(f"scope={stats.scope}")
    print(f"arg_fraction={stats.arg_fraction:.6f}")
    print(f"nonarg_fraction={stats.nonarg_fraction:.6f}")
    print(f"arg_count={stats.arg_count}")
    print(f"nonarg_count={stats.nonarg_count}")
    print(f"ratio={stats.ratio_string}")
    return 0


def _train_config(args) -> labeler.TrainConfig:
    values = {}
    if args.config:
        values.update(labeler.parse_config_file(args.config))
    for override in args.set:
        if "=" not in override:
            raise ConfigError(f"--set expects KEY=VALUE, got {override!r}")
        key, _, value = override.partition("=")
        key = key.strip()
        if key not in labeler.TrainConfig.__dataclass_fields__:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = labeler.coerce_config_value(key, value.strip())
    if args.seed is not None:
        values["seed"] = args.seed
    if args.no_aux_tags:
        values["use_aux_tags"] = False
    if args.no_self_attention:
        values["use_attention"] = False
    if args.loss_window:
        values["loss_window"] = args.loss_window
    config = labeler.TrainConfig(**values)
    config.validate()
    return config


def cmd_train(args) -> int:
    fmt = conll_io.FormatConfig.resolve(args.format)
    config = _train_config(args)
    corpus_train = conll_io.parse_file(args.data, fmt=fmt)
    corpus_dev = conll_io.parse_file(args.dev, fmt=fmt)
    pretrained = None
    if args.pretrained:
        pretrained = embeddings.load_pretrained_file(args.pretrained, config.pretrained_dim)
    external = embeddings.load_external_vectors(args.external) if args.external else None

    os.makedirs(args.out, exist_ok=True)

    def progress(record):
        _log(
            f"epoch {record['epoch']:3d}  loss {record['train_loss']:.4f}  "
            f"dev F1 {record['dev_f1']:.4f}"
        )

    params, history = labeler.train(
        corpus_train,
        corpus_dev,
        config,
        callbacks=[progress],
        pretrained=pretrained,
        external=external,
    )
    checkpoint = os.path.join(args.out, "checkpoint.bin")
    labeler.save_checkpoint(checkpoint, params, config)
    with open(os.path.join(args.out, "history.json"), "w", encoding="utf-8") as handle:
        json.dump(history, handle, indent=2, sort_keys=True)
    best = max(history, key=lambda r: r["dev_f1"])
    print(f"checkpoint={checkpoint}")
    print(f"best_epoch={best['epoch']}")
    print(f"best_dev_f1={best['dev_f1']:.6f}")
    return 0


def cmd_predict(args) -> int:
    fmt = conll_io.FormatConfig.resolve(args.format)
    params, config = labeler.load_checkpoint(args.checkpoint)
    corpus = conll_io.parse_file(args.data, fmt=fmt)
    external = embeddings.load_external_vectors(args.external) if args.external else None
    predicted = decoder.predict_corpus(corpus, params, config, external=external, workers=args.workers)
    conll_io.write_file(args.out, predicted, fmt=fmt)
    _log(f"labeled {len(predicted.sentences)} sentences into {args.out}")
    return 0


def cmd_eval(args) -> int:
    fmt = conll_io.FormatConfig.resolve(args.format)
    gold_corpus = conll_io.parse_file(args.data, fmt=fmt)
    pred_corpus = conll_io.parse_file(args.pred, fmt=fmt)
    gold_sets = _argument_sets(gold_corpus)
    pred_sets = _argument_sets(pred_corpus)
    report = scorer.evaluate(pred_sets, gold_sets)
    print(f"{'precision':>10} {'recall':>10} {'f1':>10}")
    print(f"{report.precision:10.4f} {report.recall:10.4f} {report.f1:10.4f}")
    print(f"precision={report.precision:.6f}")
    print(f"recall={report.recall:.6f}")
    print(f"f1={report.f1:.6f}")
    print(f"predicted={report.predicted}")
    print(f"gold={report.gold}")
    print(f"correct={report.correct}")
    return 0


def _argument_sets(corpus) -> list:
    sets = []
    for inst in conll_io.extract_instances(corpus):
        stripped = boundary_tags.strip_tags(inst)
        sets.append(
            decoder.ArgumentSet(
                predicate_index=inst.predicate_index,
                arguments=frozenset(
                    (i, lab)
                    for i, lab in enumerate(stripped.gold_labels)
                    if boundary_tags.is_argument(lab)
                ),
                sentence_id=inst.sentence.sent_id,
            )
        )
    return sets


def cmd_gradcheck(args) -> int:
    seeds = tuple(range(args.seed, args.seed + 5))
    report = gradcheck.run_gradcheck(seeds=seeds, preset=args.preset)
    for name in sorted(report.per_tensor):
        print(f"{name}: rel_err={report.per_tensor[name]:.3e}")
    print(f"max_rel_err={report.max_rel_error:.3e}")
    print(f"threshold={gradcheck.PASS_THRESHOLD:.0e}")
    if not report.passed:
        _log("gradient check FAILED")
        return DATA_ERROR
    return 0


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on usage errors and --help
        return 0 if exc.code == 0 else USAGE_ERROR
    try:
        return args.func(args)
    except (ParseError, StructureError, ConfigError, ShapeError, DataError) as exc:
        _log(f"error: {exc}")
        return DATA_ERROR


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
